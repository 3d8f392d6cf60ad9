"""Shared helpers for the test suite."""

import numpy as np
import pytest

from cdldenoise import DictionarySet


def unit(v):
    return v / np.linalg.norm(v)


def random_dictionary(n, k, seed, zero_mean=False):
    """DictionarySet of random unit atoms; common pairs jointly normalized.

    zero_mean removes the per-half mean before normalizing, so patches
    built from these atoms survive DC removal unchanged.
    """
    rng = np.random.default_rng(seed)

    def draw(dim):
        v = rng.standard_normal(dim)
        return v

    pairs = np.empty((2 * n, k))
    for j in range(k):
        top, bottom = draw(n), draw(n)
        if zero_mean:
            top = top - top.mean()
            bottom = bottom - bottom.mean()
        pairs[:, j] = unit(np.concatenate([top, bottom]))
    uniq_t = np.empty((n, k))
    uniq_g = np.empty((n, k))
    for j in range(k):
        t, g = draw(n), draw(n)
        if zero_mean:
            t = t - t.mean()
            g = g - g.mean()
        uniq_t[:, j] = unit(t)
        uniq_g[:, j] = unit(g)
    return DictionarySet(
        target_common=pairs[:n],
        guide_common=pairs[n:],
        target_unique=uniq_t,
        guide_unique=uniq_g,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
