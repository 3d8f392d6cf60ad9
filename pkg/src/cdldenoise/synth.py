"""Synthetic multimodal pair generator for tests and demos.

Generated pairs obey the coupled data model: both modalities share one
piecewise-constant structure, and each carries its own low-amplitude
sinusoidal texture.
"""

from __future__ import annotations

import numpy as np

from .imagio import GrayImage

_RECTANGLES = 12


def synth_pair(
    width: int, height: int, seed: int = 0, unique_amplitude: float = 0.04
) -> tuple[GrayImage, GrayImage]:
    """Deterministic target/guide pair with shared structure.

    With unique_amplitude 0 the two images are identical; otherwise the
    shared piecewise-constant component dominates (pixel correlation of
    the pair stays above 0.5).
    """
    if width < 16 or height < 16:
        raise ValueError("width and height must both be >= 16")
    rng = np.random.default_rng(seed)

    base = np.full((height, width), 0.5)
    for _ in range(_RECTANGLES):
        r0, r1 = np.sort(rng.integers(0, height, size=2))
        c0, c1 = np.sort(rng.integers(0, width, size=2))
        base[r0 : r1 + 1, c0 : c1 + 1] = rng.uniform(0.2, 0.8)

    yy, xx = np.meshgrid(
        np.arange(height) / height, np.arange(width) / width, indexing="ij"
    )

    def _texture() -> np.ndarray:
        fx, fy = rng.uniform(2.0, 6.0, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return np.sin(2.0 * np.pi * (fx * xx + fy * yy) + phase)

    target = base + unique_amplitude * _texture()
    guide = base + unique_amplitude * _texture()

    if unique_amplitude > 0 and target.std() > 0 and guide.std() > 0:
        correlation = float(np.corrcoef(target.ravel(), guide.ravel())[0, 1])
        assert correlation > 0.5, (
            f"shared structure must dominate, correlation {correlation:.3f}"
        )
    return GrayImage(target), GrayImage(guide)
