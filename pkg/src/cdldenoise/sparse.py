"""Sparse-coding primitives.

Covers the soft-thresholding operator and the row-sweep code update used
during dictionary training, plus the greedy pursuits used at denoise
time: single patch-pair coding (orthogonal matching pursuit on the
stacked two-modality dictionary) and simultaneous coding of a cluster of
patch pairs under one shared support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ZeroAtom

if TYPE_CHECKING:
    from .dictlearn import DictionarySet

# Stop reasons reported by the pursuits; exactly one applies per run.
STOP_RESIDUAL = "residual"
STOP_SUPPORT_CAP = "support_cap"
STOP_EXHAUSTED = "exhausted"

_ATOM_NORM_FLOOR = 1e-12
_GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class CodingConfig:
    """Pursuit parameters shared by single and group coding.

    The stacked-residual energy budget is gain * patch_dim * sigma_norm**2
    (per signal column), with sigma_norm the noise std on the normalized
    pixel scale.
    """

    sigma_norm: float
    patch_dim: int
    gain: float = 1.15
    max_support: int = 16

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be > 0")
        if self.max_support < 1:
            raise ValueError("max_support must be >= 1")
        if self.sigma_norm < 0:
            raise ValueError("sigma_norm must be >= 0")
        if self.patch_dim < 1:
            raise ValueError("patch_dim must be >= 1")

    @property
    def residual_budget(self) -> float:
        return self.gain * self.patch_dim * self.sigma_norm**2


@dataclass(frozen=True)
class JointCode:
    """Sparse triple for one patch pair, split by dictionary role.

    Each part is a tuple of (index, value) pairs in ascending index order
    with nonzero values.  stop_reason records which stopping condition
    ended the pursuit.
    """

    common: tuple[tuple[int, float], ...]
    target_unique: tuple[tuple[int, float], ...]
    guide_unique: tuple[tuple[int, float], ...]
    stop_reason: str = STOP_RESIDUAL

    def __post_init__(self):
        for part in (self.common, self.target_unique, self.guide_unique):
            indices = [idx for idx, _ in part]
            if indices != sorted(set(indices)):
                raise ValueError("indices must be strictly ascending")
            if any(val == 0 for _, val in part):
                raise ValueError("stored values must be nonzero")

    @property
    def total_nonzeros(self) -> int:
        return len(self.common) + len(self.target_unique) + len(self.guide_unique)

    def stacked_indices(self, k: int) -> tuple[int, ...]:
        """Indices in the stacked 3k coefficient space, ascending."""
        out = [idx for idx, _ in self.common]
        out += [k + idx for idx, _ in self.target_unique]
        out += [2 * k + idx for idx, _ in self.guide_unique]
        return tuple(out)


@dataclass(frozen=True)
class GroupCode:
    """Per-member codes of one cluster, sharing a single stacked support.

    support lives in the stacked 3k index space; every member's nonzero
    stacked indices are a subset of it.
    """

    support: tuple[int, ...]
    codes: tuple[JointCode, ...]
    stop_reason: str = STOP_RESIDUAL


@dataclass(frozen=True)
class StackedDictionary:
    """Two-modality stacked dictionary prepared for pursuit.

    Column layout: [common | target-unique | guide-unique], where common
    atoms occupy both modality halves and unique atoms one half.  unit
    holds L2-normalized columns used only for atom selection; returned
    coefficients always refer to the unnormalized columns.
    """

    matrix: np.ndarray  # (2n, 3k)
    unit: np.ndarray  # (2n, 3k)
    norms: np.ndarray  # (3k,)
    selectable: np.ndarray  # (3k,) bool
    patch_dim: int
    atoms: int

    @classmethod
    def from_set(cls, ds: "DictionarySet") -> "StackedDictionary":
        n, k = ds.n, ds.k
        matrix = np.zeros((2 * n, 3 * k))
        matrix[:n, :k] = ds.target_common
        matrix[n:, :k] = ds.guide_common
        matrix[:n, k : 2 * k] = ds.target_unique
        matrix[n:, 2 * k :] = ds.guide_unique
        norms = np.linalg.norm(matrix, axis=0)
        selectable = norms > _ATOM_NORM_FLOOR
        unit = np.where(selectable, matrix / np.where(selectable, norms, 1.0), 0.0)
        return cls(
            matrix=matrix,
            unit=unit,
            norms=norms,
            selectable=selectable,
            patch_dim=n,
            atoms=k,
        )


def soft_threshold(value, threshold):
    """sign(a) * max(|a| - threshold, 0), elementwise."""
    return np.sign(value) * np.maximum(np.abs(value) - threshold, 0.0)


def ista_row_sweep(
    codes: np.ndarray, dictionary: np.ndarray, targets: np.ndarray, penalty: float
) -> np.ndarray:
    """One sequential sweep of row-wise code updates, in place.

    Row j is replaced by the exact minimizer of the l1-penalized residual
    with all other rows fixed: the soft threshold scales by the atom
    energy so the objective is non-increasing for non-unit atoms too (it
    reduces to the plain shrinkage step when atoms have unit norm).
    """
    if dictionary.shape[0] != targets.shape[0]:
        raise ValueError("dictionary and target row dimensions disagree")
    if codes.shape != (dictionary.shape[1], targets.shape[1]):
        raise ValueError("code matrix shape disagrees with dictionary/targets")
    energies = np.einsum("ij,ij->j", dictionary, dictionary)
    if np.any(np.sqrt(energies) < _ATOM_NORM_FLOOR):
        raise ZeroAtom("an atom has norm < 1e-12; reseed it before sweeping")
    residual = targets - dictionary @ codes
    for j in range(dictionary.shape[1]):
        atom = dictionary[:, j]
        pivot = codes[j] + (atom @ residual) / energies[j]
        updated = soft_threshold(pivot, penalty / energies[j])
        delta = updated - codes[j]
        moved = np.nonzero(delta)[0]
        if moved.size:
            residual[:, moved] -= np.outer(atom, delta[moved])
        codes[j] = updated
    return codes


def _greedy_pursuit(
    sd: StackedDictionary, signals: np.ndarray, budget: float, max_support: int
) -> tuple[list[int], np.ndarray, str]:
    """Shared greedy loop: OMP for one column, simultaneous OMP for several.

    Selection maximizes the sum over signal columns of squared
    correlations against unit-normalized atoms; coefficients are the
    least-squares solution on the shared active set against the
    unnormalized atoms.  Atoms whose addition makes the active Gram
    matrix numerically singular are dropped and never retried.
    """
    selectable = sd.selectable.copy()
    support: list[int] = []
    coefs = np.zeros((0, signals.shape[1]))
    residual = signals.copy()
    while True:
        if float(np.sum(residual * residual)) <= budget:
            return support, coefs, STOP_RESIDUAL
        if len(support) >= max_support:
            return support, coefs, STOP_SUPPORT_CAP
        if not selectable.any():
            return support, coefs, STOP_EXHAUSTED
        corr = sd.unit.T @ residual
        scores = np.einsum("ij,ij->i", corr, corr)
        scores[~selectable] = -1.0
        best = int(np.argmax(scores))
        if scores[best] <= 0.0:
            # residual orthogonal to every remaining atom: nothing can improve
            return support, coefs, STOP_EXHAUSTED
        trial = support + [best]
        active = sd.matrix[:, trial]
        gram = active.T @ active
        if np.linalg.cond(gram) > _GRAM_COND_LIMIT:
            selectable[best] = False
            continue
        solution, *_ = np.linalg.lstsq(active, signals, rcond=None)
        selectable[best] = False
        support = trial
        coefs = solution
        residual = signals - active @ solution


def _split_code(
    support: list[int], values: np.ndarray, atoms: int, reason: str
) -> JointCode:
    parts: dict[int, list[tuple[int, float]]] = {0: [], 1: [], 2: []}
    for idx, val in zip(support, values):
        if val == 0.0:
            continue
        parts[idx // atoms].append((idx % atoms, float(val)))
    for bucket in parts.values():
        bucket.sort()
    return JointCode(
        common=tuple(parts[0]),
        target_unique=tuple(parts[1]),
        guide_unique=tuple(parts[2]),
        stop_reason=reason,
    )


def _prepare(ds) -> StackedDictionary:
    if isinstance(ds, StackedDictionary):
        return ds
    return StackedDictionary.from_set(ds)


def joint_omp(x: np.ndarray, y: np.ndarray, ds, cfg: CodingConfig) -> JointCode:
    """Greedy joint coding of one DC-removed patch pair.

    Runs orthogonal matching pursuit over the stacked two-modality
    dictionary until the stacked residual energy drops below the budget,
    the support cap is reached, or no admissible atom remains.

    ds may be a DictionarySet or a prebuilt StackedDictionary (callers
    coding many patches should prebuild once).
    """
    sd = _prepare(ds)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != sd.patch_dim or y.shape[0] != sd.patch_dim:
        raise ValueError("patch vectors must have the dictionary patch dimension")
    signals = np.concatenate([x, y])[:, None]
    support, coefs, reason = _greedy_pursuit(
        sd, signals, cfg.residual_budget, cfg.max_support
    )
    values = coefs[:, 0] if coefs.size else np.zeros(0)
    return _split_code(support, values, sd.atoms, reason)


def group_somp(xs: np.ndarray, ys: np.ndarray, ds, cfg: CodingConfig) -> GroupCode:
    """Simultaneous coding of one cluster of DC-removed patch pairs.

    All members share a single support; the residual budget scales with
    the cluster size m.  With m = 1 this coincides with joint_omp.
    """
    sd = _prepare(ds)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if xs.shape != ys.shape:
        raise ValueError("member matrices must share one shape")
    if xs.shape[0] != sd.patch_dim:
        raise ValueError("patch vectors must have the dictionary patch dimension")
    members = xs.shape[1]
    if members < 1:
        raise ValueError("a cluster needs at least one member")
    signals = np.vstack([xs, ys])
    support, coefs, reason = _greedy_pursuit(
        sd, signals, members * cfg.residual_budget, cfg.max_support
    )
    codes = tuple(
        _split_code(support, coefs[:, j] if coefs.size else np.zeros(0), sd.atoms, reason)
        for j in range(members)
    )
    return GroupCode(support=tuple(sorted(support)), codes=codes, stop_reason=reason)
