"""Coupled dictionary learning by alternating code sweeps and atom updates.

Training alternates two stages.  The common stage fits one shared code
matrix against both modalities at once through the stacked dictionary
[target_common; guide_common]; the unique stages fit each modality's
leftover against its own dictionary.  Atom updates are block coordinate
steps followed by projection onto the unit ball, so the constraint set
is preserved and the objective never increases.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import BadMagic, CorpusTooSmall, ShapeMismatch
from .patches import TrainingSet
from .sparse import ista_row_sweep

logger = logging.getLogger(__name__)

_MAGIC = b"CDL1"
_NORM_TOL = 1e-12

StageCallback = Callable[[str, "DictionarySet", "CodeState"], None]


@dataclass(frozen=True)
class DictionarySet:
    """The four learned dictionaries, n x k each, atoms as columns.

    Common atoms are constrained as stacked pairs: the stacked column
    [target_common_j; guide_common_j] has norm <= 1, while each unique
    atom is individually norm-bounded.
    """

    target_common: np.ndarray
    target_unique: np.ndarray
    guide_common: np.ndarray
    guide_unique: np.ndarray

    def __post_init__(self):
        mats = {}
        shape = None
        for name in ("target_common", "target_unique", "guide_common", "guide_unique"):
            m = np.array(getattr(self, name), dtype=np.float64, order="C")
            if m.ndim != 2:
                raise ValueError(f"{name} must be a 2-D matrix")
            if shape is None:
                shape = m.shape
            elif m.shape != shape:
                raise ValueError("all four dictionaries must share one shape")
            mats[name] = m
        pair_norms = np.sqrt(
            np.einsum("ij,ij->j", mats["target_common"], mats["target_common"])
            + np.einsum("ij,ij->j", mats["guide_common"], mats["guide_common"])
        )
        if np.any(pair_norms > 1.0 + _NORM_TOL):
            raise ValueError("a stacked common atom pair exceeds unit norm")
        for name in ("target_unique", "guide_unique"):
            norms = np.linalg.norm(mats[name], axis=0)
            if np.any(norms > 1.0 + _NORM_TOL):
                raise ValueError(f"an atom of {name} exceeds unit norm")
        for name, m in mats.items():
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def n(self) -> int:
        return self.target_common.shape[0]

    @property
    def k(self) -> int:
        return self.target_common.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the desk-scale protocol."""

    lambd: float = 0.05
    atoms: int = 1024
    inner_sweeps: int = 20
    outer_rounds: int = 5
    seed: int = 0
    atom_reseed_threshold: float = 1e-12

    def __post_init__(self):
        if self.lambd <= 0:
            raise ValueError("lambd must be > 0")
        if min(self.atoms, self.inner_sweeps) < 1 or self.outer_rounds < 0:
            raise ValueError("counts must be positive (outer_rounds may be 0)")


@dataclass
class CodeState:
    """Dense sparse-code matrices for the full training set, k x T each.

    The state warm-starts across stages and rounds; training functions
    never mutate a CodeState they receive.
    """

    common: np.ndarray
    target_unique: np.ndarray
    guide_unique: np.ndarray

    @classmethod
    def zeros(cls, atoms: int, count: int) -> "CodeState":
        return cls(
            common=np.zeros((atoms, count)),
            target_unique=np.zeros((atoms, count)),
            guide_unique=np.zeros((atoms, count)),
        )


def _unit_columns(cols: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Normalize columns to unit norm, substituting random directions for zeros."""
    cols = cols.copy()
    norms = np.linalg.norm(cols, axis=0)
    dead = norms < _NORM_TOL
    if dead.any():
        repl = rng.standard_normal((cols.shape[0], int(dead.sum())))
        cols[:, dead] = repl
        norms = np.linalg.norm(cols, axis=0)
    return cols / norms


def init_dictionaries(ts: TrainingSet, atoms: int, seed: int = 0) -> DictionarySet:
    """Seed dictionaries from randomly selected training columns.

    Common atoms are stacked training pairs normalized jointly; unique
    atoms are independently sampled single-modality columns.  Sampling is
    without replacement, so with T == atoms every pair is used once.
    """
    if ts.count < atoms:
        raise CorpusTooSmall(f"need at least {atoms} training columns, have {ts.count}")
    rng = np.random.default_rng(seed)
    n = ts.patch_dim
    idx_common = rng.choice(ts.count, size=atoms, replace=False)
    stacked = _unit_columns(
        np.vstack([ts.target[:, idx_common], ts.guide[:, idx_common]]), rng
    )
    idx_target = rng.choice(ts.count, size=atoms, replace=False)
    idx_guide = rng.choice(ts.count, size=atoms, replace=False)
    return DictionarySet(
        target_common=stacked[:n],
        guide_common=stacked[n:],
        target_unique=_unit_columns(ts.target[:, idx_target], rng),
        guide_unique=_unit_columns(ts.guide[:, idx_guide], rng),
    )


def _update_atoms(
    dictionary: np.ndarray,
    codes: np.ndarray,
    targets: np.ndarray,
    reseed_floor: float,
) -> None:
    """Sequential block-coordinate atom updates with unit-ball projection.

    Rows with energy below reseed_floor make the closed-form step
    undefined; those atoms are reseeded with the worst-represented target
    column (normalized) and their code row is cleared.
    """
    residual = targets - dictionary @ codes
    dim = dictionary.shape[0]
    reseed_used: set[int] = set()
    for j in range(dictionary.shape[1]):
        row = codes[j]
        energy = float(row @ row)
        old = dictionary[:, j].copy()
        if energy < reseed_floor:
            column_errors = np.einsum("ij,ij->j", residual, residual)
            if reseed_used:
                # a reseeded atom has a zero code row, so the residual does not
                # move; mask already-used columns or dead atoms would collide
                column_errors = column_errors.copy()
                column_errors[list(reseed_used)] = -1.0
            worst = int(np.argmax(column_errors))
            reseed_used.add(worst)
            seed_col = targets[:, worst]
            norm = np.linalg.norm(seed_col)
            if norm < _NORM_TOL:
                seed_col = np.zeros(dim)
                seed_col[j % dim] = 1.0
                norm = 1.0
            moved = np.nonzero(row)[0]
            if moved.size:
                residual[:, moved] += np.outer(old, row[moved])
                codes[j] = 0.0
            dictionary[:, j] = seed_col / norm
            continue
        updated = old + (residual @ row) / energy
        updated /= max(np.linalg.norm(updated), 1.0)
        moved = np.nonzero(row)[0]
        if moved.size:
            residual[:, moved] -= np.outer(updated - old, row[moved])
        dictionary[:, j] = updated


def _alternate(
    dictionary: np.ndarray,
    codes: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> None:
    for _ in range(cfg.inner_sweeps):
        ista_row_sweep(codes, dictionary, targets, cfg.lambd)
        _update_atoms(dictionary, codes, targets, cfg.atom_reseed_threshold)


def train_common(
    ds: DictionarySet, cs: CodeState, ts: TrainingSet, cfg: TrainConfig
) -> tuple[DictionarySet, CodeState]:
    """Alternate shared-code sweeps and stacked common-atom updates.

    The unique dictionaries and codes are held fixed; the stage target is
    what they leave unexplained in each modality.
    """
    n = ds.n
    stacked = np.vstack([ds.target_common, ds.guide_common])
    codes = cs.common.copy()
    targets = np.vstack(
        [
            ts.target - ds.target_unique @ cs.target_unique,
            ts.guide - ds.guide_unique @ cs.guide_unique,
        ]
    )
    _alternate(stacked, codes, targets, cfg)
    new_ds = DictionarySet(
        target_common=stacked[:n].copy(),
        guide_common=stacked[n:].copy(),
        target_unique=ds.target_unique,
        guide_unique=ds.guide_unique,
    )
    return new_ds, CodeState(
        common=codes, target_unique=cs.target_unique, guide_unique=cs.guide_unique
    )


def train_unique(
    ds: DictionarySet, cs: CodeState, ts: TrainingSet, cfg: TrainConfig
) -> tuple[DictionarySet, CodeState]:
    """Alternate per-modality sweeps for the unique dictionaries.

    First the target-modality pair (dictionary, codes) is refined against
    what the common part leaves over, then the guide-modality pair; the
    common dictionaries and codes are untouched.
    """
    target_dict = ds.target_unique.copy()
    target_codes = cs.target_unique.copy()
    _alternate(target_dict, target_codes, ts.target - ds.target_common @ cs.common, cfg)

    guide_dict = ds.guide_unique.copy()
    guide_codes = cs.guide_unique.copy()
    _alternate(guide_dict, guide_codes, ts.guide - ds.guide_common @ cs.common, cfg)

    new_ds = DictionarySet(
        target_common=ds.target_common,
        guide_common=ds.guide_common,
        target_unique=target_dict,
        guide_unique=guide_dict,
    )
    return new_ds, CodeState(
        common=cs.common, target_unique=target_codes, guide_unique=guide_codes
    )


def objective(ds: DictionarySet, cs: CodeState, ts: TrainingSet, lambd: float) -> float:
    """Training objective: half squared stacked residual plus l1 code penalty."""
    err_target = ts.target - ds.target_common @ cs.common - ds.target_unique @ cs.target_unique
    err_guide = ts.guide - ds.guide_common @ cs.common - ds.guide_unique @ cs.guide_unique
    fit = 0.5 * (float(np.sum(err_target**2)) + float(np.sum(err_guide**2)))
    penalty = lambd * (
        float(np.abs(cs.common).sum())
        + float(np.abs(cs.target_unique).sum())
        + float(np.abs(cs.guide_unique).sum())
    )
    return fit + penalty


def train(
    ts: TrainingSet, cfg: TrainConfig, on_stage: StageCallback | None = None
) -> DictionarySet:
    """Full training loop: init, then alternate common and unique stages.

    The objective is logged once per stage; on_stage, when given, receives
    (stage_name, dictionaries, codes) at the same points so callers can
    trace convergence.
    """
    if ts.count < cfg.atoms:
        raise CorpusTooSmall(
            f"need at least {cfg.atoms} training columns, have {ts.count}"
        )
    ds = init_dictionaries(ts, cfg.atoms, cfg.seed)
    cs = CodeState.zeros(cfg.atoms, ts.count)

    def _log(stage: str) -> None:
        value = objective(ds, cs, ts, cfg.lambd)
        logger.info("stage=%s objective=%.6f", stage, value)
        if on_stage is not None:
            on_stage(stage, ds, cs)

    _log("init")
    for round_idx in range(cfg.outer_rounds):
        ds, cs = train_common(ds, cs, ts, cfg)
        _log(f"common[{round_idx}]")
        ds, cs = train_unique(ds, cs, ts, cfg)
        _log(f"unique[{round_idx}]")
    return ds


def save_dictionaries(ds: DictionarySet, path) -> None:
    """Write the bit-exact binary format: CDL1, u32le n and k, then the
    four matrices atom-contiguous in f64le."""
    blob = _MAGIC + struct.pack("<II", ds.n, ds.k)
    for matrix in (ds.target_common, ds.target_unique, ds.guide_common, ds.guide_unique):
        blob += matrix.astype("<f8").tobytes(order="F")
    with open(path, "wb") as fh:
        fh.write(blob)


def load_dictionaries(path) -> DictionarySet:
    """Read a dictionary file written by save_dictionaries."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise BadMagic(f"expected {_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 12:
        raise ShapeMismatch("file too short for the CDL1 header")
    n, k = struct.unpack_from("<II", blob, 4)
    if n < 1 or k < 1:
        raise ShapeMismatch(f"invalid dimensions n={n} k={k}")
    expected = 12 + 4 * n * k * 8
    if len(blob) != expected:
        raise ShapeMismatch(f"file holds {len(blob)} bytes, expected {expected}")
    mats = []
    offset = 12
    for _ in range(4):
        size = n * k * 8
        mats.append(
            np.frombuffer(blob[offset : offset + size], dtype="<f8").reshape(
                (n, k), order="F"
            )
        )
        offset += size
    return DictionarySet(
        target_common=mats[0],
        target_unique=mats[1],
        guide_common=mats[2],
        guide_unique=mats[3],
    )
