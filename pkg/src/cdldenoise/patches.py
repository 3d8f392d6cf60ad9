"""Overlapping patch extraction, DC handling, and training-corpus assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import AlreadyCentered, DimensionMismatch, EmptyCorpus, PatchTooLarge
from .imagio import GrayImage


@dataclass(frozen=True)
class PatchGrid:
    """Extraction geometry: ordered top-left anchors of square patches.

    Anchors enumerate rows then columns at the given stride and always
    include the last valid row/column so image borders are covered.
    """

    image_width: int
    image_height: int
    side: int
    stride: int
    positions: np.ndarray  # (P, 2) int64 rows of (row, col)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.int64, order="C")
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (P, 2)")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def patch_count(self) -> int:
        return self.positions.shape[0]

    def flat_indices(self) -> np.ndarray:
        """Row-major flat pixel index of every patch pixel, shape (P, side*side)."""
        base = self.positions[:, 0] * self.image_width + self.positions[:, 1]
        offsets = (
            np.arange(self.side)[:, None] * self.image_width + np.arange(self.side)
        ).ravel()
        return base[:, None] + offsets[None, :]


@dataclass(frozen=True)
class PatchMatrix:
    """Vectorized patches as columns, plus removed per-patch means.

    dc is all zero while the DC components are still in the data.
    """

    data: np.ndarray  # (n, P)
    dc: np.ndarray  # (P,)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C")
        dc = np.array(self.dc, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("data must be a 2-D matrix")
        if dc.shape != (data.shape[1],):
            raise ValueError("dc length must equal the patch count")
        data.setflags(write=False)
        dc.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dc", dc)

    @property
    def patch_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class TrainingSet:
    """Registered DC-removed patch pairs; column i of both matrices shares one location."""

    target: np.ndarray  # (n, T)
    guide: np.ndarray  # (n, T)

    def __post_init__(self):
        tgt = np.array(self.target, dtype=np.float64, order="C")
        gd = np.array(self.guide, dtype=np.float64, order="C")
        if tgt.shape != gd.shape or tgt.ndim != 2:
            raise DimensionMismatch("target and guide matrices must share one shape")
        tgt.setflags(write=False)
        gd.setflags(write=False)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "guide", gd)

    @property
    def count(self) -> int:
        return self.target.shape[1]

    @property
    def patch_dim(self) -> int:
        return self.target.shape[0]


def _anchor_starts(extent: int, side: int, stride: int) -> list[int]:
    starts = list(range(0, extent - side + 1, stride))
    if starts[-1] != extent - side:
        starts.append(extent - side)
    return starts


def extract_grid(img: GrayImage, side: int, stride: int) -> tuple[PatchGrid, PatchMatrix]:
    """Extract all overlapping side x side patches at the given stride.

    Patches are vectorized row-major within the patch; DC is left intact
    (dc = 0).  The final row/column anchor is always included so every
    pixel is covered.
    """
    if side < 1 or stride < 1:
        raise ValueError("side and stride must be >= 1")
    if side > img.height or side > img.width:
        raise PatchTooLarge(
            f"side {side} exceeds image dimensions {img.width}x{img.height}"
        )
    rows = _anchor_starts(img.height, side, stride)
    cols = _anchor_starts(img.width, side, stride)
    positions = np.array([(r, c) for r in rows for c in cols], dtype=np.int64)
    windows = sliding_window_view(img.pixels, (side, side))
    data = (
        windows[np.ix_(rows, cols)]
        .reshape(len(rows) * len(cols), side * side)
        .T.copy()
    )
    grid = PatchGrid(
        image_width=img.width,
        image_height=img.height,
        side=side,
        stride=stride,
        positions=positions,
    )
    return grid, PatchMatrix(data=data, dc=np.zeros(data.shape[1]))


def remove_dc(pm: PatchMatrix) -> PatchMatrix:
    """Subtract each column's mean, recording it in dc."""
    if np.any(pm.dc):
        raise AlreadyCentered("DC components were already removed")
    means = pm.data.mean(axis=0)
    return PatchMatrix(data=pm.data - means, dc=means)


def build_training_set(
    target_imgs: list[GrayImage],
    guide_imgs: list[GrayImage],
    side: int,
    count: int,
    seed: int = 0,
) -> TrainingSet:
    """Sample `count` registered patch pairs from paired images, DC removed.

    Anchor locations are drawn uniformly at random: images are chosen with
    replacement, anchors within an image without replacement until the
    image's anchors are exhausted (then its pool reshuffles).  Column i of
    the two output matrices comes from the same location of image pair i.
    """
    if len(target_imgs) != len(guide_imgs):
        raise DimensionMismatch("target and guide image lists differ in length")
    if not target_imgs:
        raise EmptyCorpus("no image pairs supplied")
    if count < 1:
        raise ValueError("count must be >= 1")
    for tgt, gd in zip(target_imgs, guide_imgs):
        if tgt.width != gd.width or tgt.height != gd.height:
            raise DimensionMismatch(
                f"paired images disagree: {tgt.width}x{tgt.height} vs {gd.width}x{gd.height}"
            )
        if side > tgt.height or side > tgt.width:
            raise PatchTooLarge(f"side {side} exceeds an image dimension")

    rng = np.random.default_rng(seed)
    anchors = []
    for tgt in target_imgs:
        rows = np.arange(tgt.height - side + 1)
        cols = np.arange(tgt.width - side + 1)
        anchors.append(
            np.stack(np.meshgrid(rows, cols, indexing="ij"), axis=-1).reshape(-1, 2)
        )
    pools = [rng.permutation(len(a)) for a in anchors]
    cursors = [0] * len(anchors)

    image_choices = rng.integers(0, len(target_imgs), size=count)
    n = side * side
    target_cols = np.empty((n, count))
    guide_cols = np.empty((n, count))
    for t, img_idx in enumerate(image_choices):
        if cursors[img_idx] >= len(pools[img_idx]):
            pools[img_idx] = rng.permutation(len(anchors[img_idx]))
            cursors[img_idx] = 0
        r, c = anchors[img_idx][pools[img_idx][cursors[img_idx]]]
        cursors[img_idx] += 1
        target_cols[:, t] = target_imgs[img_idx].pixels[r : r + side, c : c + side].ravel()
        guide_cols[:, t] = guide_imgs[img_idx].pixels[r : r + side, c : c + side].ravel()

    target_cols -= target_cols.mean(axis=0)
    guide_cols -= guide_cols.mean(axis=0)
    return TrainingSet(target=target_cols, guide=guide_cols)
