"""Two-stage guided denoising: joint sparse coding, then patch aggregation.

The basic path codes every patch pair independently; the group path
clusters patch pairs first and codes each cluster under one shared
support.  Both paths remove the per-patch DC before coding, restore the
target-side DC on the estimates, and reconstruct the image with the
closed-form overlap average (optionally blended with the noisy input).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import isqrt

import numpy as np

from .cluster import cluster_patches
from .dictlearn import DictionarySet
from .exceptions import DimensionMismatch, GridMismatch
from .imagio import GrayImage
from .patches import PatchGrid, extract_grid, remove_dc
from .sparse import CodingConfig, JointCode, StackedDictionary, group_somp, joint_omp

_PIXEL_MAX = 255.0


@dataclass(frozen=True)
class DenoiseConfig:
    """Denoise-time parameters; sigma is the noise std in 8-bit units."""

    sigma: float
    gain: float = 1.15
    max_support: int = 16
    blend: float = 0.0
    stride: int = 1
    group: bool = False
    clusters: int | None = None
    sample_cap: int = 2000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0 for denoising runs")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.blend < 0:
            raise ValueError("blend must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class PatchEstimates:
    """Per-patch denoised estimates (target DC restored), one column per patch."""

    grid: PatchGrid
    estimates: np.ndarray  # (n, P)

    def __post_init__(self):
        est = np.array(self.estimates, dtype=np.float64, order="C")
        if est.ndim != 2 or est.shape != (
            self.grid.side * self.grid.side,
            self.grid.patch_count,
        ):
            raise GridMismatch("estimate matrix disagrees with the patch grid")
        est.setflags(write=False)
        object.__setattr__(self, "estimates", est)


def reconstruct(pe: PatchEstimates, noisy: GrayImage, blend: float) -> GrayImage:
    """Closed-form reconstruction from overlapping patch estimates.

    Every pixel is (blend * noisy + sum of covering estimates) divided by
    (blend + coverage count); with blend 0 this is the plain average of
    the estimates over the overlaps.
    """
    grid = pe.grid
    if grid.image_width != noisy.width or grid.image_height != noisy.height:
        raise GridMismatch(
            f"grid is {grid.image_width}x{grid.image_height}, image is "
            f"{noisy.width}x{noisy.height}"
        )
    total = noisy.width * noisy.height
    flat = grid.flat_indices().ravel()
    summed = np.bincount(flat, weights=pe.estimates.T.ravel(), minlength=total)
    coverage = np.bincount(flat, minlength=total)
    if blend == 0 and coverage.min() == 0:
        # stride > side can leave interior pixels uncovered; the pure
        # average is undefined there
        raise GridMismatch(
            "patch grid leaves pixels uncovered and blend is 0; reduce the stride"
        )
    merged = (blend * noisy.pixels.ravel() + summed) / (blend + coverage)
    return GrayImage(merged.reshape(noisy.height, noisy.width))


def _target_estimate(ds: DictionarySet, code: JointCode) -> np.ndarray:
    """Target-side patch estimate from a joint code (DC not included)."""
    out = np.zeros(ds.n)
    if code.common:
        idx = [i for i, _ in code.common]
        val = np.array([v for _, v in code.common])
        out += ds.target_common[:, idx] @ val
    if code.target_unique:
        idx = [i for i, _ in code.target_unique]
        val = np.array([v for _, v in code.target_unique])
        out += ds.target_unique[:, idx] @ val
    return out


def _prepare_patches(noisy, guide, ds, cfg):
    if noisy.width != guide.width or noisy.height != guide.height:
        raise DimensionMismatch(
            f"noisy is {noisy.width}x{noisy.height}, guide is "
            f"{guide.width}x{guide.height}"
        )
    side = isqrt(ds.n)
    if side * side != ds.n:
        raise ValueError(f"dictionary patch dimension {ds.n} is not a square")
    grid, raw_x = extract_grid(noisy, side, cfg.stride)
    _, raw_y = extract_grid(guide, side, cfg.stride)
    coding = CodingConfig(
        sigma_norm=cfg.sigma / _PIXEL_MAX,
        patch_dim=ds.n,
        gain=cfg.gain,
        max_support=cfg.max_support,
    )
    return grid, remove_dc(raw_x), remove_dc(raw_y), coding


def denoise_basic(
    noisy: GrayImage, guide: GrayImage, ds: DictionarySet, cfg: DenoiseConfig
) -> GrayImage:
    """Denoise with one independent joint pursuit per patch pair."""
    grid, pm_x, pm_y, coding = _prepare_patches(noisy, guide, ds, cfg)
    stacked = StackedDictionary.from_set(ds)
    estimates = np.empty_like(pm_x.data)

    def _code_slice(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            code = joint_omp(pm_x.data[:, i], pm_y.data[:, i], stacked, coding)
            estimates[:, i] = _target_estimate(ds, code) + pm_x.dc[i]

    count = pm_x.patch_count
    if cfg.threads == 1 or count < 2 * cfg.threads:
        _code_slice(0, count)
    else:
        bounds = np.linspace(0, count, cfg.threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [
                pool.submit(_code_slice, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for fut in futures:
                fut.result()
    return reconstruct(PatchEstimates(grid, estimates), noisy, cfg.blend)


def denoise_group(
    noisy: GrayImage, guide: GrayImage, ds: DictionarySet, cfg: DenoiseConfig
) -> GrayImage:
    """Denoise with cluster-shared supports (simultaneous pursuit per cluster)."""
    grid, pm_x, pm_y, coding = _prepare_patches(noisy, guide, ds, cfg)
    stacked = StackedDictionary.from_set(ds)
    count = pm_x.patch_count
    clusters = cfg.clusters if cfg.clusters is not None else default_cluster_count(count)
    assignment = cluster_patches(
        pm_x.data, pm_y.data, clusters, sample_cap=cfg.sample_cap, seed=cfg.seed
    )
    estimates = np.empty_like(pm_x.data)

    def _code_cluster(cid: int) -> None:
        members = np.where(assignment.labels == cid)[0]
        group = group_somp(
            pm_x.data[:, members], pm_y.data[:, members], stacked, coding
        )
        for local, i in enumerate(members):
            estimates[:, i] = _target_estimate(ds, group.codes[local]) + pm_x.dc[i]

    if cfg.threads == 1:
        for cid in range(assignment.cluster_count):
            _code_cluster(cid)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [
                pool.submit(_code_cluster, cid)
                for cid in range(assignment.cluster_count)
            ]
            for fut in futures:
                fut.result()
    return reconstruct(PatchEstimates(grid, estimates), noisy, cfg.blend)


def default_cluster_count(patch_count: int) -> int:
    """Patch count / 16 clamped to [16, 512], never above the patch count.

    An average cluster of ~16 members keeps shared supports expressive
    enough that group coding does not fall behind independent coding.
    """
    return min(patch_count, max(16, min(512, patch_count // 16)))


def error_map(truth: GrayImage, estimate: GrayImage) -> GrayImage:
    """Absolute difference rescaled so the maximum maps to 1 (zero map stays zero)."""
    if truth.width != estimate.width or truth.height != estimate.height:
        raise DimensionMismatch(
            f"truth is {truth.width}x{truth.height}, estimate is "
            f"{estimate.width}x{estimate.height}"
        )
    diff = np.abs(truth.pixels - estimate.pixels)
    peak = diff.max()
    if peak > 0:
        diff = diff / peak
    return GrayImage(diff)
