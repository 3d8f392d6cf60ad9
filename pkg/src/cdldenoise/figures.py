"""Matplotlib renderings for the report path: atom mosaics, error heatmaps,
metric charts.  Everything draws straight to files (Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dictlearn import DictionarySet
from .imagio import GrayImage

_GAP = 1


def _atom_mosaic(matrix: np.ndarray, max_atoms: int = 256) -> np.ndarray:
    """Tile atoms (columns) into one image, each min-max normalized."""
    n, k = matrix.shape
    side = math.isqrt(n)
    count = min(k, max_atoms)
    grid = math.ceil(math.sqrt(count))
    canvas = np.full(
        (grid * (side + _GAP) - _GAP, grid * (side + _GAP) - _GAP), 1.0
    )
    for idx in range(count):
        atom = matrix[:, idx].reshape(side, side)
        span = atom.max() - atom.min()
        tile = (atom - atom.min()) / span if span > 0 else np.full_like(atom, 0.5)
        r = (idx // grid) * (side + _GAP)
        c = (idx % grid) * (side + _GAP)
        canvas[r : r + side, c : c + side] = tile
    return canvas


def save_dictionary_mosaic(ds: DictionarySet, path, max_atoms: int = 256) -> None:
    """Four-panel figure: common and unique atoms for both modalities."""
    panels = [
        (ds.target_common, "target common"),
        (ds.target_unique, "target unique"),
        (ds.guide_common, "guide common"),
        (ds.guide_unique, "guide unique"),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(9, 9))
    for ax, (matrix, title) in zip(axes.ravel(), panels):
        ax.imshow(_atom_mosaic(matrix, max_atoms), cmap="gray", interpolation="nearest")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_heatmap(truth: GrayImage, estimate: GrayImage, path) -> None:
    """Absolute-difference heatmap with a colorbar."""
    diff = np.abs(truth.pixels - estimate.pixels)
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(diff, cmap="inferno", interpolation="nearest")
    ax.set_title("absolute error")
    ax.axis("off")
    fig.colorbar(image, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metric_chart(
    names: list[str], rmses: list[float], psnrs: list[float], path
) -> None:
    """Two-panel PSNR/RMSE chart across the evaluated images."""
    positions = np.arange(len(names))
    fig, (ax_psnr, ax_rmse) = plt.subplots(1, 2, figsize=(10, 4))
    ax_psnr.plot(positions, psnrs, marker="o")
    ax_psnr.set_ylabel("PSNR (dB)")
    ax_rmse.plot(positions, rmses, marker="o", color="tab:red")
    ax_rmse.set_ylabel("RMSE")
    for ax in (ax_psnr, ax_rmse):
        ax.set_xticks(positions)
        ax.set_xticklabels(names, rotation=45, ha="right")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
