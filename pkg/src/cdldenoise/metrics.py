"""Image quality metrics on the normalized [0, 1] scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyList
from .imagio import GrayImage


@dataclass(frozen=True)
class QualityReport:
    """RMSE on the normalized scale and PSNR in decibels (peak 1.0)."""

    rmse: float
    psnr_db: float


def _check_dims(a: GrayImage, b: GrayImage) -> None:
    if a.width != b.width or a.height != b.height:
        raise DimensionMismatch(
            f"images disagree: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def rmse(a: GrayImage, b: GrayImage) -> float:
    """Root-mean-square pixel difference."""
    _check_dims(a, b)
    diff = a.pixels - b.pixels
    return float(np.sqrt(np.mean(diff * diff)))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio with peak 1.0; +inf for identical images."""
    value = rmse(a, b)
    if value == 0.0:
        return math.inf
    return 20.0 * math.log10(1.0 / value)


def average_report(pairs: list[tuple[GrayImage, GrayImage]]) -> QualityReport:
    """Mean RMSE and mean PSNR over image pairs, each averaged independently."""
    if not pairs:
        raise EmptyList("at least one image pair is required")
    rmses = [rmse(ref, test) for ref, test in pairs]
    psnrs = [psnr(ref, test) for ref, test in pairs]
    return QualityReport(
        rmse=float(np.mean(rmses)), psnr_db=float(np.mean(psnrs))
    )
