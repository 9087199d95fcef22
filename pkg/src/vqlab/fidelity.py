"""Full-reference baselines: PSNR, SSIM and MS-SSIM on luma, per frame and per video.

Constants follow the original SSIM/MS-SSIM publications: 11x11 Gaussian window
with sigma 1.5, K1=0.01, K2=0.03, five dyadic scales with the standard weights.
Chroma is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .vio import VideoSequence

PSNR_CAP_DB = 100.0

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


class GeometryMismatchError(ValueError):
    """Reference and distorted inputs disagree in size or frame count."""


class PlaneTooSmallError(ValueError):
    """Input smaller than the metric's minimum working size."""


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    peak: float = 255.0


@dataclass
class FidelityScore:
    metric: str
    per_frame: list[float]
    video_score: float = field(init=False)

    def __post_init__(self) -> None:
        self.video_score = float(np.mean(self.per_frame))


def _check_geometry(ref: np.ndarray, dist: np.ndarray) -> None:
    if ref.shape != dist.shape:
        raise GeometryMismatchError(f"plane shapes differ: {ref.shape} vs {dist.shape}")


def psnr(ref: np.ndarray, dist: np.ndarray, peak: float = 255.0, cap: float = PSNR_CAP_DB) -> float:
    """10*log10(peak^2 / MSE) in dB; returns `cap` when the planes are identical."""
    _check_geometry(ref, dist)
    diff = ref.astype(np.float64) - dist.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(peak * peak / mse))


def _gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) / 2.0
    x = np.arange(window, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable Gaussian, 'valid' boundary handling as in the reference SSIM code
    rows = np.einsum("ijk,k->ij", sliding_window_view(plane, len(kernel), axis=0), kernel)
    return np.einsum("ijk,k->ij", sliding_window_view(rows, len(kernel), axis=1), kernel)


def _ssim_components(
    ref: np.ndarray, dist: np.ndarray, params: SsimParams
) -> tuple[np.ndarray, np.ndarray]:
    """Return (luminance map, contrast-structure map) over the valid region."""
    x = ref.astype(np.float64)
    y = dist.astype(np.float64)
    kernel = _gaussian_kernel(params.window, params.sigma)
    c1 = (params.k1 * params.peak) ** 2
    c2 = (params.k2 * params.peak) ** 2

    mu_x = _filter_valid(x, kernel)
    mu_y = _filter_valid(y, kernel)
    sigma_x = _filter_valid(x * x, kernel) - mu_x * mu_x
    sigma_y = _filter_valid(y * y, kernel) - mu_y * mu_y
    sigma_xy = _filter_valid(x * y, kernel) - mu_x * mu_y

    lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2.0 * sigma_xy + c2) / (sigma_x + sigma_y + c2)
    return lum, cs


def ssim(ref: np.ndarray, dist: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean local SSIM with a Gaussian window; symmetric in its arguments."""
    _check_geometry(ref, dist)
    if min(ref.shape) < params.window:
        raise PlaneTooSmallError(f"plane {ref.shape} smaller than {params.window}x{params.window} window")
    lum, cs = _ssim_components(ref, dist, params)
    return float(np.mean(lum * cs))


def _downsample2(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape[0] // 2, plane.shape[1] // 2
    return plane[: 2 * h, : 2 * w].reshape(h, 2, w, 2).mean(axis=(1, 3))


def ms_ssim(
    ref: np.ndarray,
    dist: np.ndarray,
    params: SsimParams = SsimParams(),
    weights: tuple[float, ...] = MS_SSIM_WEIGHTS,
) -> float:
    """Multi-scale SSIM over five dyadic scales with the standard exponents.

    Requires min(h, w) >= window * 2^(scales-1), i.e. 176 for the defaults.
    Per-scale means are clamped at zero so fractional exponents stay real.
    """
    _check_geometry(ref, dist)
    scales = len(weights)
    needed = params.window * 2 ** (scales - 1)
    if min(ref.shape) < needed:
        raise PlaneTooSmallError(
            f"plane {ref.shape} too small for {scales} scales (needs min dimension {needed})"
        )
    x = ref.astype(np.float64)
    y = dist.astype(np.float64)
    score = 1.0
    for level, weight in enumerate(weights):
        lum, cs = _ssim_components(x, y, params)
        if level == scales - 1:
            term = float(np.mean(lum * cs))
        else:
            term = float(np.mean(cs))
            x, y = _downsample2(x), _downsample2(y)
        score *= max(term, 0.0) ** weight
    return score


_METRICS = {
    "psnr": lambda r, d: psnr(r, d),
    "ssim": lambda r, d: ssim(r, d),
    "msssim": lambda r, d: ms_ssim(r, d),
}

METRIC_NAMES = tuple(_METRICS)


def video_fidelity(ref: VideoSequence, dist: VideoSequence, metric: str) -> FidelityScore:
    """Per-frame metric values plus their unweighted mean as the video score."""
    key = metric.lower().replace("-", "").replace("_", "")
    if key not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRIC_NAMES}")
    if (ref.width, ref.height) != (dist.width, dist.height):
        raise GeometryMismatchError(
            f"geometry {ref.width}x{ref.height} vs {dist.width}x{dist.height}"
        )
    if ref.frame_count != dist.frame_count:
        raise GeometryMismatchError(
            f"frame counts differ: {ref.frame_count} vs {dist.frame_count}"
        )
    fn = _METRICS[key]
    per_frame = [fn(rf.y, df.y) for rf, df in zip(ref.frames, dist.frames)]
    return FidelityScore(metric=key, per_frame=per_frame)
