"""ITU-T P.910 content descriptors: spatial information (SI) and temporal information (TI)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vio import VideoSequence

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class ContentDescriptor:
    content_id: str
    si: float
    ti: float


def _sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    """Gradient magnitude on interior pixels only (1-pixel border skipped)."""
    x = plane.astype(np.float64)
    gx = np.zeros((x.shape[0] - 2, x.shape[1] - 2))
    gy = np.zeros_like(gx)
    for dr in range(3):
        for dc in range(3):
            shifted = x[dr : dr + gx.shape[0], dc : dc + gx.shape[1]]
            gx += _SOBEL_X[dr, dc] * shifted
            gy += _SOBEL_Y[dr, dc] * shifted
    return np.sqrt(gx * gx + gy * gy)


def spatial_information(video: VideoSequence) -> float:
    """Max over frames of the population stddev of the Sobel magnitude plane."""
    if video.height < 3 or video.width < 3:
        raise ValueError(f"SI needs frames of at least 3x3, got {video.width}x{video.height}")
    return max(float(np.std(_sobel_magnitude(f.y))) for f in video.frames)


def temporal_information(video: VideoSequence) -> float:
    """Max over consecutive frame pairs of the population stddev of the luma difference."""
    if video.frame_count < 2:
        raise ValueError("TI needs at least 2 frames")
    best = 0.0
    prev = video.frames[0].y.astype(np.float64)
    for frame in video.frames[1:]:
        cur = frame.y.astype(np.float64)
        best = max(best, float(np.std(cur - prev)))
        prev = cur
    return best


def describe(video: VideoSequence) -> ContentDescriptor:
    ti = temporal_information(video) if video.frame_count >= 2 else 0.0
    return ContentDescriptor(content_id=video.content_id, si=spatial_information(video), ti=ti)
