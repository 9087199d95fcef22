"""Video-to-cube preprocessing: subsequence splitting, saliency crop, tiling.

The pipeline turns a decoded video into fixed-size network inputs:

1. Cut a 16-frame subsequence every half second (stride = round(fps / 2)).
2. Estimate a saliency map per subsequence from spatial-gradient and
   temporal-difference energy (or load a precomputed sidecar map).
3. Crop to the minimum bounding rectangle of the suprathreshold region.
4. Expand the crop to a multiple of the cube side and tile it into
   non-overlapping side x side x 3 x 16 cubes (Y, U, V channels, chroma
   bilinearly upsampled, samples scaled to [0, 1] float32).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _io
from .vio import VideoSequence, slice_clip

DEFAULT_CUBE_SIDE = 224
CUBE_FRAMES = 16
DEFAULT_SALIENCY_THRESHOLD = 0.5


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel saliency in [0, 1], same geometry as the source luma plane."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if not isinstance(v, np.ndarray) or v.ndim != 2:
            raise ValueError("saliency values must be a 2-D array")
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise ValueError("saliency values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: rows [top, top+height), cols [left, left+width)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.top < 0 or self.left < 0 or self.height < 1 or self.width < 1:
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def right(self) -> int:
        return self.left + self.width


@dataclass
class CubeBatch:
    """Network-ready cubes from one subsequence: each (side, side, 3, frames)."""

    cubes: list[np.ndarray]
    subsequence_index: int
    side: int = DEFAULT_CUBE_SIDE
    frames: int = CUBE_FRAMES

    def __post_init__(self) -> None:
        if not self.cubes:
            raise ValueError("a cube batch holds at least one cube")
        if self.subsequence_index < 0:
            raise ValueError(f"subsequence index must be >= 0, got {self.subsequence_index}")
        expected = (self.side, self.side, 3, self.frames)
        for cube in self.cubes:
            if cube.shape != expected:
                raise ValueError(f"cube shape {cube.shape} != expected {expected}")

    def __len__(self) -> int:
        return len(self.cubes)


def subsequence_starts(n_frames: int, frame_rate: float) -> list[int]:
    """Start offsets of the 16-frame subsequences of an n_frames video.

    One subsequence begins every round(frame_rate / 2) frames. A start whose
    16 frames would overrun the video is clamped to n_frames - 16, so a
    5-second 30 fps video yields floor(150 / 15) = 10 subsequences with the
    last one reusing the final frames. Duplicate starts collapse to one.
    """
    if n_frames < CUBE_FRAMES:
        raise ValueError(f"need at least {CUBE_FRAMES} frames, got {n_frames}")
    stride = max(1, int(round(frame_rate / 2.0)))
    count = max(1, n_frames // stride)
    starts = sorted({min(k * stride, n_frames - CUBE_FRAMES) for k in range(count)})
    return starts


def split_subsequences(video: VideoSequence) -> list[VideoSequence]:
    """Cut the video into 16-frame subsequences, one every half second."""
    starts = subsequence_starts(len(video.frames), float(video.frame_rate))
    return [slice_clip(video, start, CUBE_FRAMES) for start in starts]


def _normalized(energy: np.ndarray) -> np.ndarray:
    peak = float(energy.max()) if energy.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(energy)
    return energy / peak


def detect_saliency(clip: VideoSequence) -> SaliencyMap:
    """Heuristic saliency: blend of spatial-gradient and temporal-difference energy.

    Each component is averaged over the clip and max-normalized before the
    50/50 blend; the blend is max-normalized again. Both components are
    difference-based, so adding a constant to every luma sample leaves the
    map unchanged. A static constant clip maps to all zeros.
    """
    if len(clip.frames) < 2:
        raise ValueError("saliency needs at least 2 frames")
    lumas = [frame.y.astype(np.float64) for frame in clip.frames]

    spatial = np.zeros_like(lumas[0])
    for luma in lumas:
        gy, gx = np.gradient(luma)
        spatial += np.hypot(gx, gy)
    spatial /= len(lumas)

    temporal = np.zeros_like(lumas[0])
    for prev, cur in zip(lumas, lumas[1:]):
        temporal += np.abs(cur - prev)
    temporal /= len(lumas) - 1

    blend = 0.5 * _normalized(spatial) + 0.5 * _normalized(temporal)
    return SaliencyMap(values=_normalized(blend))


def sidecar_path(directory: str | Path, content_id: str, subsequence_index: int) -> Path:
    """Where an externally supplied map for (content, subsequence) lives."""
    return Path(directory) / f"{content_id}_{subsequence_index:04d}.npy"


def load_saliency(path: str | Path) -> SaliencyMap:
    """Load a precomputed saliency map (.npy, 2-D float in [0, 1]), bit-for-bit."""
    values = np.load(path, allow_pickle=False)
    if values.ndim != 2:
        raise ValueError(f"{path}: saliency sidecar must be 2-D, got shape {values.shape}")
    return SaliencyMap(values=values.astype(np.float64, copy=False))


def saliency_for_clip(
    clip: VideoSequence,
    subsequence_index: int,
    sidecar_dir: str | Path | None = None,
) -> SaliencyMap:
    """Sidecar map when one exists for this (content, subsequence), else the heuristic."""
    if sidecar_dir is not None:
        candidate = sidecar_path(sidecar_dir, clip.content_id, subsequence_index)
        if candidate.exists():
            loaded = load_saliency(candidate)
            if (loaded.height, loaded.width) != (clip.height, clip.width):
                raise ValueError(
                    f"{candidate}: sidecar geometry {loaded.values.shape} does not match "
                    f"frame geometry {(clip.height, clip.width)}"
                )
            return loaded
    return detect_saliency(clip)


def min_bounding_rect(saliency: SaliencyMap, threshold: float = DEFAULT_SALIENCY_THRESHOLD) -> Rect:
    """Tightest rectangle containing every pixel >= threshold; full frame if none."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    mask = saliency.values >= threshold
    if not mask.any():
        return Rect(0, 0, saliency.height, saliency.width)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return Rect(
        top=int(rows[0]),
        left=int(cols[0]),
        height=int(rows[-1] - rows[0] + 1),
        width=int(cols[-1] - cols[0] + 1),
    )


def _bilinear_resize(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel center alignment; returns float32."""
    src = plane.astype(np.float32)
    h, w = src.shape
    if (h, w) == (out_h, out_w):
        return src

    def axis_weights(n_src: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_src / n_out) - 0.5
        base = np.floor(pos)
        frac = (pos - base).astype(np.float32)
        i0 = np.clip(base.astype(np.int64), 0, n_src - 1)
        i1 = np.clip(base.astype(np.int64) + 1, 0, n_src - 1)
        return i0, i1, frac

    y0, y1, fy = axis_weights(h, out_h)
    x0, x1, fx = axis_weights(w, out_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def _frame_channels(frame, height: int, width: int) -> np.ndarray:
    """Stack Y and bilinearly upsampled U, V into (height, width, 3) float32."""
    return np.stack(
        [
            frame.y.astype(np.float32),
            _bilinear_resize(frame.u, height, width),
            _bilinear_resize(frame.v, height, width),
        ],
        axis=-1,
    )


def tile_cubes(clip: VideoSequence, rect: Rect, side: int = DEFAULT_CUBE_SIDE,
               subsequence_index: int = 0) -> CubeBatch:
    """Tile the rectangle into non-overlapping side x side cubes over 16 frames.

    The rectangle grows to the next multiple of side (ceil in each axis),
    shifting up/left to stay inside the frame when possible; samples past the
    frame border replicate the nearest edge pixel. Cube count is
    ceil(rect.height / side) * ceil(rect.width / side); cubes are listed in
    row-major tile order. Samples are scaled from [0, 255] to [0, 1].
    """
    if side < 16:
        raise ValueError(f"cube side must be >= 16, got {side}")
    n_frames = len(clip.frames)
    if n_frames != CUBE_FRAMES:
        raise ValueError(f"tile_cubes expects a {CUBE_FRAMES}-frame clip, got {n_frames}")
    height, width = clip.height, clip.width
    if rect.bottom > height or rect.right > width:
        raise ValueError(f"rectangle {rect} exceeds frame geometry {(height, width)}")

    n_rows = -(-rect.height // side)
    n_cols = -(-rect.width // side)
    grown_h = n_rows * side
    grown_w = n_cols * side
    top = min(rect.top, max(0, height - grown_h))
    left = min(rect.left, max(0, width - grown_w))

    # Clipped index vectors implement edge-replicate padding past the border.
    row_idx = np.clip(np.arange(top, top + grown_h), 0, height - 1)
    col_idx = np.clip(np.arange(left, left + grown_w), 0, width - 1)

    region = np.empty((grown_h, grown_w, 3, CUBE_FRAMES), dtype=np.float32)
    for t, frame in enumerate(clip.frames):
        channels = _frame_channels(frame, height, width)
        region[:, :, :, t] = channels[np.ix_(row_idx, col_idx)]
    region /= 255.0

    cubes = [
        np.ascontiguousarray(region[i * side:(i + 1) * side, j * side:(j + 1) * side])
        for i in range(n_rows)
        for j in range(n_cols)
    ]
    return CubeBatch(cubes=cubes, subsequence_index=subsequence_index, side=side)


def prepare_cubes(
    video: VideoSequence,
    side: int = DEFAULT_CUBE_SIDE,
    threshold: float = DEFAULT_SALIENCY_THRESHOLD,
    sidecar_dir: str | Path | None = None,
) -> list[CubeBatch]:
    """Full pipeline: subsequences -> saliency -> crop -> cubes, one batch per subsequence."""
    batches = []
    for index, clip in enumerate(split_subsequences(video)):
        saliency = saliency_for_clip(clip, index, sidecar_dir)
        rect = min_bounding_rect(saliency, threshold)
        batches.append(tile_cubes(clip, rect, side, subsequence_index=index))
    return batches


def write_cube_batch(batch: CubeBatch, directory: str | Path, stem: str = "cubes") -> None:
    """Debug dump: raw little-endian float32 alongside a JSON shape header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stacked = np.stack(batch.cubes).astype("<f4")
    _io.write_json(directory / f"{stem}.json", {
        "count": len(batch.cubes),
        "side": batch.side,
        "frames": batch.frames,
        "subsequence_index": batch.subsequence_index,
        "shape": list(stacked.shape),
        "dtype": "<f4",
        "order": "C",
        "data_file": f"{stem}.f32",
    }, "cube-batch")
    _io.atomic_write_bytes(directory / f"{stem}.f32", stacked.tobytes())


def read_cube_batch(directory: str | Path, stem: str = "cubes") -> CubeBatch:
    directory = Path(directory)
    with open(directory / f"{stem}.json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    raw = (directory / header["data_file"]).read_bytes()
    stacked = np.frombuffer(raw, dtype="<f4").reshape(header["shape"]).copy()
    return CubeBatch(
        cubes=[stacked[i] for i in range(header["count"])],
        subsequence_index=int(header["subsequence_index"]),
        side=int(header["side"]),
        frames=int(header["frames"]),
    )
