"""SI/TI descriptors against double-loop Sobel and difference-plane oracles."""

import numpy as np
import pytest

from helpers import make_video, video_from_lumas
from vqlab.content import describe, spatial_information, temporal_information

SOBEL_X = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
SOBEL_Y = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]


def si_oracle(plane):
    """Population stddev of interior Sobel magnitudes, pixel by pixel."""
    x = plane.astype(np.float64)
    h, w = x.shape
    mags = []
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            gx = sum(
                SOBEL_X[dr][dc] * x[r - 1 + dr, c - 1 + dc]
                for dr in range(3)
                for dc in range(3)
            )
            gy = sum(
                SOBEL_Y[dr][dc] * x[r - 1 + dr, c - 1 + dc]
                for dr in range(3)
                for dc in range(3)
            )
            mags.append((gx * gx + gy * gy) ** 0.5)
    return float(np.std(mags))


def test_constant_video_has_zero_si():
    video = video_from_lumas([np.full((8, 8), 77, dtype=np.uint8)] * 2)
    assert spatial_information(video) == 0.0


def test_si_horizontal_ramp_matches_oracle():
    ramp = np.tile(np.arange(8, dtype=np.uint8), (8, 1))
    video = video_from_lumas([ramp])
    assert spatial_information(video) == pytest.approx(si_oracle(ramp), rel=1e-12)


def test_si_random_frames_match_oracle():
    video = make_video(n_frames=3, width=12, height=10, seed=21)
    expected = max(si_oracle(f.y) for f in video.frames)
    assert spatial_information(video) == pytest.approx(expected, rel=1e-12)


def test_si_takes_max_over_frames():
    flat = np.full((8, 8), 10, dtype=np.uint8)
    busy = np.random.default_rng(22).integers(0, 256, (8, 8), dtype=np.uint8)
    video = video_from_lumas([flat, busy])
    assert spatial_information(video) == pytest.approx(si_oracle(busy), rel=1e-12)


def test_si_rejects_tiny_frames():
    video = video_from_lumas([np.zeros((2, 2), dtype=np.uint8)])
    with pytest.raises(ValueError):
        spatial_information(video)


def test_ti_static_video_is_zero():
    frame = np.random.default_rng(23).integers(0, 256, (8, 8), dtype=np.uint8)
    assert temporal_information(video_from_lumas([frame, frame.copy()])) == 0.0


def test_ti_constant_offset_is_zero():
    base = np.random.default_rng(24).integers(0, 250, (8, 8), dtype=np.uint8)
    assert temporal_information(video_from_lumas([base, (base + 5).astype(np.uint8)])) == 0.0


def test_ti_alternating_full_frames_is_zero():
    black = np.zeros((4, 4), dtype=np.uint8)
    white = np.full((4, 4), 255, dtype=np.uint8)
    # each difference plane is a constant +-255, so its stddev is zero
    assert temporal_information(video_from_lumas([black, white, black])) == 0.0


def test_ti_half_plane_flip_matches_oracle():
    black = np.zeros((4, 4), dtype=np.uint8)
    half = black.copy()
    half[:2, :] = 255
    diff = half.astype(np.float64) - black.astype(np.float64)
    expected = float(np.std(diff))
    assert temporal_information(video_from_lumas([black, half])) == pytest.approx(expected, rel=1e-12)


def test_ti_takes_max_over_pairs():
    rng = np.random.default_rng(25)
    lumas = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(4)]
    video = video_from_lumas(lumas)
    expected = max(
        float(np.std(b.astype(np.float64) - a.astype(np.float64)))
        for a, b in zip(lumas, lumas[1:])
    )
    assert temporal_information(video) == pytest.approx(expected, rel=1e-12)


def test_ti_needs_two_frames():
    with pytest.raises(ValueError):
        temporal_information(make_video(n_frames=1, width=8, height=8))


def test_appending_duplicate_frame_changes_nothing():
    video = make_video(n_frames=3, width=8, height=8, seed=26)
    extended = video_from_lumas([f.y for f in video.frames] + [video.frames[-1].y])
    assert spatial_information(extended) == spatial_information(video)
    assert temporal_information(extended) == temporal_information(video)


def test_describe_bundles_id_and_values():
    video = make_video(n_frames=2, width=8, height=8, seed=27, content_id="desc")
    d = describe(video)
    assert d.content_id == "desc"
    assert d.si == spatial_information(video)
    assert d.ti == temporal_information(video)
    assert d.si >= 0.0 and d.ti >= 0.0


def test_describe_single_frame_has_zero_ti():
    video = make_video(n_frames=1, width=8, height=8, seed=28)
    assert describe(video).ti == 0.0
