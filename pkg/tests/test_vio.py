"""Y4M parsing, serialization round trips, and clip slicing."""

from fractions import Fraction
from io import BytesIO

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import make_video, y4m_bytes
from vqlab.vio import (
    Frame,
    MalformedHeaderError,
    TruncatedPayloadError,
    UnsupportedFormatError,
    VideoSequence,
    luma_planes,
    read_y4m,
    read_y4m_file,
    slice_clip,
    write_y4m,
)


def frame_payload(width, height, fill=0):
    return bytes([fill]) * (width * height + 2 * (width // 2) * (height // 2))


def test_header_fields_copied_verbatim():
    data = b"YUV4MPEG2 W4 H4 F25:1\n" + b"FRAME\n" + frame_payload(4, 4) + b"FRAME\n" + frame_payload(4, 4)
    video = read_y4m(data)
    assert video.width == 4
    assert video.height == 4
    assert video.frame_rate == Fraction(25, 1)
    assert video.frame_count == 2


def test_rational_frame_rate_and_duration():
    data = b"YUV4MPEG2 W4 H2 F30000:1001 Ip A1:1 C420jpeg\n" + b"FRAME\n" + frame_payload(4, 2)
    video = read_y4m(data)
    assert video.frame_rate == Fraction(30000, 1001)
    assert video.duration_seconds == pytest.approx(1001 / 30000)


def test_round_trip_is_bitwise_identical():
    video = make_video(n_frames=3, width=8, height=8, seed=7)
    again = read_y4m(y4m_bytes(video))
    assert again.width == video.width and again.height == video.height
    assert again.frame_rate == video.frame_rate
    for a, b in zip(again.frames, video.frames):
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.v, b.v)


@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_round_trip_property(n_frames, half_size, seed):
    video = make_video(n_frames=n_frames, width=2 * half_size, height=2 * half_size, seed=seed)
    assert y4m_bytes(read_y4m(y4m_bytes(video))) == y4m_bytes(video)


def test_truncated_payload_is_distinct_error():
    data = b"YUV4MPEG2 W4 H4 F25:1\nFRAME\n" + frame_payload(4, 4)[:-1]
    with pytest.raises(TruncatedPayloadError):
        read_y4m(data)


def test_stream_with_no_frames_rejected():
    with pytest.raises(TruncatedPayloadError):
        read_y4m(b"YUV4MPEG2 W4 H4 F25:1\n")


def test_missing_signature():
    with pytest.raises(MalformedHeaderError):
        read_y4m(b"JUNK W4 H4 F25:1\nFRAME\n" + frame_payload(4, 4))


def test_header_requires_geometry_and_rate():
    with pytest.raises(MalformedHeaderError):
        read_y4m(b"YUV4MPEG2 W4 H4\nFRAME\n" + frame_payload(4, 4))


def test_bad_frame_marker():
    data = b"YUV4MPEG2 W4 H4 F25:1\nBOGUS\n" + frame_payload(4, 4)
    with pytest.raises(MalformedHeaderError):
        read_y4m(data)


@pytest.mark.parametrize("chroma", ["444", "422", "mono", "420p10", "420p12"])
def test_non_420_8bit_rejected(chroma):
    header = f"YUV4MPEG2 W4 H4 F25:1 C{chroma}\n".encode()
    with pytest.raises(UnsupportedFormatError):
        read_y4m(header + b"FRAME\n" + frame_payload(4, 4))


def test_odd_geometry_rejected():
    with pytest.raises(UnsupportedFormatError):
        read_y4m(b"YUV4MPEG2 W5 H4 F25:1\nFRAME\n" + bytes(30))


def test_accepted_chroma_variants_parse():
    for chroma in ("420", "420jpeg", "420mpeg2", "420paldv"):
        header = f"YUV4MPEG2 W4 H4 F25:1 C{chroma}\n".encode()
        video = read_y4m(header + b"FRAME\n" + frame_payload(4, 4))
        assert video.chroma == chroma


def test_read_y4m_file_defaults_content_id_to_stem(tmp_path):
    path = tmp_path / "park_run.y4m"
    path.write_bytes(y4m_bytes(make_video(n_frames=1, width=4, height=4)))
    assert read_y4m_file(path).content_id == "park_run"
    assert read_y4m_file(path, content_id="x").content_id == "x"


def test_sequence_validation_rejects_bad_planes():
    good = make_video(n_frames=1, width=4, height=4)
    with pytest.raises(ValueError):
        VideoSequence(width=4, height=4, frame_rate=Fraction(30), frames=[])
    bad_frame = Frame(
        y=np.zeros((4, 4), dtype=np.uint8),
        u=np.zeros((2, 2), dtype=np.uint8),
        v=np.zeros((3, 2), dtype=np.uint8),
    )
    with pytest.raises(ValueError):
        VideoSequence(width=4, height=4, frame_rate=Fraction(30), frames=[bad_frame])
    float_frame = Frame(
        y=np.zeros((4, 4), dtype=np.float64),
        u=np.zeros((2, 2), dtype=np.uint8),
        v=np.zeros((2, 2), dtype=np.uint8),
    )
    with pytest.raises(ValueError):
        VideoSequence(width=4, height=4, frame_rate=Fraction(30), frames=[float_frame])
    with pytest.raises(UnsupportedFormatError):
        VideoSequence(width=4, height=4, frame_rate=Fraction(30),
                      frames=good.frames, bit_depth=10)


def test_slice_clip_basic_and_out_of_range():
    video = make_video(n_frames=150, width=4, height=4)
    clip = slice_clip(video, 0, 16)
    assert clip.frame_count == 16
    assert clip.content_id == video.content_id
    with pytest.raises(ValueError):
        slice_clip(video, 145, 16)
    with pytest.raises(ValueError):
        slice_clip(video, -1, 4)
    with pytest.raises(ValueError):
        slice_clip(video, 0, 0)


def test_slice_frame_identity():
    video = make_video(n_frames=20, width=4, height=4, seed=3)
    first = slice_clip(video, 0, 16)
    second = slice_clip(video, 15, 1)
    assert first.frames[-1] is second.frames[0]


@given(st.integers(0, 5), st.integers(0, 5), st.integers(1, 6))
def test_slice_composition(outer_start, inner_start, length):
    video = make_video(n_frames=16, width=4, height=4, seed=1)
    outer = slice_clip(video, outer_start, 10)
    if inner_start + length > 10:
        return
    nested = slice_clip(outer, inner_start, length)
    direct = slice_clip(video, outer_start + inner_start, length)
    assert all(a is b for a, b in zip(nested.frames, direct.frames))


def test_luma_planes_iterates_in_order():
    video = make_video(n_frames=3, width=4, height=4, seed=2)
    planes = list(luma_planes(video))
    assert len(planes) == 3
    assert all(np.array_equal(p, f.y) for p, f in zip(planes, video.frames))


def test_write_y4m_emits_frame_markers():
    video = make_video(n_frames=2, width=4, height=4)
    buf = BytesIO()
    write_y4m(video, buf)
    data = buf.getvalue()
    assert data.startswith(b"YUV4MPEG2 W4 H4 F30:1")
    assert data.count(b"FRAME\n") == 2
