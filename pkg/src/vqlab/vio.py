"""Raw video ingest: Y4M parsing/serialization, planar 4:2:0 frame access, clip slicing.

Only 8-bit 4:2:0 material is supported. Anything else in the Y4M header is
rejected with a distinct error rather than silently reinterpreted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO, Iterable

import numpy as np

Y4M_SIGNATURE = b"YUV4MPEG2"
# 8-bit 4:2:0 variants differ only in chroma siting, which we do not model.
_ACCEPTED_CHROMA = {"420", "420jpeg", "420mpeg2", "420paldv"}


class Y4MError(ValueError):
    """Base class for Y4M stream problems."""


class MalformedHeaderError(Y4MError):
    """Signature or parameter line cannot be parsed."""


class UnsupportedFormatError(Y4MError):
    """Stream is valid Y4M but not 8-bit 4:2:0."""


class TruncatedPayloadError(Y4MError):
    """Stream ended mid-frame."""


@dataclass
class Frame:
    """One decoded picture: luma plus two quarter-size chroma planes, uint8."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def validate(self, width: int, height: int) -> None:
        cw, ch = width // 2, height // 2
        if self.y.shape != (height, width):
            raise ValueError(f"luma plane is {self.y.shape}, expected {(height, width)}")
        for name, plane in (("u", self.u), ("v", self.v)):
            if plane.shape != (ch, cw):
                raise ValueError(f"{name} plane is {plane.shape}, expected {(ch, cw)}")
        for plane in (self.y, self.u, self.v):
            if plane.dtype != np.uint8:
                raise ValueError(f"plane dtype {plane.dtype} is not uint8")


@dataclass
class VideoSequence:
    """Decoded planar video with geometry and rate metadata.

    Treated as immutable after construction; safe to share across readers.
    """

    width: int
    height: int
    frame_rate: Fraction
    frames: list[Frame] = field(default_factory=list)
    content_id: str = ""
    bit_depth: int = 8
    chroma: str = "420"

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"non-positive geometry {self.width}x{self.height}")
        if self.width % 2 or self.height % 2:
            raise ValueError(f"4:2:0 requires even geometry, got {self.width}x{self.height}")
        if self.bit_depth != 8:
            raise UnsupportedFormatError(f"bit depth {self.bit_depth} unsupported (8 only)")
        if self.chroma not in _ACCEPTED_CHROMA:
            raise UnsupportedFormatError(f"chroma {self.chroma!r} unsupported (4:2:0 only)")
        if self.frame_rate <= 0:
            raise ValueError(f"non-positive frame rate {self.frame_rate}")
        if not self.frames:
            raise ValueError("sequence must contain at least one frame")
        for frame in self.frames:
            frame.validate(self.width, self.height)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration_seconds(self) -> float:
        return self.frame_count / float(self.frame_rate)


def _parse_header(line: bytes) -> dict:
    if not line.startswith(Y4M_SIGNATURE):
        raise MalformedHeaderError("missing YUV4MPEG2 signature")
    meta = {"width": None, "height": None, "rate": None, "chroma": "420"}
    for token in line[len(Y4M_SIGNATURE):].split():
        tag, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if tag == "W":
            meta["width"] = _parse_int(value, "W")
        elif tag == "H":
            meta["height"] = _parse_int(value, "H")
        elif tag == "F":
            num, _, den = value.partition(":")
            try:
                meta["rate"] = Fraction(int(num), int(den or "1"))
            except (ValueError, ZeroDivisionError) as exc:
                raise MalformedHeaderError(f"bad frame rate {value!r}") from exc
        elif tag == "C":
            meta["chroma"] = value
        # I (interlacing), A (aspect) and X (extensions) are carried but ignored.
    if meta["width"] is None or meta["height"] is None or meta["rate"] is None:
        raise MalformedHeaderError("header must define W, H and F")
    return meta


def _parse_int(value: str, tag: str) -> int:
    try:
        out = int(value)
    except ValueError as exc:
        raise MalformedHeaderError(f"bad {tag} value {value!r}") from exc
    if out <= 0:
        raise MalformedHeaderError(f"non-positive {tag} value {out}")
    return out


def read_y4m(stream: BinaryIO | bytes, content_id: str = "") -> VideoSequence:
    """Decode a Y4M byte stream into a VideoSequence.

    Raises MalformedHeaderError, UnsupportedFormatError or TruncatedPayloadError
    depending on what is wrong with the stream.
    """
    data = stream if isinstance(stream, bytes) else stream.read()
    eol = data.find(b"\n")
    if eol < 0:
        raise MalformedHeaderError("no header line terminator")
    meta = _parse_header(data[:eol])
    chroma = meta["chroma"]
    if chroma.startswith("420p") and chroma[4:].isdigit():
        # C420p10 / C420p12: 4:2:0 but not 8-bit
        raise UnsupportedFormatError(f"chroma {chroma!r} is not 8-bit")
    if chroma not in _ACCEPTED_CHROMA:
        raise UnsupportedFormatError(f"chroma {chroma!r} unsupported (4:2:0 only)")
    width, height = meta["width"], meta["height"]
    if width % 2 or height % 2:
        raise UnsupportedFormatError(f"odd geometry {width}x{height} not representable in 4:2:0")

    ysize = width * height
    csize = (width // 2) * (height // 2)
    frame_bytes = ysize + 2 * csize
    frames: list[Frame] = []
    pos = eol + 1
    while pos < len(data):
        marker_end = data.find(b"\n", pos)
        if marker_end < 0 or not data[pos:marker_end].startswith(b"FRAME"):
            raise MalformedHeaderError(f"expected FRAME marker at byte {pos}")
        body = data[marker_end + 1 : marker_end + 1 + frame_bytes]
        if len(body) < frame_bytes:
            raise TruncatedPayloadError(
                f"frame {len(frames)}: got {len(body)} of {frame_bytes} payload bytes"
            )
        raw = np.frombuffer(body, dtype=np.uint8)
        frames.append(
            Frame(
                y=raw[:ysize].reshape(height, width).copy(),
                u=raw[ysize : ysize + csize].reshape(height // 2, width // 2).copy(),
                v=raw[ysize + csize :].reshape(height // 2, width // 2).copy(),
            )
        )
        pos = marker_end + 1 + frame_bytes
    if not frames:
        raise TruncatedPayloadError("stream contains no frames")
    return VideoSequence(
        width=width,
        height=height,
        frame_rate=meta["rate"],
        frames=frames,
        content_id=content_id,
        chroma=chroma,
    )


def write_y4m(video: VideoSequence, stream: BinaryIO) -> None:
    """Serialize a sequence back to Y4M, bit-exact with respect to pixel payloads."""
    rate = video.frame_rate
    header = f"YUV4MPEG2 W{video.width} H{video.height} F{rate.numerator}:{rate.denominator} Ip A0:0 C{video.chroma}\n"
    stream.write(header.encode("ascii"))
    for frame in video.frames:
        stream.write(b"FRAME\n")
        stream.write(frame.y.tobytes())
        stream.write(frame.u.tobytes())
        stream.write(frame.v.tobytes())


def read_y4m_file(path, content_id: str | None = None) -> VideoSequence:
    import os

    if content_id is None:
        content_id = os.path.splitext(os.path.basename(str(path)))[0]
    with open(path, "rb") as fh:
        return read_y4m(fh, content_id=content_id)


def slice_clip(video: VideoSequence, start: int, length: int) -> VideoSequence:
    """Return `length` consecutive frames beginning at `start`, metadata preserved.

    Frames are shared, not copied; sequences are read-only by convention.
    """
    if start < 0 or length < 1:
        raise ValueError(f"invalid slice start={start} length={length}")
    if start + length > video.frame_count:
        raise ValueError(
            f"slice [{start}, {start + length}) out of range for {video.frame_count} frames"
        )
    return VideoSequence(
        width=video.width,
        height=video.height,
        frame_rate=video.frame_rate,
        frames=video.frames[start : start + length],
        content_id=video.content_id,
        chroma=video.chroma,
    )


def luma_planes(video: VideoSequence) -> Iterable[np.ndarray]:
    for frame in video.frames:
        yield frame.y
