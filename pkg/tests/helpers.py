"""Shared test utilities: synthetic videos, Y4M byte builders, numeric gradients."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from vqlab.vio import Frame, VideoSequence


def random_frame(rng: np.random.Generator, width: int, height: int) -> Frame:
    return Frame(
        y=rng.integers(0, 256, (height, width), dtype=np.uint8),
        u=rng.integers(0, 256, (height // 2, width // 2), dtype=np.uint8),
        v=rng.integers(0, 256, (height // 2, width // 2), dtype=np.uint8),
    )


def make_video(n_frames=3, width=16, height=16, seed=0, fps=30, content_id="clip"):
    """Random 8-bit 4:2:0 sequence, deterministic in seed."""
    rng = np.random.default_rng(seed)
    return VideoSequence(
        width=width,
        height=height,
        frame_rate=Fraction(fps),
        frames=[random_frame(rng, width, height) for _ in range(n_frames)],
        content_id=content_id,
    )


def video_from_lumas(lumas, fps=30, content_id="clip"):
    """Build a sequence from given uint8 luma planes; chroma is flat 128."""
    lumas = [np.asarray(p, dtype=np.uint8) for p in lumas]
    height, width = lumas[0].shape
    mid = np.full((height // 2, width // 2), 128, dtype=np.uint8)
    return VideoSequence(
        width=width,
        height=height,
        frame_rate=Fraction(fps),
        frames=[Frame(y=p, u=mid.copy(), v=mid.copy()) for p in lumas],
        content_id=content_id,
    )


def y4m_bytes(video: VideoSequence) -> bytes:
    from io import BytesIO

    from vqlab.vio import write_y4m

    buf = BytesIO()
    write_y4m(video, buf)
    return buf.getvalue()


def numeric_grad(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar fn at x, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        h = eps * max(1.0, abs(keep))
        flat[i] = keep + h
        above = fn(x)
        flat[i] = keep - h
        below = fn(x)
        flat[i] = keep
        gflat[i] = (above - below) / (2.0 * h)
    return grad


def relative_error(got: np.ndarray, want: np.ndarray) -> float:
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    scale = max(float(np.abs(got).max(initial=0.0)), float(np.abs(want).max(initial=0.0)), 1e-12)
    return float(np.abs(got - want).max(initial=0.0)) / scale


def gradcheck(build, x0, tol=1e-6, seed=0):
    """Backward pass vs central differences through an arbitrary expression.

    `build` maps a leaf Tensor to an output Tensor. The output is reduced
    with a fixed random probe so gradients landing in the wrong positions
    cannot cancel out.
    """
    from vqlab.stnet.tensor import Tensor

    x0 = np.asarray(x0, dtype=np.float64)
    probe_rng = np.random.default_rng(seed)
    probe = {}

    def scalar(arr):
        out = build(Tensor(arr, requires_grad=True))
        if "p" not in probe:
            probe["p"] = probe_rng.standard_normal(out.data.shape)
        return float((out.data * probe["p"]).sum())

    scalar(x0)
    leaf = Tensor(x0, requires_grad=True)
    out = build(leaf)
    (out * Tensor(probe["p"])).sum().backward()
    numeric = numeric_grad(scalar, x0.copy())
    err = relative_error(leaf.grad, numeric)
    assert err < tol, f"gradient mismatch: relative error {err}"
