"""Reverse-mode automatic differentiation on numpy arrays.

A Tensor wraps a float64 ndarray plus an optional gradient. Operations
record a backward closure only while gradient tracking is enabled and at
least one operand participates in a graph; inference under no_grad() runs
at plain numpy cost. backward() walks the recorded graph once in reverse
topological order and accumulates exact gradients.

Non-smooth points use fixed subgradients: relu'(0) = 0, d|x|/dx at 0 = 0,
and maxpool routes the gradient to the first maximal element.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def _participates(t: "Tensor") -> bool:
    return t.requires_grad or t._backward is not None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _accum(t: "Tensor", grad: np.ndarray) -> None:
    t.grad = grad if t.grad is None else t.grad + grad


def _accum_unb(t: "Tensor", grad: np.ndarray) -> None:
    _accum(t, _unbroadcast(grad, t.data.shape))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_error(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(_participates(p) for p in parents):
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Accumulate gradients of self w.r.t. every participating ancestor."""
        if self._backward is None and not self.requires_grad:
            raise RuntimeError("backward called on a tensor with no recorded forward graph")
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward on a non-scalar tensor needs an explicit seed")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=np.float64).reshape(self.data.shape)

        order: list[Tensor] = []
        visited = {id(self)}
        stack: list[tuple[Tensor, Iterable[Tensor]]] = [(self, iter(self._parents))]
        while stack:
            node, parents = stack[-1]
            pushed = False
            for parent in parents:
                if id(parent) not in visited:
                    visited.add(id(parent))
                    stack.append((parent, iter(parent._parents)))
                    pushed = True
                    break
            if not pushed:
                order.append(node)
                stack.pop()

        _accum(self, seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        a, b = self, as_tensor(other)
        def bw(g):
            _accum_unb(a, g)
            _accum_unb(b, g)
        return Tensor._make(a.data + b.data, (a, b), bw)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, as_tensor(other)
        def bw(g):
            _accum_unb(a, g)
            _accum_unb(b, -g)
        return Tensor._make(a.data - b.data, (a, b), bw)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        a, b = self, as_tensor(other)
        def bw(g):
            _accum_unb(a, g * b.data)
            _accum_unb(b, g * a.data)
        return Tensor._make(a.data * b.data, (a, b), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, as_tensor(other)
        def bw(g):
            _accum_unb(a, g / b.data)
            _accum_unb(b, -g * a.data / (b.data * b.data))
        return Tensor._make(a.data / b.data, (a, b), bw)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        a = self
        def bw(g):
            _accum(a, -g)
        return Tensor._make(-a.data, (a,), bw)

    def __pow__(self, exponent: float):
        a = self
        p = float(exponent)
        def bw(g):
            _accum(a, g * p * a.data ** (p - 1.0))
        return Tensor._make(a.data ** p, (a,), bw)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    # -- elementwise nonlinearities -------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)
        def bw(g):
            _accum(a, g * out_data)
        return Tensor._make(out_data, (a,), bw)

    def log(self):
        a = self
        def bw(g):
            _accum(a, g / a.data)
        return Tensor._make(np.log(a.data), (a,), bw)

    def sigmoid(self):
        a = self
        x = a.data
        out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                            np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        def bw(g):
            _accum(a, g * out_data * (1.0 - out_data))
        return Tensor._make(out_data, (a,), bw)

    def relu(self):
        a = self
        mask = a.data > 0
        def bw(g):
            _accum(a, g * mask)
        return Tensor._make(a.data * mask, (a,), bw)

    def abs(self):
        a = self
        sign = np.sign(a.data)
        def bw(g):
            _accum(a, g * sign)
        return Tensor._make(np.abs(a.data), (a,), bw)

    # -- reductions and reshaping ----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        def bw(g):
            grad = g
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            _accum(a, np.broadcast_to(grad, a.data.shape).copy())
        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for ax in axes:
                count *= self.data.shape[ax]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        original = a.data.shape
        def bw(g):
            _accum(a, g.reshape(original))
        return Tensor._make(a.data.reshape(shape), (a,), bw)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        a = self
        inverse = np.argsort(axes)
        def bw(g):
            _accum(a, g.transpose(inverse))
        return Tensor._make(a.data.transpose(axes), (a,), bw)


def _scalar_error(t: Tensor):
    raise ValueError(f"item() needs a single-element tensor, got shape {t.data.shape}")


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have at least 2 dimensions")
    def bw(g):
        _accum_unb(a, g @ np.swapaxes(b.data, -1, -2))
        _accum_unb(b, np.swapaxes(a.data, -1, -2) @ g)
    return Tensor._make(a.data @ b.data, (a, b), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty sequence")
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    def bw(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            _accum(t, piece)
    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("stack of an empty sequence")
    def bw(g):
        for i, t in enumerate(tensors):
            _accum(t, np.take(g, i, axis=axis))
    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    def bw(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        _accum(x, y * (g - inner))
    return Tensor._make(y, (x,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    def bw(g):
        reduce_axes = tuple(range(g.ndim - 1))
        _accum_unb(gamma, (g * xhat).sum(axis=reduce_axes) if reduce_axes else g * xhat)
        _accum_unb(beta, g.sum(axis=reduce_axes) if reduce_axes else g)
        dxhat = g * gamma.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _accum(x, dx)
    return Tensor._make(xhat * gamma.data + beta.data, (x, gamma, beta), bw)


def _triple(value) -> tuple[int, int, int]:
    if isinstance(value, (tuple, list)):
        if len(value) != 3:
            raise ValueError(f"expected 3 values, got {value}")
        return tuple(int(v) for v in value)
    return (int(value),) * 3


def conv3d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride=1, padding=0) -> Tensor:
    """3-D cross-correlation.

    x: (C_in, D, H, W) or batched (B, C_in, D, H, W);
    weight: (C_out, C_in, kd, kh, kw); bias: (C_out,) or None.
    Output spatial dims follow floor((n + 2p - k) / s) + 1.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    single = x.data.ndim == 4
    if x.data.ndim not in (4, 5):
        raise ValueError(f"conv3d input must be 4-D or 5-D, got {x.data.ndim}-D")
    xd = x.data[None] if single else x.data
    if weight.data.ndim != 5:
        raise ValueError(f"conv3d weight must be 5-D, got {weight.data.ndim}-D")
    n_batch, c_in, d_in, h_in, w_in = xd.shape
    c_out, c_w, kd, kh, kw = weight.data.shape
    if c_in != c_w:
        raise ValueError(f"input channels {c_in} != kernel channels {c_w}")
    sd, sh, sw = _triple(stride)
    pd, ph, pw = _triple(padding)

    xp = np.pad(xd, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)))
    if xp.shape[2] < kd or xp.shape[3] < kh or xp.shape[4] < kw:
        raise ValueError(
            f"kernel {(kd, kh, kw)} larger than padded input {xp.shape[2:]}"
        )
    windows = sliding_window_view(xp, (kd, kh, kw), axis=(2, 3, 4))[:, :, ::sd, ::sh, ::sw]
    out = np.einsum("bcdhwijk,ocijk->bodhw", windows, weight.data, optimize=True)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, -1, 1, 1, 1)
    d_out, h_out, w_out = out.shape[2:]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g5 = g[None] if single else g
        if bias is not None and _participates(bias):
            _accum(bias, g5.sum(axis=(0, 2, 3, 4)))
        if _participates(weight):
            _accum(weight, np.einsum("bodhw,bcdhwijk->ocijk", g5, windows, optimize=True))
        if _participates(x):
            dxp = np.zeros_like(xp)
            for i in range(kd):
                for j in range(kh):
                    for k in range(kw):
                        contribution = np.einsum(
                            "bodhw,oc->bcdhw", g5, weight.data[:, :, i, j, k], optimize=True
                        )
                        dxp[:, :,
                            i:i + sd * d_out:sd,
                            j:j + sh * h_out:sh,
                            k:k + sw * w_out:sw] += contribution
            dx = dxp[:, :, pd:pd + d_in, ph:ph + h_in, pw:pw + w_in]
            _accum(x, dx[0] if single else dx)

    return Tensor._make(out[0] if single else out, parents, bw)


def maxpool3d(x: Tensor, kernel, stride=None, padding=0) -> Tensor:
    """Max pooling over (D, H, W); gradient flows to the first maximal element.

    Padding uses -inf so padded samples never win. Stride defaults to the
    kernel (non-overlapping windows).
    """
    x = as_tensor(x)
    single = x.data.ndim == 4
    xd = x.data[None] if single else x.data
    kd, kh, kw = _triple(kernel)
    sd, sh, sw = _triple(stride if stride is not None else (kd, kh, kw))
    pd, ph, pw = _triple(padding)
    if pd >= kd or ph >= kh or pw >= kw:
        raise ValueError("pool padding must be smaller than the kernel")

    xp = np.pad(xd, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)),
                constant_values=-np.inf)
    if xp.shape[2] < kd or xp.shape[3] < kh or xp.shape[4] < kw:
        raise ValueError(f"pool kernel {(kd, kh, kw)} larger than padded input {xp.shape[2:]}")
    windows = sliding_window_view(xp, (kd, kh, kw), axis=(2, 3, 4))[:, :, ::sd, ::sh, ::sw]
    n_batch, channels, d_out, h_out, w_out = windows.shape[:5]
    flat = windows.reshape(*windows.shape[:5], -1)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        g5 = g[None] if single else g
        di, hi, wi = np.unravel_index(arg, (kd, kh, kw))
        bb, cc, dd, hh, ww = np.ogrid[:n_batch, :channels, :d_out, :h_out, :w_out]
        dxp = np.zeros_like(xp)
        np.add.at(dxp, (bb, cc, dd * sd + di, hh * sh + hi, ww * sw + wi), g5)
        dx = dxp[:, :, pd:pd + xd.shape[2], ph:ph + xd.shape[3], pw:pw + xd.shape[4]]
        _accum(x, dx[0] if single else dx)

    return Tensor._make(out[0] if single else out, (x,), bw)


def conv3d_forward(x, kernel, bias=None, stride=1, padding=0) -> np.ndarray:
    """Plain-array convolution wrapper: accepts ndarrays, returns an ndarray."""
    with no_grad():
        result = conv3d(as_tensor(x), as_tensor(kernel),
                        None if bias is None else as_tensor(bias),
                        stride=stride, padding=padding)
    return result.data
