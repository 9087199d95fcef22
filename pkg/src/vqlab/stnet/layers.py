"""Network building blocks: convolutions, attention, inception, transformer.

Every layer exposes named_params() -> list of (name, Tensor) so optimizers
and checkpoints can address the full parameter set with stable dotted names.
Weights initialize from U(-1/sqrt(fan_in), +1/sqrt(fan_in)) using the
caller-supplied generator; construction order fixes the random stream.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    concat,
    conv3d,
    layer_norm,
    matmul,
    maxpool3d,
    softmax,
)


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                  gain: float = 6.0) -> Tensor:
    # gain 6 is the relu-preserving (He) uniform bound sqrt(6 / fan_in);
    # biases use gain 1 so they stay small relative to the activations.
    bound = np.sqrt(gain / float(fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Layer:
    def named_params(self) -> list[tuple[str, Tensor]]:
        raise NotImplementedError

    @staticmethod
    def _prefixed(prefix: str, child: "Layer") -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.{name}", p) for name, p in child.named_params()]


class Conv3dLayer(Layer):
    def __init__(self, c_in: int, c_out: int, kernel, rng: np.random.Generator,
                 stride=1, padding=0) -> None:
        kd, kh, kw = (kernel, kernel, kernel) if isinstance(kernel, int) else kernel
        fan_in = c_in * kd * kh * kw
        self.weight = _uniform_init(rng, (c_out, c_in, kd, kh, kw), fan_in)
        self.bias = _uniform_init(rng, (c_out,), fan_in, gain=1.0)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv3d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def named_params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class Linear(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator) -> None:
        self.weight = _uniform_init(rng, (n_in, n_out), n_in)
        self.bias = _uniform_init(rng, (n_out,), n_in, gain=1.0)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias

    def named_params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class LayerNorm(Layer):
    def __init__(self, dim: int) -> None:
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)

    def named_params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class SqueezeExcite(Layer):
    """Channel attention: global-average squeeze, bottleneck, sigmoid gate."""

    def __init__(self, channels: int, ratio: int, rng: np.random.Generator) -> None:
        if channels % ratio != 0:
            raise ValueError(f"reduction ratio {ratio} does not divide {channels} channels")
        hidden = channels // ratio
        self.channels = channels
        self.fc1 = Linear(channels, hidden, rng)
        self.fc2 = Linear(hidden, channels, rng)

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 5 or x.data.shape[1] != self.channels:
            raise ValueError(
                f"expected (B, {self.channels}, D, H, W) input, got shape {x.data.shape}"
            )
        squeezed = x.mean(axis=(2, 3, 4))
        gate = self.fc2(self.fc1(squeezed).relu()).sigmoid()
        batch = x.data.shape[0]
        return x * gate.reshape(batch, self.channels, 1, 1, 1)

    def named_params(self):
        return self._prefixed("fc1", self.fc1) + self._prefixed("fc2", self.fc2)


def channel_attention(x, attention: SqueezeExcite):
    """Functional form of SqueezeExcite for a (C, D, H, W) or batched input."""
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    single = t.data.ndim == 4
    if single:
        t = t.reshape(1, *t.data.shape)
    out = attention(t)
    return out.reshape(*out.data.shape[1:]) if single else out


class InceptionBlock(Layer):
    """Four-branch block: 1x1x1 | 1x1x1->3^3 | 1x1x1->5^3 | maxpool->1x1x1.

    Branch widths are (b1, b3_reduce, b3, b5_reduce, b5, pool_proj); output
    channels = b1 + b3 + b5 + pool_proj. Optional squeeze-excite gate on the
    concatenated output.
    """

    def __init__(self, c_in: int, widths: tuple[int, int, int, int, int, int],
                 rng: np.random.Generator, attention_ratio: int | None = None) -> None:
        b1, b3r, b3, b5r, b5, bp = widths
        self.out_channels = b1 + b3 + b5 + bp
        self.branch1 = Conv3dLayer(c_in, b1, 1, rng)
        self.branch3_reduce = Conv3dLayer(c_in, b3r, 1, rng)
        self.branch3 = Conv3dLayer(b3r, b3, 3, rng, padding=1)
        self.branch5_reduce = Conv3dLayer(c_in, b5r, 1, rng)
        self.branch5 = Conv3dLayer(b5r, b5, 5, rng, padding=2)
        self.branch_pool = Conv3dLayer(c_in, bp, 1, rng)
        self.attention = (
            SqueezeExcite(self.out_channels, attention_ratio, rng)
            if attention_ratio is not None else None
        )

    def __call__(self, x: Tensor) -> Tensor:
        # Kernel 3 / stride 1 / padding 1 preserves any extent >= 1, and the
        # -inf padding never wins because each window holds a real sample.
        branches = [
            self.branch1(x).relu(),
            self.branch3(self.branch3_reduce(x).relu()).relu(),
            self.branch5(self.branch5_reduce(x).relu()).relu(),
            self.branch_pool(maxpool3d(x, 3, stride=1, padding=1)).relu(),
        ]
        out = concat(branches, axis=1)
        if self.attention is not None:
            out = self.attention(out)
        return out

    def named_params(self):
        params = (
            self._prefixed("branch1", self.branch1)
            + self._prefixed("branch3_reduce", self.branch3_reduce)
            + self._prefixed("branch3", self.branch3)
            + self._prefixed("branch5_reduce", self.branch5_reduce)
            + self._prefixed("branch5", self.branch5)
            + self._prefixed("branch_pool", self.branch_pool)
        )
        if self.attention is not None:
            params += self._prefixed("attention", self.attention)
        return params


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd columns."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    index = np.arange(dim, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, 2.0 * np.floor(index / 2.0) / dim)
    table = np.empty((length, dim))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


class MultiHeadSelfAttention(Layer):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator) -> None:
        if dim % heads != 0:
            raise ValueError(f"head count {heads} does not divide model dim {dim}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        length = x.data.shape[0]

        def split_heads(t: Tensor) -> Tensor:
            return t.reshape(length, self.heads, self.head_dim).transpose(1, 0, 2)

        q = split_heads(self.wq(x))
        k = split_heads(self.wk(x))
        v = split_heads(self.wv(x))
        scores = matmul(q, k.transpose(0, 2, 1)) * (1.0 / np.sqrt(self.head_dim))
        attended = matmul(softmax(scores, axis=-1), v)
        merged = attended.transpose(1, 0, 2).reshape(length, self.dim)
        return self.wo(merged)

    def named_params(self):
        return (
            self._prefixed("wq", self.wq) + self._prefixed("wk", self.wk)
            + self._prefixed("wv", self.wv) + self._prefixed("wo", self.wo)
        )


class TransformerLayer(Layer):
    """Post-norm encoder layer: LN(x + attention(x)), then LN(x + feedforward(x))."""

    def __init__(self, dim: int, heads: int, ff_mult: int, rng: np.random.Generator) -> None:
        self.attention = MultiHeadSelfAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.ff1 = Linear(dim, dim * ff_mult, rng)
        self.ff2 = Linear(dim * ff_mult, dim, rng)
        self.norm2 = LayerNorm(dim)

    def __call__(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attention(x))
        return self.norm2(x + self.ff2(self.ff1(x).relu()))

    def named_params(self):
        return (
            self._prefixed("attention", self.attention)
            + self._prefixed("norm1", self.norm1)
            + self._prefixed("ff1", self.ff1)
            + self._prefixed("ff2", self.ff2)
            + self._prefixed("norm2", self.norm2)
        )
