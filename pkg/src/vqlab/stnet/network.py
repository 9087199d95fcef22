"""Network assembly: cube feature extractor, feature pooling, regression head.

Shape chain: cube (S, S, 3, T) -> cube feature 1 x D -> per-subsequence
pooled feature 1 x 2D (mean and max over the subsequence's cubes,
concatenated) -> global feature L x 2D over the L subsequences ->
transformer encoder -> scalar quality in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import _io
from ..preprocess import CubeBatch, prepare_cubes
from ..vio import VideoSequence
from .layers import (
    Conv3dLayer,
    InceptionBlock,
    Layer,
    Linear,
    TransformerLayer,
    positional_encoding,
)
from .tensor import Tensor, maxpool3d, no_grad

CUBE = "CUBE"
SUBSEQ = "SUBSEQ"
GLOBAL = "GLOBAL"

BranchWidths = tuple[int, int, int, int, int, int]


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; presets below cover desk and paper scales."""

    cube_side: int = 32
    cube_frames: int = 16
    d_cube: int = 64
    stem_width: int = 16
    stem_stride: tuple[int, int, int] = (1, 1, 1)
    blocks: tuple[BranchWidths, ...] = (
        (4, 4, 8, 2, 2, 2),      # out 16
        (8, 8, 16, 4, 4, 4),     # out 32
        (16, 16, 32, 8, 8, 8),   # out 64
    )
    attention_ratio: int = 8
    transformer_layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    use_positional_encoding: bool = True
    saliency_threshold: float = 0.5

    @property
    def pooled_dim(self) -> int:
        return 2 * self.d_cube

    def validate(self) -> None:
        if self.cube_side < 16:
            raise ValueError(f"cube side must be >= 16, got {self.cube_side}")
        if self.cube_frames < 1 or self.d_cube < 1 or not self.blocks:
            raise ValueError("cube_frames, d_cube and blocks must be positive/non-empty")
        if self.pooled_dim % self.heads != 0:
            raise ValueError(
                f"head count {self.heads} does not divide model dim {self.pooled_dim}"
            )
        for widths in self.blocks[-2:]:
            out = widths[0] + widths[2] + widths[4] + widths[5]
            if out % self.attention_ratio != 0:
                raise ValueError(
                    f"attention ratio {self.attention_ratio} does not divide {out} channels"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "NetworkConfig":
        data = dict(raw)
        data["stem_stride"] = tuple(data["stem_stride"])
        data["blocks"] = tuple(tuple(b) for b in data["blocks"])
        return cls(**data)


def desk_config(**overrides) -> NetworkConfig:
    """Small configuration that trains in seconds on a CPU."""
    return NetworkConfig(**overrides)


def paper_config(**overrides) -> NetworkConfig:
    """Configuration with the published shape constants: 224-pixel cubes,
    16 frames, 1024-dim cube features, 2048-dim pooled features."""
    defaults = dict(
        cube_side=224,
        cube_frames=16,
        d_cube=1024,
        stem_stride=(1, 2, 2),
    )
    defaults.update(overrides)
    return NetworkConfig(**defaults)


def tiny_config(**overrides) -> NetworkConfig:
    """Minimal widths for gradient checks and fast unit tests."""
    defaults = dict(
        cube_side=16,
        cube_frames=4,
        d_cube=8,
        stem_width=4,
        blocks=((2, 2, 2, 1, 1, 1), (2, 2, 2, 1, 1, 3)),
        attention_ratio=2,
        transformer_layers=1,
        heads=2,
        ff_mult=2,
    )
    defaults.update(overrides)
    return NetworkConfig(**defaults)


@dataclass(frozen=True)
class FeatureTensor:
    """Feature at one pipeline level; shape is fixed by the level tag."""

    level: str
    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if self.level not in (CUBE, SUBSEQ, GLOBAL):
            raise ValueError(f"unknown feature level {self.level!r}")
        if v.ndim != 2:
            raise ValueError(f"feature values must be 2-D, got shape {v.shape}")
        if self.level in (CUBE, SUBSEQ) and v.shape[0] != 1:
            raise ValueError(f"{self.level} feature must be a single row, got {v.shape}")
        if self.level == GLOBAL and v.shape[0] < 1:
            raise ValueError("GLOBAL feature needs at least one subsequence row")


def pool_subsequence(cube_features) -> FeatureTensor:
    """Concatenate mean and max over a subsequence's N cube features: N x D -> 1 x 2D."""
    values = cube_features.data if isinstance(cube_features, Tensor) else np.asarray(
        cube_features, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError(f"expected a non-empty N x D feature matrix, got shape {values.shape}")
    pooled = np.concatenate([values.mean(axis=0), values.max(axis=0)])
    return FeatureTensor(level=SUBSEQ, values=pooled[None, :])


class CubeNet(Layer):
    """Stem conv -> inception blocks (squeeze-excite on the last two) -> GAP -> D-dim projection.

    Also carries the stage-1 head: a linear-plus-sigmoid map from the cube
    feature to a per-cube quality estimate.
    """

    def __init__(self, config: NetworkConfig, rng: np.random.Generator) -> None:
        config.validate()
        self.config = config
        self.stem = Conv3dLayer(3, config.stem_width, 3, rng,
                                stride=config.stem_stride, padding=1)
        self.blocks: list[InceptionBlock] = []
        c_in = config.stem_width
        n_blocks = len(config.blocks)
        for index, widths in enumerate(config.blocks):
            ratio = config.attention_ratio if index >= n_blocks - 2 else None
            block = InceptionBlock(c_in, widths, rng, attention_ratio=ratio)
            self.blocks.append(block)
            c_in = block.out_channels
        self.projection = Linear(c_in, config.d_cube, rng)
        self.cube_head = Linear(config.d_cube, 1, rng)

    @staticmethod
    def _downsample(x: Tensor) -> Tensor:
        kernel = tuple(min(2, n) for n in x.data.shape[2:])
        if kernel == (1, 1, 1):
            return x
        return maxpool3d(x, kernel)

    def features(self, x: Tensor) -> Tensor:
        """(B, 3, T, S, S) -> (B, d_cube)."""
        if x.data.ndim != 5 or x.data.shape[1] != 3:
            raise ValueError(f"expected (B, 3, T, S, S) input, got shape {x.data.shape}")
        expected = (self.config.cube_frames, self.config.cube_side, self.config.cube_side)
        if x.data.shape[2:] != expected:
            raise ValueError(f"cube geometry {x.data.shape[2:]} != configured {expected}")
        x = self._downsample(self.stem(x).relu())
        for index, block in enumerate(self.blocks):
            x = block(x)
            if index < len(self.blocks) - 1:
                x = self._downsample(x)
        pooled = x.mean(axis=(2, 3, 4))
        return self.projection(pooled)

    def cube_scores(self, x: Tensor) -> Tensor:
        """(B, 3, T, S, S) -> (B, 1) per-cube quality in [0, 1] (stage-1 head)."""
        return self.cube_head(self.features(x)).sigmoid()

    def named_params(self):
        params = self._prefixed("stem", self.stem)
        for index, block in enumerate(self.blocks):
            params += self._prefixed(f"block{index}", block)
        params += self._prefixed("projection", self.projection)
        params += self._prefixed("cube_head", self.cube_head)
        return params


def cube_to_input(cube: np.ndarray) -> np.ndarray:
    """(S, S, 3, T) cube array -> (3, T, S, S) network layout."""
    if cube.ndim != 4 or cube.shape[2] != 3:
        raise ValueError(f"expected an (S, S, 3, T) cube, got shape {cube.shape}")
    return np.ascontiguousarray(cube.transpose(2, 3, 0, 1), dtype=np.float64)


def extract_cube_features(cube: np.ndarray, net: CubeNet) -> FeatureTensor:
    """One cube (S, S, 3, T) -> CUBE-level feature of shape 1 x d_cube."""
    with no_grad():
        features = net.features(Tensor(cube_to_input(cube)[None]))
    return FeatureTensor(level=CUBE, values=features.data)


class Regressor(Layer):
    """Positional encoding + transformer encoder + mean pooling + sigmoid head."""

    def __init__(self, config: NetworkConfig, rng: np.random.Generator) -> None:
        config.validate()
        self.config = config
        dim = config.pooled_dim
        self.layers = [
            TransformerLayer(dim, config.heads, config.ff_mult, rng)
            for _ in range(config.transformer_layers)
        ]
        self.head = Linear(dim, 1, rng)

    def encode(self, global_feature: Tensor) -> Tensor:
        """(L, 2D) -> scalar tensor in [0, 1]."""
        x = global_feature
        if x.data.ndim != 2 or x.data.shape[1] != self.config.pooled_dim:
            raise ValueError(
                f"expected (L, {self.config.pooled_dim}) global feature, got {x.data.shape}"
            )
        if self.config.use_positional_encoding:
            x = x + Tensor(positional_encoding(x.data.shape[0], self.config.pooled_dim))
        for layer in self.layers:
            x = layer(x)
        pooled = x.mean(axis=0, keepdims=True)
        return self.head(pooled).sigmoid().reshape(())

    def named_params(self):
        params = []
        for index, layer in enumerate(self.layers):
            params += self._prefixed(f"layer{index}", layer)
        params += self._prefixed("head", self.head)
        return params


def encode_and_regress(global_feature, regressor: Regressor) -> float:
    """(L, 2D) global feature -> predicted quality in [0, 1]."""
    values = global_feature.values if isinstance(global_feature, FeatureTensor) else (
        np.asarray(global_feature, dtype=np.float64))
    with no_grad():
        return float(regressor.encode(Tensor(values)).data)


class STFEEModel:
    """Cube feature extractor plus sequence regressor, built from one seed."""

    def __init__(self, config: NetworkConfig, seed: int = 0) -> None:
        config.validate()
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.cube_net = CubeNet(config, rng)
        self.regressor = Regressor(config, rng)
        self.training_log: dict[str, list[float]] = {}

    def named_params(self) -> list[tuple[str, Tensor]]:
        return (
            [(f"cube_net.{n}", p) for n, p in self.cube_net.named_params()]
            + [(f"regressor.{n}", p) for n, p in self.regressor.named_params()]
        )

    def subsequence_features(self, batches: Sequence[CubeBatch]) -> FeatureTensor:
        """Cube batches of one video -> GLOBAL feature (L, 2D), one row per subsequence."""
        if not batches:
            raise ValueError("no cube batches supplied")
        rows = []
        with no_grad():
            for batch in batches:
                stacked = np.stack([cube_to_input(c) for c in batch.cubes])
                features = self.cube_net.features(Tensor(stacked))
                rows.append(pool_subsequence(features.data).values[0])
        return FeatureTensor(level=GLOBAL, values=np.stack(rows))

    def video_feature(self, video: VideoSequence) -> FeatureTensor:
        batches = prepare_cubes(
            video,
            side=self.config.cube_side,
            threshold=self.config.saliency_threshold,
        )
        return self.subsequence_features(batches)

    def predict_video(self, video: VideoSequence) -> float:
        return encode_and_regress(self.video_feature(video), self.regressor)


CHECKPOINT_MANIFEST = "manifest.json"
CHECKPOINT_BLOB = "params.bin"


def save_checkpoint(model: STFEEModel, directory: str | Path) -> None:
    """Write manifest.json (config, seed, parameter index) + params.bin (LE float32)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name, param in model.named_params():
        flat = param.data.astype("<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(param.data.shape),
            "offset": offset,
            "bytes": len(flat),
        })
        chunks.append(flat)
        offset += len(flat)
    _io.write_json(directory / CHECKPOINT_MANIFEST, {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "dtype": "<f4",
        "params": entries,
    }, "checkpoint")
    _io.atomic_write_bytes(directory / CHECKPOINT_BLOB, b"".join(chunks))


def load_checkpoint(directory: str | Path) -> STFEEModel:
    directory = Path(directory)
    with open(directory / CHECKPOINT_MANIFEST, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    blob = (directory / CHECKPOINT_BLOB).read_bytes()
    model = STFEEModel(NetworkConfig.from_dict(manifest["config"]), seed=manifest["seed"])
    params = dict(model.named_params())
    for entry in manifest["params"]:
        if entry["name"] not in params:
            raise ValueError(f"checkpoint parameter {entry['name']!r} not in this architecture")
        raw = blob[entry["offset"]:entry["offset"] + entry["bytes"]]
        values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        target = params[entry["name"]]
        if values.size != target.data.size:
            raise ValueError(f"checkpoint parameter {entry['name']!r} has wrong size")
        target.data = values.reshape(entry["shape"])
    return model
