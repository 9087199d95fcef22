"""Two-stage training: SGD on per-cube MSE, then Adam on per-video L1.

Stage 1 trains the cube feature extractor through its linear-sigmoid head;
every cube inherits its parent video's MOS as the label. Stage 2 freezes the
extractor, pools cube features into per-video global features, and trains the
transformer regressor. One seeded generator drives batching for both stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..preprocess import prepare_cubes
from ..vio import VideoSequence
from .network import (
    CubeNet,
    NetworkConfig,
    Regressor,
    STFEEModel,
    cube_to_input,
    pool_subsequence,
)
from .tensor import Tensor, no_grad


@dataclass(frozen=True)
class TrainConfig:
    stage1_steps: int = 2000
    stage2_steps: int = 2000
    lr_stage1: float = 0.001
    lr_stage2: float = 0.001
    momentum: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_cubes: int = 8
    batch_videos: int = 8
    target_stage1: float | None = None
    target_stage2: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.stage1_steps < 0 or self.stage2_steps < 0:
            raise ValueError("step counts must be non-negative")
        if self.lr_stage1 < 0 or self.lr_stage2 < 0:
            raise ValueError("learning rates must be non-negative")
        if self.batch_cubes < 1 or self.batch_videos < 1:
            raise ValueError("batch sizes must be positive")


def loss_cube(pred, label):
    """Mean squared error. Tensor prediction -> Tensor loss; sequences -> float."""
    if isinstance(pred, Tensor):
        target = label if isinstance(label, Tensor) else Tensor(np.asarray(label, float))
        if pred.data.shape != target.data.shape:
            raise ValueError(f"shape mismatch {pred.data.shape} vs {target.data.shape}")
        diff = pred - target
        return (diff * diff).mean()
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(label, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"need equal-length non-empty inputs, got {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def loss_video(pred, label):
    """Mean absolute error; the subgradient at zero error is zero."""
    if isinstance(pred, Tensor):
        target = label if isinstance(label, Tensor) else Tensor(np.asarray(label, float))
        if pred.data.shape != target.data.shape:
            raise ValueError(f"shape mismatch {pred.data.shape} vs {target.data.shape}")
        return (pred - target).abs().mean()
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(label, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"need equal-length non-empty inputs, got {p.shape} vs {t.shape}")
    return float(np.mean(np.abs(p - t)))


class SGD:
    """Momentum SGD: v = mu * v + g; p -= lr * v."""

    def __init__(self, params: Sequence[tuple[str, Tensor]], lr: float,
                 momentum: float = 0.0) -> None:
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self) -> None:
        for name, param in self.params:
            if param.grad is None:
                continue
            v = self._velocity[name]
            v *= self.momentum
            v += param.grad
            param.data -= self.lr * v

    def zero_grad(self) -> None:
        for _, param in self.params:
            param.grad = None


class Adam:
    def __init__(self, params: Sequence[tuple[str, Tensor]], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {name: np.zeros_like(p.data) for name, p in self.params}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params}
        self._t = 0

    def step(self) -> None:
        self._t += 1
        correct1 = 1.0 - self.beta1 ** self._t
        correct2 = 1.0 - self.beta2 ** self._t
        for name, param in self.params:
            if param.grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * param.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * param.grad ** 2
            param.data -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)

    def zero_grad(self) -> None:
        for _, param in self.params:
            param.grad = None


def train_stage1(
    cubes: Sequence[np.ndarray],
    labels: Sequence[float],
    net: CubeNet,
    config: TrainConfig,
) -> list[float]:
    """Minibatch SGD on per-cube MSE; returns the per-step loss curve."""
    config.validate()
    if len(cubes) == 0:
        raise ValueError("stage 1 needs at least one cube")
    if len(cubes) != len(labels):
        raise ValueError(f"{len(cubes)} cubes vs {len(labels)} labels")
    inputs = np.stack([cube_to_input(np.asarray(c, dtype=np.float64)) for c in cubes])
    targets = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if targets.size and (targets.min() < 0.0 or targets.max() > 1.0):
        raise ValueError("labels must lie in [0, 1]")

    rng = np.random.default_rng(config.seed)
    optimizer = SGD(net.named_params(), lr=config.lr_stage1, momentum=config.momentum)
    batch = min(config.batch_cubes, len(cubes))
    curve: list[float] = []
    for _ in range(config.stage1_steps):
        chosen = rng.choice(len(cubes), size=batch, replace=False)
        optimizer.zero_grad()
        pred = net.cube_scores(Tensor(inputs[chosen]))
        loss = loss_cube(pred, Tensor(targets[chosen]))
        loss.backward()
        optimizer.step()
        curve.append(loss.item())
        if config.target_stage1 is not None and curve[-1] < config.target_stage1:
            break
    return curve


def train_stage2(
    global_features: Sequence[np.ndarray],
    labels: Sequence[float],
    regressor: Regressor,
    config: TrainConfig,
) -> list[float]:
    """Adam on per-video L1 over (L, 2D) global features; extractor not touched."""
    config.validate()
    if len(global_features) == 0:
        raise ValueError("stage 2 needs at least one video feature")
    if len(global_features) != len(labels):
        raise ValueError(f"{len(global_features)} features vs {len(labels)} labels")
    features = [np.asarray(f, dtype=np.float64) for f in global_features]
    targets = [float(l) for l in labels]

    rng = np.random.default_rng(config.seed + 1)
    optimizer = Adam(regressor.named_params(), lr=config.lr_stage2,
                     beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps)
    batch = min(config.batch_videos, len(features))
    curve: list[float] = []
    for _ in range(config.stage2_steps):
        chosen = rng.choice(len(features), size=batch, replace=False)
        optimizer.zero_grad()
        total = None
        for index in chosen:
            pred = regressor.encode(Tensor(features[index]))
            term = (pred - Tensor(np.asarray(targets[index]))).abs()
            total = term if total is None else total + term
        loss = total * (1.0 / batch)
        loss.backward()
        optimizer.step()
        curve.append(loss.item())
        if config.target_stage2 is not None and curve[-1] < config.target_stage2:
            break
    return curve


def cubes_with_labels(
    videos: Sequence[tuple[VideoSequence, float]],
    config: NetworkConfig,
) -> tuple[list[np.ndarray], list[float], list[list]]:
    """Preprocess each (video, mos): cubes inherit the video MOS as their label.

    Returns (cubes, labels, per-video cube batches) so stage 2 can reuse the
    batches without re-running preprocessing.
    """
    all_cubes: list[np.ndarray] = []
    all_labels: list[float] = []
    per_video_batches: list[list] = []
    for video, mos in videos:
        batches = prepare_cubes(video, side=config.cube_side,
                                threshold=config.saliency_threshold)
        per_video_batches.append(batches)
        for batch in batches:
            for cube in batch.cubes:
                all_cubes.append(cube)
                all_labels.append(float(mos))
    return all_cubes, all_labels, per_video_batches


def train_two_stage(
    train_videos: Sequence[tuple[VideoSequence, float]],
    model_config: NetworkConfig,
    train_config: TrainConfig,
) -> STFEEModel:
    """Full protocol: stage-1 extractor training, then stage-2 regressor training.

    Loss curves end up in model.training_log under "stage1" and "stage2".
    """
    if not train_videos:
        raise ValueError("no training videos")
    if train_config is None:
        train_config = TrainConfig()
    train_config.validate()
    model = STFEEModel(model_config, seed=train_config.seed)

    cubes, labels, per_video_batches = cubes_with_labels(train_videos, model_config)
    stage1_curve = train_stage1(cubes, labels, model.cube_net, train_config)

    features = [
        model.subsequence_features(batches).values for batches in per_video_batches
    ]
    video_labels = [mos for _, mos in train_videos]
    stage2_curve = train_stage2(features, video_labels, model.regressor, train_config)

    model.training_log = {"stage1": stage1_curve, "stage2": stage2_curve}
    return model


def predict_video_quality(video: VideoSequence, model: STFEEModel) -> float:
    """Preprocess -> cube features -> pooled subsequences -> regressor score in [0, 1]."""
    return model.predict_video(video)
