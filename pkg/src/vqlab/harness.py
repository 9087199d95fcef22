"""Correlation statistics, content-disjoint split protocols and experiment orchestration.

PLCC/SRCC/KRCC/RMSE follow the conventional definitions: SRCC uses average
ranks for ties, KRCC is tau-b. Degenerate inputs (zero variance, all-tied)
yield NaN and are flagged on the report instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _io


class DatasetError(ValueError):
    """Dataset manifest problems: missing assets, overlapping contents."""


def _as_pair(x: Sequence[float], y: Sequence[float], min_n: int) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"inputs must be equal-length 1-D, got {xa.shape} and {ya.shape}")
    if xa.size < min_n:
        raise ValueError(f"need at least {min_n} samples, got {xa.size}")
    return xa, ya


def plcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson linear correlation; NaN when either side has zero variance."""
    xa, ya = _as_pair(x, y, 2)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return float("nan")
    return float(dx @ dy) / denom


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties receiving the average of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    xa, ya = _as_pair(x, y, 2)
    return plcc(_average_ranks(xa), _average_ranks(ya))


def krcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall tau-b; NaN when one side is entirely tied."""
    xa, ya = _as_pair(x, y, 2)
    n = xa.size
    # sign tables over all pairs; O(n^2) is fine at the sample sizes we see
    sx = np.sign(xa[:, None] - xa[None, :])
    sy = np.sign(ya[:, None] - ya[None, :])
    iu = np.triu_indices(n, k=1)
    prod = sx[iu] * sy[iu]
    concordant_minus_discordant = float(prod.sum())
    n0 = n * (n - 1) / 2.0
    ties_x = n0 - float(np.count_nonzero(sx[iu]))
    ties_y = n0 - float(np.count_nonzero(sy[iu]))
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0.0:
        return float("nan")
    return concordant_minus_discordant / denom


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = _as_pair(x, y, 1)
    diff = xa - ya
    return math.sqrt(float(np.mean(diff * diff)))


@dataclass
class EvalReport:
    """PLCC/SRCC/KRCC/RMSE bundle attached to a named experiment."""

    experiment_id: str
    plcc: float
    srcc: float
    krcc: float
    rmse: float
    n: int
    metadata: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return any(math.isnan(v) for v in (self.plcc, self.srcc, self.krcc))

    @classmethod
    def from_pairs(
        cls, experiment_id: str, predicted: Sequence[float], actual: Sequence[float], **metadata
    ) -> "EvalReport":
        xa, ya = _as_pair(predicted, actual, 2)
        return cls(
            experiment_id=experiment_id,
            plcc=plcc(xa, ya),
            srcc=srcc(xa, ya),
            krcc=krcc(xa, ya),
            rmse=rmse(xa, ya),
            n=int(xa.size),
            metadata=dict(metadata),
        )

    def to_dict(self) -> dict:
        def _clean(v: float):
            return None if math.isnan(v) else v

        return {
            "experiment_id": self.experiment_id,
            "plcc": _clean(self.plcc),
            "srcc": _clean(self.srcc),
            "krcc": _clean(self.krcc),
            "rmse": self.rmse,
            "n": self.n,
            "degenerate": self.degenerate,
            "metadata": self.metadata,
        }


def summarize_reports(reports: Sequence[EvalReport], experiment_id: str = "summary") -> EvalReport:
    """Arithmetic mean of per-fold statistics; degenerate folds propagate NaN."""
    if not reports:
        raise ValueError("no reports to summarize")
    return EvalReport(
        experiment_id=experiment_id,
        plcc=float(np.mean([r.plcc for r in reports])),
        srcc=float(np.mean([r.srcc for r in reports])),
        krcc=float(np.mean([r.krcc for r in reports])),
        rmse=float(np.mean([r.rmse for r in reports])),
        n=int(sum(r.n for r in reports)),
        metadata={"folds": len(reports)},
    )


@dataclass
class SplitPlan:
    """Content-disjoint folds: list of (train_ids, test_ids), plus the seed used."""

    folds: list[tuple[list[str], list[str]]]
    seed: int
    kind: str = "kfold"

    def validate(self) -> None:
        all_ids: set[str] = set()
        for train, test in self.folds:
            if set(train) & set(test):
                raise ValueError("train/test overlap within a fold")
            all_ids.update(train, test)
        if self.kind == "kfold":
            test_union: set[str] = set()
            for _, test in self.folds:
                tset = set(test)
                if test_union & tset:
                    raise ValueError("test folds overlap")
                test_union |= tset
            if test_union != all_ids:
                raise ValueError("test folds do not cover all contents")


def make_kfold(content_ids: Sequence[str], k: int, seed: int = 0) -> SplitPlan:
    """Seeded shuffle then contiguous partition into k content-disjoint folds."""
    ids = list(content_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate content ids")
    if k < 2 or k > len(ids):
        raise ValueError(f"k={k} out of range for {len(ids)} contents")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    sizes = [len(ids) // k + (1 if i < len(ids) % k else 0) for i in range(k)]
    folds = []
    pos = 0
    for size in sizes:
        test = order[pos : pos + size]
        train = order[:pos] + order[pos + size :]
        folds.append((train, test))
        pos += size
    plan = SplitPlan(folds=folds, seed=seed, kind="kfold")
    plan.validate()
    return plan


def make_holdout(content_ids: Sequence[str], test_fraction: float = 0.2, seed: int = 0) -> SplitPlan:
    """Single content-disjoint train/test split (80:20 by default)."""
    ids = list(content_ids)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction {test_fraction} outside (0, 1)")
    if len(ids) < 2:
        raise ValueError("need at least 2 contents")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_test = max(1, round(len(ids) * test_fraction))
    n_test = min(n_test, len(ids) - 1)
    plan = SplitPlan(folds=[(order[n_test:], order[:n_test])], seed=seed, kind="holdout")
    plan.validate()
    return plan


@dataclass
class VideoItem:
    path: str
    content_id: str
    mos: float
    encoder: str = ""
    level_param: float = 0.0


@dataclass
class DatasetManifest:
    name: str
    items: list[VideoItem]

    @property
    def content_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for item in self.items:
            seen.setdefault(item.content_id)
        return list(seen)

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        cfg = _io.load_config(path)
        base = Path(path).parent
        items = []
        for entry in cfg.get("videos", []):
            p = Path(entry["path"])
            if not p.is_absolute():
                p = base / p
            items.append(
                VideoItem(
                    path=str(p),
                    content_id=str(entry["content_id"]),
                    mos=float(entry["mos"]),
                    encoder=str(entry.get("encoder", "")),
                    level_param=float(entry.get("level_param", 0.0)),
                )
            )
        if not items:
            raise DatasetError(f"{path}: manifest lists no videos")
        return cls(name=str(cfg.get("name", Path(path).stem)), items=items)


def check_assets(dataset: DatasetManifest) -> None:
    """Enumerate every missing video before any training starts."""
    missing = [item.path for item in dataset.items if not Path(item.path).is_file()]
    if missing:
        raise DatasetError(f"{len(missing)} missing video file(s): " + ", ".join(sorted(missing)))


def normalize_labels(dataset: DatasetManifest) -> bool:
    """Min-max rescale MOS to [0, 1] when the manifest uses another scale.

    Returns True when rescaling was applied.
    """
    values = [item.mos for item in dataset.items]
    lo, hi = min(values), max(values)
    if 0.0 <= lo and hi <= 1.0:
        return False
    if hi == lo:
        raise DatasetError("cannot normalize constant labels")
    for item in dataset.items:
        item.mos = (item.mos - lo) / (hi - lo)
    return True


def run_experiment(
    dataset: DatasetManifest,
    model_config,
    plan: SplitPlan,
    train_config=None,
    experiment_id: str = "experiment",
) -> list[EvalReport]:
    """Per-fold train/predict/score, plus a mean-over-folds summary report.

    Returns one report per fold followed by the summary. Degenerate
    correlations (for example constant predictions) are flagged, not raised.
    """
    from . import stnet
    from .vio import read_y4m_file

    check_assets(dataset)
    normalized = normalize_labels(dataset)
    plan.validate()

    by_content: dict[str, list[VideoItem]] = {}
    for item in dataset.items:
        by_content.setdefault(item.content_id, []).append(item)
    unknown = set(by_content) - {cid for train, test in plan.folds for cid in (*train, *test)}
    if unknown:
        raise DatasetError(f"contents missing from split plan: {sorted(unknown)}")

    reports = []
    for fold_idx, (train_ids, test_ids) in enumerate(plan.folds):
        train_items = [it for cid in train_ids for it in by_content.get(cid, [])]
        test_items = [it for cid in test_ids for it in by_content.get(cid, [])]
        if not train_items or not test_items:
            raise DatasetError(f"fold {fold_idx} has an empty side")

        train_videos = [(read_y4m_file(it.path, content_id=it.content_id), it.mos) for it in train_items]
        model = stnet.train_two_stage(train_videos, model_config, train_config)
        predictions = [
            stnet.predict_video_quality(read_y4m_file(it.path, content_id=it.content_id), model)
            for it in test_items
        ]
        labels = [it.mos for it in test_items]
        report = EvalReport.from_pairs(
            f"{experiment_id}/fold{fold_idx}",
            predictions,
            labels,
            fold=fold_idx,
            train_contents=len(train_ids),
            test_contents=len(test_ids),
            labels_normalized=normalized,
        )
        reports.append(report)
    reports.append(summarize_reports(reports, experiment_id=f"{experiment_id}/summary"))
    return reports


def run_cross_dataset(
    train_dataset: DatasetManifest,
    test_dataset: DatasetManifest,
    model_config,
    train_config=None,
    experiment_id: str = "cross-dataset",
) -> list[EvalReport]:
    """Train on one manifest, test on another; content overlap is rejected."""
    from . import stnet
    from .vio import read_y4m_file

    overlap = set(train_dataset.content_ids) & set(test_dataset.content_ids)
    if overlap:
        raise DatasetError(f"content overlap between datasets: {sorted(overlap)}")
    check_assets(train_dataset)
    check_assets(test_dataset)
    normalize_labels(train_dataset)
    normalized = normalize_labels(test_dataset)

    train_videos = [
        (read_y4m_file(it.path, content_id=it.content_id), it.mos) for it in train_dataset.items
    ]
    model = stnet.train_two_stage(train_videos, model_config, train_config)
    predictions = [
        stnet.predict_video_quality(read_y4m_file(it.path, content_id=it.content_id), model)
        for it in test_dataset.items
    ]
    labels = [it.mos for it in test_dataset.items]
    report = EvalReport.from_pairs(
        experiment_id,
        predictions,
        labels,
        train_dataset=train_dataset.name,
        test_dataset=test_dataset.name,
        labels_normalized=normalized,
    )
    return [report]


def write_reports(reports: Sequence[EvalReport], out_dir: str | Path, stem: str = "reports") -> None:
    """Reports as JSON and CSV: one row per fold plus the summary row."""
    out = Path(out_dir)
    _io.write_json(out / f"{stem}.json", {"reports": [r.to_dict() for r in reports]}, "eval-reports")
    _io.write_csv(
        out / f"{stem}.csv",
        "eval-reports",
        ["experiment_id", "plcc", "srcc", "krcc", "rmse", "n", "degenerate"],
        [
            [r.experiment_id, r.plcc, r.srcc, r.krcc, r.rmse, r.n, r.degenerate]
            for r in reports
        ],
    )
