"""Semi-automatic MOS labeling: quality-decay laws, fitting, iMOS inference and planning.

Three decay variants relate quality to quantization step size s:

    EXP    Q(s) = exp(-alpha * s)
    QSTAR  Q(s) = (1 - exp(-alpha * s_min / s)) / (1 - exp(-alpha))
    MA     Q(s) = exp(c) * exp(-c * s / s_min)

Uncompressed quality is normalized to 1. EXP decays from 1 at s -> 0+;
QSTAR and MA equal 1 at s = s_min (the smallest step in the encoder grid).
Predictions are clamped to [0, 1] after evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _io
from .harness import EvalReport

VARIANTS = ("EXP", "QSTAR", "MA")

MANUAL = "MANUAL"
INFERRED = "INFERRED"

# MOS is clamped to [MOS_EPS, 1] before log-based closed forms to avoid ln(0).
MOS_EPS = 1e-4

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class LabelingError(ValueError):
    """Grid/table inconsistencies: missing pairs, duplicate records, key mismatches."""


class FitError(ValueError):
    """Decay-law fitting failed: degenerate anchor, unreachable value, no convergence."""


def qp_to_qstep(encoder: str, qp: float, qp_range: tuple[float, float] = (0.0, 63.0)) -> float:
    """Quantization step for a Qp-based encoder: 2^((qp - 4) / 6), strictly increasing."""
    lo, hi = qp_range
    if not lo <= qp <= hi:
        raise ValueError(f"{encoder}: qp {qp} outside legal range [{lo}, {hi}]")
    return 2.0 ** ((qp - 4.0) / 6.0)


def lambda_to_qstep(levels: Sequence[float], lam: float, scale: float = 1.0) -> float:
    """Pseudo-qstep for lambda-controlled encoders: 1-based rank in the grid, scaled.

    The rank mapping only preserves monotone ordering; no rate-distortion
    bridge between lambda and quantization step is claimed.
    """
    ordered = sorted(levels)
    if lam not in ordered:
        raise ValueError(f"lambda {lam} not in configured grid {ordered}")
    return float(ordered.index(lam) + 1) * scale


@dataclass(frozen=True)
class EncodingDescriptor:
    """One point of an encoder's compression grid."""

    encoder: str
    level_param: float
    q_step: float

    def __post_init__(self) -> None:
        if self.q_step <= 0:
            raise ValueError(f"q_step must be positive, got {self.q_step}")

    @property
    def key(self) -> tuple[str, float]:
        return (self.encoder, self.level_param)


@dataclass(frozen=True)
class RatingRecord:
    content_id: str
    encoding: EncodingDescriptor
    mos: float
    provenance: str = MANUAL

    def __post_init__(self) -> None:
        if not 0.0 <= self.mos <= 1.0:
            raise ValueError(f"mos {self.mos} outside [0, 1]")
        if self.provenance not in (MANUAL, INFERRED):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def key(self) -> tuple[str, str, float]:
        return (self.content_id, self.encoding.encoder, self.encoding.level_param)


class RatingTable:
    """Keyed set of rating records: one per (content, encoder, level_param)."""

    def __init__(self, records: Iterable[RatingRecord] = ()) -> None:
        self._records: dict[tuple[str, str, float], RatingRecord] = {}
        for record in records:
            self.add(record)

    def add(self, record: RatingRecord) -> None:
        if record.key in self._records:
            raise LabelingError(f"duplicate record for {record.key}")
        self._records[record.key] = record

    def get(self, key: tuple[str, str, float]) -> RatingRecord | None:
        return self._records.get(key)

    def keys(self) -> set[tuple[str, str, float]]:
        return set(self._records)

    @property
    def records(self) -> list[RatingRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self.records)

    def manual_by_pair(self) -> dict[tuple[str, str], list[RatingRecord]]:
        pairs: dict[tuple[str, str], list[RatingRecord]] = {}
        for record in self.records:
            if record.provenance == MANUAL:
                pairs.setdefault((record.content_id, record.encoding.encoder), []).append(record)
        return pairs

    def write_csv(self, path: str | Path) -> None:
        _io.write_csv(
            path,
            "rating-table",
            ["content_id", "encoder", "level_param", "q_step", "mos", "provenance"],
            [
                [r.content_id, r.encoding.encoder, r.encoding.level_param,
                 repr(r.encoding.q_step), repr(r.mos), r.provenance]
                for r in self.records
            ],
        )

    @classmethod
    def read_csv(cls, path: str | Path) -> "RatingTable":
        header, rows = _io.read_csv_rows(path)
        idx = {name: header.index(name) for name in
               ("content_id", "encoder", "level_param", "q_step", "mos")}
        prov_idx = header.index("provenance") if "provenance" in header else None
        table = cls()
        for row in rows:
            table.add(RatingRecord(
                content_id=row[idx["content_id"]],
                encoding=EncodingDescriptor(
                    encoder=row[idx["encoder"]],
                    level_param=float(row[idx["level_param"]]),
                    q_step=float(row[idx["q_step"]]),
                ),
                mos=float(row[idx["mos"]]),
                provenance=row[prov_idx] if prov_idx is not None else MANUAL,
            ))
        return table


@dataclass(frozen=True)
class EncoderGrid:
    """Compression levels for one encoder and how levels map to q_step."""

    name: str
    kind: str  # "qp" or "lambda"
    levels: tuple[float, ...]
    lambda_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("qp", "lambda"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if len(self.levels) < 1:
            raise ValueError(f"{self.name}: empty level grid")
        if sorted(self.levels) != list(self.levels):
            raise ValueError(f"{self.name}: levels must be ascending")

    def qstep(self, level: float) -> float:
        if self.kind == "qp":
            return qp_to_qstep(self.name, level)
        return lambda_to_qstep(self.levels, level, self.lambda_scale)

    def descriptors(self) -> list[EncodingDescriptor]:
        return [EncodingDescriptor(self.name, lv, self.qstep(lv)) for lv in self.levels]

    @property
    def s_min(self) -> float:
        return min(self.qstep(lv) for lv in self.levels)


@dataclass
class Manifest:
    """Study manifest: content ids crossed with per-encoder level grids."""

    contents: list[str]
    encoders: list[EncoderGrid]

    def __post_init__(self) -> None:
        if not self.contents or not self.encoders:
            raise LabelingError("manifest needs at least one content and one encoder")
        if len(set(self.contents)) != len(self.contents):
            raise LabelingError("duplicate content ids in manifest")

    def grid_points(self) -> list[tuple[str, EncodingDescriptor]]:
        return [
            (cid, desc)
            for cid in self.contents
            for grid in self.encoders
            for desc in grid.descriptors()
        ]

    @property
    def total_videos(self) -> int:
        return len(self.contents) * sum(len(g.levels) for g in self.encoders)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        cfg = _io.load_config(path)
        encoders = [
            EncoderGrid(
                name=str(e["name"]),
                kind=str(e.get("kind", "qp")),
                levels=tuple(float(v) for v in e["levels"]),
                lambda_scale=float(e.get("lambda_scale", 1.0)),
            )
            for e in cfg["encoders"]
        ]
        return cls(contents=[str(c) for c in cfg["contents"]], encoders=encoders)


def paper_grids() -> list[EncoderGrid]:
    """The study's default encoder grids (four levels each)."""
    return [
        EncoderGrid("VVC", "qp", (32.0, 37.0, 42.0, 47.0)),
        EncoderGrid("AVS3", "qp", (39.0, 45.0, 51.0, 57.0)),
        EncoderGrid("HLVC", "lambda", (256.0, 512.0, 1024.0, 2048.0)),
    ]


@dataclass(frozen=True)
class DecayModel:
    """Fitted decay law for one (content, encoder) pair."""

    variant: str
    param: float
    content_id: str = ""
    encoder: str = ""
    s_min: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.param <= 0:
            raise ValueError(f"decay parameter must be positive, got {self.param}")
        if self.variant in ("QSTAR", "MA") and (self.s_min is None or self.s_min <= 0):
            raise ValueError(f"{self.variant} requires a positive s_min")


def predict_quality(model: DecayModel, q_step: float) -> float:
    """Evaluate the decay law at q_step, clamped to [0, 1]."""
    if q_step <= 0:
        raise ValueError(f"q_step must be positive, got {q_step}")
    if model.variant == "EXP":
        value = math.exp(-model.param * q_step)
    elif model.variant == "QSTAR":
        a = model.param
        value = -math.expm1(-a * model.s_min / q_step) / -math.expm1(-a)
    else:  # MA
        value = math.exp(model.param * (1.0 - q_step / model.s_min))
    return min(1.0, max(0.0, value))


def _qstar_quality(alpha: float, s: float, s_min: float) -> float:
    return -math.expm1(-alpha * s_min / s) / -math.expm1(-alpha)


def _bisect(fn, lo: float, hi: float, iterations: int = 200) -> float:
    flo = fn(lo)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= abs(mid) * 1e-15:
            break
    return 0.5 * (lo + hi)


def _golden_refine(objective, lo: float, hi: float, iterations: int = 200) -> float:
    """Golden-section minimization on [lo, hi]; deterministic and derivative-free."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(d)
        if b - a <= max(abs(a), 1e-300) * 1e-13:
            break
    return 0.5 * (a + b)


# Parameter search ranges for the coarse log-spaced sweep, per variant.
_SWEEP_RANGE = {"EXP": (1e-8, 1e2), "QSTAR": (1e-6, 7e2), "MA": (1e-8, 1e2)}
_SWEEP_POINTS = 600


def _clamped_mos(record: RatingRecord) -> float:
    return min(1.0, max(MOS_EPS, record.mos))


def _fit_single(record: RatingRecord, variant: str, s_min: float | None) -> float:
    s = record.encoding.q_step
    mos = _clamped_mos(record)
    if record.mos <= 0.0:
        raise FitError(f"mos 0 at q_step {s}: decay parameter undefined")
    if variant == "EXP":
        if mos >= 1.0:
            raise FitError(f"mos 1.0 at q_step {s}: zero decay is a degenerate anchor")
        return -math.log(mos) / s
    if s == s_min:
        raise FitError(f"anchor at s_min={s_min} cannot determine the {variant} parameter")
    if variant == "MA":
        if mos >= 1.0:
            raise FitError(f"mos 1.0 at q_step {s}: zero decay is a degenerate anchor")
        c = math.log(mos) / (1.0 - s / s_min)
        if c <= 0:
            raise FitError(f"anchor (s={s}, mos={mos}) implies non-positive parameter")
        return c
    # QSTAR: root of predict(alpha) - mos; quality at fixed s>s_min rises from
    # s_min/s (alpha -> 0) to 1 (alpha -> inf), so mos must lie in that interval.
    floor = s_min / s
    if not floor < mos < 1.0:
        raise FitError(
            f"QSTAR anchor (s={s}, mos={mos}) outside attainable range ({floor:.6g}, 1)"
        )

    def residual(alpha: float) -> float:
        return _qstar_quality(alpha, s, s_min) - mos

    lo, hi = _SWEEP_RANGE["QSTAR"][0], 1.0
    while residual(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise FitError(f"QSTAR anchor (s={s}, mos={mos}) needs an implausibly steep decay")
    return _bisect(residual, lo, hi)


def fit_decay(
    records: Sequence[RatingRecord],
    variant: str = "EXP",
    s_min: float | None = None,
) -> DecayModel:
    """Fit a decay law to the manual records of one (content, encoder) pair.

    A single record is solved exactly (closed form, or root isolation for
    QSTAR). Multiple records go through 1-D least squares on MOS residuals:
    a coarse log-spaced parameter sweep followed by golden-section refinement.

    For QSTAR/MA, pass s_min as the smallest q_step of the encoder's
    configured grid; it defaults to the smallest q_step among the records.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not records:
        raise FitError("no records to fit")
    pairs = {(r.content_id, r.encoding.encoder) for r in records}
    if len(pairs) != 1:
        raise FitError(f"records span multiple (content, encoder) pairs: {sorted(pairs)}")
    (content_id, encoder) = next(iter(pairs))
    if variant in ("QSTAR", "MA") and s_min is None:
        s_min = min(r.encoding.q_step for r in records)

    if len(records) == 1:
        param = _fit_single(records[0], variant, s_min)
        return DecayModel(variant=variant, param=param, content_id=content_id,
                          encoder=encoder, s_min=s_min)

    steps = np.array([r.encoding.q_step for r in records])
    targets = np.array([_clamped_mos(r) for r in records])

    def objective(param: float) -> float:
        model = DecayModel(variant=variant, param=param, content_id=content_id,
                           encoder=encoder, s_min=s_min)
        residuals = np.array([predict_quality(model, s) for s in steps]) - targets
        return float(residuals @ residuals)

    lo, hi = _SWEEP_RANGE[variant]
    sweep = np.geomspace(lo, hi, _SWEEP_POINTS)
    values = [objective(p) for p in sweep]
    best = int(np.argmin(values))
    if best == 0 or best == _SWEEP_POINTS - 1:
        raise FitError(
            f"{variant} least squares hit the sweep boundary (param ~ {sweep[best]:.3g}); "
            "data does not follow a positive decay"
        )
    param = _golden_refine(objective, sweep[best - 1], sweep[best + 1])
    return DecayModel(variant=variant, param=param, content_id=content_id,
                      encoder=encoder, s_min=s_min)


def infer_imos(
    models: dict[tuple[str, str], DecayModel],
    grid: Sequence[tuple[str, EncodingDescriptor]],
    manual: RatingTable,
) -> RatingTable:
    """Fill the full grid: MANUAL records pass through, the rest become INFERRED.

    Every grid point's (content, encoder) pair must have a fitted model.
    """
    table = RatingTable()
    for content_id, desc in grid:
        existing = manual.get((content_id, desc.encoder, desc.level_param))
        if existing is not None:
            table.add(existing)
            continue
        model = models.get((content_id, desc.encoder))
        if model is None:
            raise LabelingError(f"no decay model for pair ({content_id!r}, {desc.encoder!r})")
        table.add(RatingRecord(
            content_id=content_id,
            encoding=desc,
            mos=predict_quality(model, desc.q_step),
            provenance=INFERRED,
        ))
    return table


def fit_all_pairs(
    manual: RatingTable,
    variant: str = "EXP",
    s_min_by_encoder: dict[str, float] | None = None,
) -> dict[tuple[str, str], DecayModel]:
    """Fit one decay model per (content, encoder) pair from its manual records."""
    models = {}
    for pair, records in manual.manual_by_pair().items():
        s_min = (s_min_by_encoder or {}).get(pair[1])
        models[pair] = fit_decay(records, variant=variant, s_min=s_min)
    return models


@dataclass
class SessionPlan:
    """Which levels get manual ratings for each (content, encoder) pair."""

    anchors: dict[tuple[str, str], list[float]]
    n_manual: int
    n_total: int
    seed: int

    @property
    def workload_ratio(self) -> float:
        return self.n_manual / self.n_total


def plan_sessions(manifest: Manifest, anchors_per_pair: int = 1, seed: int = 0) -> SessionPlan:
    """Deterministic, seeded choice of anchor levels per (content, encoder) pair.

    Anchors are drawn from the middle of each level grid (extremes excluded)
    whenever enough middle levels exist; otherwise from the whole grid.
    """
    if anchors_per_pair < 1:
        raise ValueError(f"anchors_per_pair must be >= 1, got {anchors_per_pair}")
    min_levels = min(len(g.levels) for g in manifest.encoders)
    if anchors_per_pair > min_levels:
        raise ValueError(
            f"anchors_per_pair {anchors_per_pair} exceeds smallest grid ({min_levels} levels)"
        )
    rng = np.random.default_rng(seed)
    anchors: dict[tuple[str, str], list[float]] = {}
    n_manual = 0
    for content_id in manifest.contents:
        for grid in manifest.encoders:
            levels = list(grid.levels)
            middle = levels[1:-1] if len(levels) >= 3 else levels
            pool = middle if anchors_per_pair <= len(middle) else levels
            chosen = sorted(rng.choice(pool, size=anchors_per_pair, replace=False).tolist())
            anchors[(content_id, grid.name)] = chosen
            n_manual += anchors_per_pair
    return SessionPlan(anchors=anchors, n_manual=n_manual, n_total=manifest.total_videos, seed=seed)


def validate_semiauto(full_mos: RatingTable, semi: RatingTable) -> EvalReport:
    """PLCC/SRCC/KRCC/RMSE between a full subjective table and its semi-automatic twin."""
    if full_mos.keys() != semi.keys():
        missing = sorted(full_mos.keys() ^ semi.keys())[:5]
        raise LabelingError(f"tables do not share identical keys (e.g. {missing})")
    keys = sorted(full_mos.keys())
    reference = [full_mos.get(k).mos for k in keys]
    candidate = [semi.get(k).mos for k in keys]
    return EvalReport.from_pairs("semiauto-vs-mos", candidate, reference)


@dataclass
class VariantResult:
    variant: str
    plcc: float
    srcc: float
    krcc: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "plcc": None if math.isnan(self.plcc) else self.plcc,
            "srcc": None if math.isnan(self.srcc) else self.srcc,
            "krcc": None if math.isnan(self.krcc) else self.krcc,
            "error": self.error,
        }


def compare_variants(
    anchors: RatingTable,
    full_mos: RatingTable,
) -> list[VariantResult]:
    """Rank the three decay laws by PLCC of their inferred tables against full MOS.

    Fit errors are annotated on the affected variant rather than raised, so a
    law that cannot represent the anchors still appears in the report.
    """
    grid = [(r.content_id, r.encoding) for r in full_mos.records]
    s_min_by_encoder: dict[str, float] = {}
    for record in full_mos.records:
        enc = record.encoding.encoder
        s_min_by_encoder[enc] = min(
            s_min_by_encoder.get(enc, record.encoding.q_step), record.encoding.q_step
        )

    results = []
    nan = float("nan")
    for variant in VARIANTS:
        try:
            models = fit_all_pairs(anchors, variant=variant, s_min_by_encoder=s_min_by_encoder)
            table = infer_imos(models, grid, anchors)
            report = validate_semiauto(full_mos, table)
            results.append(VariantResult(variant, report.plcc, report.srcc, report.krcc))
        except (FitError, LabelingError) as exc:
            results.append(VariantResult(variant, nan, nan, nan, error=str(exc)))
    results.sort(key=lambda r: (math.isnan(r.plcc), -(r.plcc if not math.isnan(r.plcc) else 0.0)))
    return results
