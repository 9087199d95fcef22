"""Command-line entry point.

Subcommands: fidelity, content, label, train, eval, predict. Structured
outputs are schema-versioned JSON/CSV written atomically; reruns with the
same inputs and seed produce byte-identical files (no timestamps). Errors
print one machine-readable JSON object to stderr; exit codes are 0 (ok),
1 (input error), 2 (internal error).

Flags --seed, --jobs and --out fall back to the VQLAB_SEED, VQLAB_JOBS and
VQLAB_OUT environment variables when not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import _io, content, fidelity, harness, labeling
from .vio import Y4MError, read_y4m_file

ENV_PREFIX = "VQLAB_"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

_INPUT_ERRORS = (
    ValueError,
    KeyError,
    TypeError,
    OSError,
    Y4MError,
    harness.DatasetError,
    labeling.LabelingError,
    labeling.FitError,
)


def _env_default(name: str, fallback):
    return os.environ.get(ENV_PREFIX + name, fallback)


def _emit_error(exc: BaseException) -> None:
    payload = {
        "schema": _io.schema_tag("error"),
        "error": type(exc).__name__,
        "message": str(exc),
    }
    print(json.dumps(payload), file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_videos(paths, jobs: int):
    def read(path: str):
        return read_y4m_file(path, content_id=Path(path).stem)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(read, paths))
    return [read(p) for p in paths]


# -- subcommands ---------------------------------------------------------------


def cmd_fidelity(args) -> int:
    ref = read_y4m_file(args.ref, content_id=Path(args.ref).stem)
    dist = read_y4m_file(args.dist, content_id=Path(args.dist).stem)
    score = fidelity.video_fidelity(ref, dist, metric=args.metric)
    out = _out_dir(args)
    rows = [[i, repr(v)] for i, v in enumerate(score.per_frame)]
    rows.append(["video", repr(score.video_score)])
    _io.write_csv(out / "fidelity.csv", "fidelity", ["frame", args.metric], rows)
    print(f"{args.metric} video score: {score.video_score:.6f}")
    return EXIT_OK


def cmd_content(args) -> int:
    out = _out_dir(args)
    rows = []
    failures = []
    for path in args.videos:
        try:
            video = read_y4m_file(path, content_id=Path(path).stem)
            descriptor = content.describe(video)
            rows.append([descriptor.content_id, repr(descriptor.si), repr(descriptor.ti)])
        except _INPUT_ERRORS as exc:
            failures.append((path, exc))
    _io.write_csv(out / "content.csv", "content", ["content_id", "si", "ti"], rows)
    for path, exc in failures:
        _emit_error(exc)
    return EXIT_INPUT if failures else EXIT_OK


def cmd_label(args) -> int:
    manifest = labeling.Manifest.load(args.manifest)
    manual = labeling.RatingTable.read_csv(args.ratings)

    covered = {(r.content_id, r.encoding.encoder) for r in manual if r.provenance == labeling.MANUAL}
    required = {(cid, grid.name) for cid in manifest.contents for grid in manifest.encoders}
    uncovered = sorted(required - covered)
    if uncovered:
        shown = ", ".join(f"({c}, {e})" for c, e in uncovered[:10])
        raise labeling.LabelingError(
            f"{len(uncovered)} (content, encoder) pair(s) lack manual ratings: {shown}"
        )

    s_min_by_encoder = {grid.name: grid.s_min for grid in manifest.encoders}
    models = labeling.fit_all_pairs(manual, variant=args.variant,
                                    s_min_by_encoder=s_min_by_encoder)
    table = labeling.infer_imos(models, manifest.grid_points(), manual)
    out = _out_dir(args)
    table.write_csv(out / "imos.csv")
    print(f"wrote {len(table)} records ({len(manual)} manual)")

    if args.compare:
        if not args.full_mos:
            raise ValueError("--compare needs --full-mos CSV with the full subjective table")
        full = labeling.RatingTable.read_csv(args.full_mos)
        results = labeling.compare_variants(manual, full)
        _io.write_json(out / "variants.json",
                       {"variants": [r.to_dict() for r in results]}, "variant-comparison")
        best = results[0]
        print(f"best variant by PLCC: {best.variant}")
    return EXIT_OK


def _model_config(raw: dict):
    from . import stnet

    presets = {
        "desk": stnet.desk_config,
        "paper": stnet.paper_config,
        "tiny": stnet.tiny_config,
    }
    spec = dict(raw or {})
    preset = spec.pop("preset", "desk")
    if preset not in presets:
        raise ValueError(f"unknown model preset {preset!r}; choose from {sorted(presets)}")
    overrides = dict(spec.pop("overrides", {}))
    if spec:
        raise ValueError(f"unknown model config keys: {sorted(spec)}")
    if "blocks" in overrides:
        overrides["blocks"] = tuple(tuple(b) for b in overrides["blocks"])
    if "stem_stride" in overrides:
        overrides["stem_stride"] = tuple(overrides["stem_stride"])
    return presets[preset](**overrides)


def _train_config(raw: dict, seed: int):
    from . import stnet

    spec = dict(raw or {})
    spec.setdefault("seed", seed)
    return stnet.TrainConfig(**spec)


def _experiment_setup(args):
    config = _io.load_config(args.config)
    dataset = harness.DatasetManifest.load(
        Path(args.config).parent / config["dataset"]
        if not Path(config["dataset"]).is_absolute() else config["dataset"]
    )
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    model_config = _model_config(config.get("model", {}))
    train_config = _train_config(config.get("train", {}), seed)
    return config, dataset, model_config, train_config, seed


def cmd_train(args) -> int:
    from . import stnet

    config, dataset, model_config, train_config, _ = _experiment_setup(args)
    harness.check_assets(dataset)
    harness.normalize_labels(dataset)
    videos = [
        (read_y4m_file(item.path, content_id=item.content_id), item.mos)
        for item in dataset.items
    ]
    model = stnet.train_two_stage(videos, model_config, train_config)
    out = _out_dir(args)
    stnet.save_checkpoint(model, out / "checkpoint")
    for stage, curve in model.training_log.items():
        _io.write_csv(
            out / f"loss_{stage}.csv", "loss-curve", ["step", "loss"],
            [[i, repr(v)] for i, v in enumerate(curve)],
        )
    final = {stage: curve[-1] for stage, curve in model.training_log.items() if curve}
    print(f"trained on {len(videos)} videos; final losses: {final}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config, dataset, model_config, train_config, seed = _experiment_setup(args)
    split_spec = dict(config.get("split", {}))
    kind = split_spec.get("kind", "kfold")
    split_seed = int(split_spec.get("seed", seed))
    if kind == "kfold":
        plan = harness.make_kfold(dataset.content_ids, int(split_spec.get("k", 5)), split_seed)
    elif kind == "holdout":
        plan = harness.make_holdout(
            dataset.content_ids, float(split_spec.get("test_fraction", 0.2)), split_seed
        )
    else:
        raise ValueError(f"unknown split kind {kind!r}")
    reports = harness.run_experiment(
        dataset, model_config, plan, train_config, experiment_id=dataset.name
    )
    out = _out_dir(args)
    harness.write_reports(reports, out)
    summary = reports[-1]
    print(
        f"{len(reports) - 1} fold(s): mean PLCC {summary.plcc:.4f}, "
        f"SRCC {summary.srcc:.4f}, KRCC {summary.krcc:.4f}, RMSE {summary.rmse:.4f}"
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    from . import stnet

    model = stnet.load_checkpoint(args.checkpoint)
    rows = []
    for path in args.videos:
        video = read_y4m_file(path, content_id=Path(path).stem)
        score = stnet.predict_video_quality(video, model)
        rows.append([Path(path).stem, repr(score)])
        print(f"{path}\t{score:.6f}")
    if args.out:
        out = _out_dir(args)
        _io.write_csv(out / "predictions.csv", "predictions", ["content_id", "score"], rows)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqlab",
        description="Compressed-video quality laboratory: metrics, labeling, training.",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help=f"random seed (env {ENV_PREFIX}SEED)")
    parser.add_argument("--jobs", type=int, default=None,
                        help=f"parallel workers for per-file work (env {ENV_PREFIX}JOBS)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", default=None, help=f"output directory (env {ENV_PREFIX}OUT)")

    p = sub.add_parser("fidelity", help="full-reference metric between two Y4M files")
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--metric", default="psnr", choices=["psnr", "ssim", "msssim"])
    add_out(p)
    p.set_defaults(func=cmd_fidelity, needs_out=True)

    p = sub.add_parser("content", help="SI/TI descriptors for videos")
    p.add_argument("videos", nargs="+")
    add_out(p)
    p.set_defaults(func=cmd_content, needs_out=True)

    p = sub.add_parser("label", help="fit decay laws and infer the full rating table")
    p.add_argument("--manifest", required=True, help="content x encoder grid (JSON/TOML)")
    p.add_argument("--ratings", required=True, help="manual ratings CSV")
    p.add_argument("--variant", default="EXP", choices=list(labeling.VARIANTS))
    p.add_argument("--compare", action="store_true",
                   help="rank all decay variants against --full-mos")
    p.add_argument("--full-mos", default=None, help="full subjective table CSV")
    add_out(p)
    p.set_defaults(func=cmd_label, needs_out=True)

    p = sub.add_parser("train", help="two-stage training on a dataset manifest")
    p.add_argument("--config", required=True, help="experiment config (JSON/TOML)")
    add_out(p)
    p.set_defaults(func=cmd_train, needs_out=True)

    p = sub.add_parser("eval", help="split-protocol evaluation with per-fold reports")
    p.add_argument("--config", required=True, help="experiment config (JSON/TOML)")
    add_out(p)
    p.set_defaults(func=cmd_eval, needs_out=True)

    p = sub.add_parser("predict", help="score videos with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("videos", nargs="+")
    add_out(p)
    p.set_defaults(func=cmd_predict, needs_out=False)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.seed is None:
        env_seed = _env_default("SEED", None)
        args.seed = int(env_seed) if env_seed is not None else None
    if args.jobs is None:
        args.jobs = int(_env_default("JOBS", "1"))
    if getattr(args, "out", None) is None:
        args.out = _env_default("OUT", None)
        if args.out is None and args.needs_out:
            _emit_error(ValueError("--out is required (or set VQLAB_OUT)"))
            return EXIT_INPUT

    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        _emit_error(exc)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive internal-error path
        _emit_error(exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
