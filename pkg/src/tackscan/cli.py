"""Command-line front end.

Subcommands: simulate, ingest, features, train, predict, evaluate, map,
reproduce. Exit codes: 0 success, 1 validation/config error, 2 runtime
failure, 3 acceptance-threshold failure (reproduce only).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from . import dataset as ds
from .config import ConfigError, RunConfig, load_config_file, parse_config_text
from .modelfile import load_model
from .pipeline import (
    ThresholdFailure,
    run_evaluate,
    run_features,
    run_map,
    run_predict,
    run_reproduce,
    run_simulate,
    run_train,
)
from .scene import ValidationError
from .svm.solver import ConvergenceError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_THRESHOLD = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="config file (dotted keys)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", type=Path, default=Path("runs/out"), help="output directory")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    p.add_argument("--allow-train-eval", action="store_true",
                   help="permit evaluation on training traces")
    p.add_argument("-v", "--verbose", action="store_true")


def _build_config(args) -> RunConfig:
    maps = []
    if args.config is not None:
        maps.append(load_config_file(args.config))
    override_text = "\n".join(args.set)
    maps.append(parse_config_text(override_text, source="--set"))
    cfg = RunConfig(*maps)
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    return cfg


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tackscan",
        description="Simulate tack-coat GPR surveys and estimate emulsion "
        "proportioning with SVM/SVR models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a survey; write trace table + truth maps")
    _add_common(p)

    p = sub.add_parser("ingest", help="validate an external trace table; write a manifest")
    _add_common(p)
    p.add_argument("--trace-table", type=Path, required=True)
    p.add_argument("--metadata", type=Path, required=True)

    p = sub.add_parser("features", help="extract feature vectors from a trace table")
    _add_common(p)
    p.add_argument("--trace-table", type=Path, required=True)
    p.add_argument("--metadata", type=Path, required=True)

    p = sub.add_parser("train", help="split, grid-search, and fit the configured task")
    _add_common(p)
    p.add_argument("--features", type=Path, required=True, help="features CSV from 'features'")
    p.add_argument("--trace-table", type=Path, default=None,
                   help="trace table behind the features (records its checksum)")

    p = sub.add_parser("predict", help="predict every trace of a dataset")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--trace-table", type=Path, required=True)
    p.add_argument("--metadata", type=Path, required=True)

    p = sub.add_parser("evaluate", help="metrics on withheld traces of a dataset")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--trace-table", type=Path, required=True)
    p.add_argument("--metadata", type=Path, required=True)
    p.add_argument("--subset", choices=("test", "train", "all"), default="test")

    p = sub.add_parser("map", help="assemble predictions into map exports")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--trace-table", type=Path, required=True)
    p.add_argument("--metadata", type=Path, required=True)

    p = sub.add_parser("reproduce", help="run a full study preset end to end")
    _add_common(p)
    p.add_argument("study", choices=("numerical-study", "carousel", "vendee"))
    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------
def _cmd_simulate(args) -> int:
    cfg = _build_config(args)
    manifest = run_simulate(cfg, args.out)
    print(f"simulated {manifest.n_traces} traces (seed {cfg.seed_for('acquisition.seed')})")
    print(f"trace table: {manifest.trace_table}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    manifest = ds.ingest(args.trace_table, args.metadata)
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / "manifest.json"
    manifest.save(out)
    kind = "labeled" if manifest.has_labels else "prediction-only"
    print(f"ingested {manifest.n_traces} traces ({kind}); manifest: {out}")
    return EXIT_OK


def _cmd_features(args) -> int:
    cfg = _build_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / "features.csv"
    run_features(cfg, args.trace_table, args.metadata, out)
    print(f"features: {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    task = cfg.get("svm.task")
    model_out = args.out / f"{task}.json"
    log_out = args.out / f"{task}_search_log.txt"
    checksum = ds.file_checksum(args.trace_table) if args.trace_table else None
    run_train(cfg, args.features, model_out, log_out, trace_checksum=checksum)
    print(f"model: {model_out}")
    print(f"search log: {log_out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    bundle = load_model(args.model)
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / f"{bundle.task}_predictions.csv"
    pred = run_predict(bundle, args.trace_table, args.metadata, out)
    print(f"predicted {pred.x.size} traces -> {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    if args.subset != "test" and not args.allow_train_eval:
        raise ValidationError(
            f"evaluating subset {args.subset!r} includes training traces; "
            "pass --allow-train-eval to permit the leakage"
        )
    cfg = _build_config(args)
    bundle = load_model(args.model)
    from .pipeline import predict_dataset

    pred = predict_dataset(bundle, args.trace_table, args.metadata)
    meta = ds.read_metadata(args.metadata)
    boundaries = [float(b) for b in meta.get("scene.boundaries", "").split(",") if b]
    args.out.mkdir(parents=True, exist_ok=True)
    txt = args.out / f"{bundle.task}_report.txt"
    kv = args.out / f"{bundle.task}_report.kv"
    report = run_evaluate(
        pred, txt, kv,
        subset=args.subset,
        exclusion_margin=cfg.get("eval.exclusion_margin"),
        boundaries=boundaries,
    )
    sys.stdout.write(report.to_text())
    print(f"report: {txt}")
    return EXIT_OK


def _cmd_map(args) -> int:
    bundle = load_model(args.model)
    from .pipeline import predict_dataset

    pred = predict_dataset(bundle, args.trace_table, args.metadata)
    meta = ds.read_metadata(args.metadata)
    args.out.mkdir(parents=True, exist_ok=True)
    map_csv = args.out / f"{bundle.task}_map.csv"
    map_pgm = args.out / f"{bundle.task}_map.pgm"
    run_map(pred, meta, map_csv, map_pgm)
    print(f"maps: {map_csv}, {map_pgm}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    overrides = dict(parse_config_text("\n".join(args.set), source="--set"))
    if args.config is not None:
        file_map = load_config_file(args.config)
        file_map.update(overrides)
        overrides = file_map
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    ok, summary = run_reproduce(args.study, args.out, overrides)
    sys.stdout.write(summary)
    return EXIT_OK if ok else EXIT_THRESHOLD


COMMANDS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "features": _cmd_features,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "map": _cmd_map,
    "reproduce": _cmd_reproduce,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ThresholdFailure as exc:
        print(f"threshold failure: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (ConvergenceError, RuntimeError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
