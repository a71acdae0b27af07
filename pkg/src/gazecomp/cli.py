"""Command-line interface.

Subcommands: generate, train, score, eval, sweep, report.  Each writes into
``--out``; outputs are staged in a hidden directory and moved into place
only when the command succeeds.  Exit codes: 0 success, 1 runtime error
(a JSON object on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PRESETS, load_config
from .errors import ConfigMismatchError, GazeCompError
from .evaluation import stable_threshold_interval, threshold_sweep
from .experiments import (
    ablation_grid,
    analysis_stats,
    benchmark_for,
    evaluate_streams,
    prediction_length_ablation,
    score_split,
    train_variant,
)
from .pipeline import ScoreStream, pooled_pairs
from .reports import (
    curve_rows,
    plot_action_types,
    plot_f1_threshold,
    plot_histograms,
    plot_roc,
    write_csv,
)
from .scoring import SCORING_FUNCTIONS
from .sessionio import atomic_write_text, dumps_json, read_manifest, read_split, write_benchmark
from .synthetic import Benchmark, BenchmarkConfig
from .model import FUSION_MODES

log = logging.getLogger("gazecomp")

LOG_ENV = "GAZECOMP_LOG"


def _common(p):
    p.add_argument("--config", help="JSON/YAML config, or any artifact that embeds one")
    p.add_argument("--preset", choices=sorted(PRESETS), default="default")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="runs/default", help="output directory")
    p.add_argument("--benchmark", help="benchmark directory (default: OUT/benchmark)")
    p.add_argument("--checkpoint", help="checkpoint path (default: OUT/model.gzck)")
    p.add_argument("--fusion-mode", choices=FUSION_MODES)
    p.add_argument("--scoring", choices=SCORING_FUNCTIONS)
    p.add_argument("--stride", type=int)
    p.add_argument("--F", type=int, dest="F", help="window length (even)")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")


def build_parser():
    parser = argparse.ArgumentParser(prog="gazecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gazecomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "generate": "write the synthetic benchmark and its manifest",
        "train": "train a model; writes a checkpoint and loss curve",
        "score": "write per-session score streams",
        "eval": "write a metrics report",
        "sweep": "fusion x scoring ablation grid and prediction-length ablation",
        "report": "CSV tables and SVG plots",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        _common(p)
        if name == "sweep":
            p.add_argument("--skip-lengths", action="store_true", help="skip the prediction-length ablation")
    return parser


def resolve_config(args):
    run = load_config(args.config) if args.config else PRESETS[args.preset]()
    return run.with_overrides(seed=args.seed, fusion_mode=args.fusion_mode, F=args.F,
                              scoring=args.scoring, stride=args.stride)


def stamp(run):
    return {"tool_version": __version__, "config": run.to_dict()}


def _merge(src, dest):
    for item in sorted(src.iterdir()):
        target = dest / item.name
        if item.is_dir() and target.is_dir():
            _merge(item, target)
        else:
            if target.is_dir():
                shutil.rmtree(target)
            os.replace(item, target)


@contextmanager
def staging(out):
    """Yield a scratch directory; on success its entries replace those in ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        yield stage
        _merge(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _paths(args):
    out = Path(args.out)
    bench = Path(args.benchmark) if args.benchmark else out / "benchmark"
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.gzck"
    return out, bench, ckpt


def _load_benchmark(path, run, splits):
    manifest = read_manifest(path)
    stored = BenchmarkConfig.from_dict(manifest["config"])
    if stored != run.benchmark:
        a, b = stored.to_dict(), run.benchmark.to_dict()
        diff = ", ".join(f"{k}: benchmark={a[k]!r} runtime={b[k]!r}" for k in sorted(a) if a[k] != b[k])
        raise ConfigMismatchError(f"{path}: benchmark config differs from runtime config ({diff})")
    expected_seed = run.seed_for("benchmark")
    if manifest.get("seed") != expected_seed:
        raise ConfigMismatchError(
            f"{path}: benchmark was generated with seed {manifest.get('seed')}, runtime config implies "
            f"{expected_seed} (root seed {run.seed})"
        )
    data = {s: read_split(path, s) if s in splits else [] for s in ("train", "val", "test")}
    return Benchmark(data["train"], data["val"], data["test"], manifest)


def _load_model(ckpt, run):
    model, _ = load_checkpoint(ckpt, expected_config=run.model)
    return model


def cmd_generate(args, run, stage):
    _, bench_dir, _ = _paths(args)
    bench = benchmark_for(run)
    extra = {"tool_version": __version__, "run_config": run.to_dict()}
    if args.benchmark:  # explicit location outside the run directory
        with staging(bench_dir.parent) as s2:
            write_benchmark(bench, s2 / bench_dir.name, extra)
    else:
        write_benchmark(bench, stage / "benchmark", extra)
    return {"benchmark": str(bench_dir), "sessions": bench.manifest["sessions"]}


def cmd_train(args, run, stage):
    _, bench_dir, ckpt = _paths(args)
    bench = _load_benchmark(bench_dir, run, ("train",))
    res = train_variant(run, bench.train)
    cfg = run.to_dict()
    write_csv(stage / "loss_curve.csv", [{"step": i + 1, "loss": v} for i, v in enumerate(res.step_losses)],
              cfg, ["step", "loss"])
    write_csv(stage / "epoch_losses.csv", [{"epoch": i + 1, "loss": v} for i, v in enumerate(res.epoch_losses)],
              cfg, ["epoch", "loss"])
    extra = {"run_config": cfg, "epoch_losses": res.epoch_losses}
    save_checkpoint(ckpt if args.checkpoint else stage / "model.gzck", res.model, extra)
    return {"checkpoint": str(ckpt), "final_loss": res.epoch_losses[-1] if res.epoch_losses else None}


def _streams(args, run, split):
    _, bench_dir, ckpt = _paths(args)
    model = _load_model(ckpt, run)
    bench = _load_benchmark(bench_dir, run, (split,))
    sessions = bench.split(split)
    return sessions, score_split(model, sessions, (run.scoring,), run)[run.scoring]


def _streams_doc(run, split, streams):
    return {**stamp(run), "split": split, "scoring": run.scoring, "streams": [s.to_dict() for s in streams]}


def cmd_score(args, run, stage):
    _, streams = _streams(args, run, args.split)
    rel = Path("scores") / f"{run.scoring}-{args.split}.json"
    (stage / rel).parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(stage / rel, dumps_json(_streams_doc(run, args.split, streams)))
    n = sum(len(s.scored()) for s in streams)
    return {"scores": str(Path(args.out) / rel), "scored_timesteps": n}


def _evaluate(args, run):
    sessions, streams = _streams(args, run, args.split)
    report = evaluate_streams(sessions, streams, run, run.model.F)
    return sessions, streams, report


def cmd_eval(args, run, stage):
    _, _, report = _evaluate(args, run)
    doc = {**stamp(run), "split": args.split, "scoring": run.scoring, "report": report.to_dict()}
    atomic_write_text(stage / "metrics.json", dumps_json(doc))
    return report.summary()


def cmd_sweep(args, run, stage):
    _, bench_dir, _ = _paths(args)
    bench = _load_benchmark(bench_dir, run, ("train", "test"))
    grid = ablation_grid(run, bench)
    cols = ["fusion", "scoring", "auc", "best_f1", "precision_at_best_f1", "recall_at_best_f1",
            "best_threshold", "n_positive", "n_negative"]
    write_csv(stage / "ablation.csv", grid.rows(), run.to_dict(), cols)
    doc = {**stamp(run), "cells": [{"fusion": c.fusion, "scoring": c.scoring, "report": c.report.to_dict()}
                                   for c in grid.cells]}
    atomic_write_text(stage / "ablation.json", dumps_json(doc))
    out = {"cells": len(grid.cells)}
    if not args.skip_lengths:
        rows = prediction_length_ablation(run, bench)
        write_csv(stage / "prediction_length.csv", rows, run.to_dict(),
                  ["prediction_length", "F", "scoring"] + cols[2:])
        out["prediction_lengths"] = [r["prediction_length"] for r in rows]
    return out


def cmd_report(args, run, stage):
    out, bench_dir, ckpt = _paths(args)
    cached = out / "scores" / f"{run.scoring}-{args.split}.json"
    sessions = None
    if cached.exists():
        doc = json.loads(cached.read_text())
        if doc.get("config") == run.to_dict():
            bench = _load_benchmark(bench_dir, run, (args.split,))
            sessions = bench.split(args.split)
            streams = [ScoreStream.from_dict(d) for d in doc["streams"]]
    if sessions is None:
        sessions, streams = _streams(args, run, args.split)
    F = run.model.F
    scores, labels = pooled_pairs(sessions, streams, run.label_mode, F)
    report = threshold_sweep(scores, labels)
    stable = stable_threshold_interval(report, run.stability_tolerance)
    stats = analysis_stats(run, sessions, streams, report, F)
    cfg = run.to_dict()
    summary = {**report.summary(), "stable_low": stable[0], "stable_high": stable[1],
               "stable_fraction": stable[2]}
    write_csv(stage / "metrics.csv", [summary], cfg)
    write_csv(stage / "f1_threshold.csv", curve_rows(report), cfg)
    write_csv(stage / "action_types.csv",
              [{"action_type": a, **v} for a, v in stats["per_action"].items()], cfg,
              ["action_type", "sessions", "success_rate"])
    atomic_write_text(stage / "analysis.json", dumps_json({**stamp(run), **stats}))
    plot_f1_threshold(stage / "f1_threshold.svg", report, cfg, stable)
    if report.n_positive and report.n_negative:
        plot_roc(stage / "roc.svg", scores, labels, cfg, report.auc)
    plot_histograms(stage / "score_hist.svg", scores, labels, cfg)
    plot_action_types(stage / "action_types.svg", stats["per_action"], cfg)
    return {**summary, "point_biserial": stats["point_biserial"], "cramers_v": stats["cramers_v"]}


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _fail(exc):
    kind = getattr(exc, "kind", type(exc).__name__)
    err = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "offset", None) is not None:
        err["offset"] = exc.offset
    if getattr(exc, "epoch", None) is not None:
        err["epoch"] = exc.epoch
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return 1


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        run = resolve_config(args)
        with staging(args.out) as stage:
            result = COMMANDS[args.command](args, run, stage)
    except (GazeCompError, OSError, ValueError, KeyError, RuntimeError) as exc:
        log.debug("command failed", exc_info=True)
        return _fail(exc)
    print(json.dumps({"command": args.command, **result}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
