"""F1 as a function of the decision threshold for the CH+CORR heatmap model.

Writes the full curve, the widest interval whose F1 stays within the
tolerance of the best value, and an SVG plot.

Usage: python3 scripts/threshold_sensitivity.py [--tolerance 0.1] [--seed N] [--out DIR] [--preset NAME]
"""

import argparse
from dataclasses import replace
from pathlib import Path

from gazecomp.config import PRESETS
from gazecomp.evaluation import stable_threshold_interval
from gazecomp.experiments import benchmark_for, evaluate_streams, score_split, train_variant
from gazecomp.reports import curve_rows, plot_f1_threshold, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tolerance", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--preset", default="default", choices=sorted(PRESETS))
    ap.add_argument("--out", default="runs/threshold_sensitivity")
    a = ap.parse_args()
    run = replace(PRESETS[a.preset]().with_overrides(seed=a.seed), stability_tolerance=a.tolerance)
    bench = benchmark_for(run)
    model = train_variant(run, bench.train).model
    streams = score_split(model, bench.test, (run.scoring,), run)[run.scoring]
    rep = evaluate_streams(bench.test, streams, run, run.model.F)
    stable = stable_threshold_interval(rep, a.tolerance)
    out = Path(a.out)
    cfg = run.to_dict()
    write_csv(out / "f1_threshold.csv", curve_rows(rep), cfg)
    write_csv(out / "stable_interval.csv",
              [{"tolerance": a.tolerance, "best_f1": rep.best_f1, "low": stable[0], "high": stable[1],
                "fraction": stable[2]}], cfg)
    plot_f1_threshold(out / "f1_threshold.svg", rep, cfg, stable)
    print(f"best F1 {rep.best_f1:.4f} at {rep.best_threshold:.4f}; F1 >= {1 - a.tolerance:.0%} of best on "
          f"[{stable[0]:.4f}, {stable[1]:.4f}] ({stable[2]:.1%} of the score range)")


if __name__ == "__main__":
    main()
