"""Detection quality as a function of the number of predicted frames.

Trains one CH+CORR model per prediction length n (window F = 2n) on the
one-class benchmark and reports heatmap-scored test AUC / best F1.

Usage: python3 scripts/prediction_length.py [--lengths 2 4 6] [--seed N] [--out DIR] [--preset NAME]
"""

import argparse
from pathlib import Path

from gazecomp.config import PRESETS
from gazecomp.experiments import benchmark_for, prediction_length_ablation
from gazecomp.reports import write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lengths", type=int, nargs="+")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--preset", default="default", choices=sorted(PRESETS))
    ap.add_argument("--out", default="runs/prediction_length")
    a = ap.parse_args()
    run = PRESETS[a.preset]().with_overrides(seed=a.seed)
    rows = prediction_length_ablation(run, benchmark_for(run), a.lengths)
    write_csv(Path(a.out) / "prediction_length.csv", rows, run.to_dict())
    for r in rows:
        print(f"n={r['prediction_length']} F={r['F']}: auc={r['auc']:.4f} best_f1={r['best_f1']:.4f}")


if __name__ == "__main__":
    main()
