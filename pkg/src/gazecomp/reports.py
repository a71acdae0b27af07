"""CSV tables and SVG plots.

CSV files start with ``# version: ...`` and ``# config: <json>`` comment
lines so every table carries the run that produced it.  SVGs are rendered
with a fixed hash salt and no timestamp, which makes them byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .evaluation import roc_curve  # noqa: E402
from .sessionio import atomic_write_bytes, atomic_write_text  # noqa: E402

plt.rcParams["svg.hashsalt"] = "gazecomp"
plt.rcParams["svg.fonttype"] = "none"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _parse(v):
    if v == "":
        return None
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def csv_text(rows, config=None, columns=None):
    """Rows (dicts) to CSV with provenance comments; floats use repr for exact roundtrip."""
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    buf.write(f"# version: {__version__}\n")
    buf.write(f"# config: {json.dumps(config or {}, sort_keys=True, separators=(',', ':'))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, config=None, columns=None):
    atomic_write_text(path, csv_text(rows, config, columns))


def parse_csv(text):
    """Inverse of :func:`csv_text`: returns (rows, config, version)."""
    config, version = {}, None
    body = []
    for line in text.splitlines():
        if line.startswith("# version: "):
            version = line[len("# version: "):]
        elif line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        else:
            body.append(line)
    reader = csv.reader(body)
    try:
        header = next(reader)
    except StopIteration:
        return [], config, version
    rows = [{k: _parse(v) for k, v in zip(header, rec)} for rec in reader]
    return rows, config, version


def read_csv(path):
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


def curve_rows(report):
    return [{"threshold": float(t), "f1": float(f), "precision": float(p), "recall": float(r)}
            for t, f, p, r in zip(report.thresholds, report.f1_curve, report.precision_curve,
                                  report.recall_curve)]


def _save(fig, path, config):
    buf = io.BytesIO()
    meta = {"Date": None, "Creator": f"gazecomp {__version__}",
            "Description": json.dumps(config or {}, sort_keys=True, separators=(",", ":"))}
    fig.savefig(buf, format="svg", metadata=meta)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_f1_threshold(path, report, config=None, stable=None):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    th = report.thresholds
    finite = np.isfinite(th)
    ax.step(th[finite], report.f1_curve[finite], where="post", label="F1")
    ax.step(th[finite], report.precision_curve[finite], where="post", lw=0.8, label="precision")
    ax.step(th[finite], report.recall_curve[finite], where="post", lw=0.8, label="recall")
    ax.axvline(report.best_threshold, color="k", ls=":", lw=0.8)
    if stable is not None and stable[1] > stable[0]:
        ax.axvspan(stable[0], stable[1], color="tab:green", alpha=0.12, label="within 10% of best")
    ax.set_xlabel("threshold")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path, config)


def plot_roc(path, scores, labels, config=None, auc=None):
    fpr, tpr, _ = roc_curve(scores, labels)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, label="model" if auc is None else f"AUC {auc:.3f}")
    ax.plot([0, 1], [0, 1], color="grey", ls="--", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, path, config)


def plot_histograms(path, scores, labels, config=None, bins=30):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    lo, hi = (float(scores.min()), float(scores.max())) if scores.size else (0.0, 1.0)
    if not hi > lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    for lab, name in ((0, "correct"), (1, "mistake")):
        sel = scores[labels == lab]
        if sel.size:
            ax.hist(sel, bins=edges, alpha=0.55, density=True, label=f"{name} (n={sel.size})")
    ax.set_xlabel("mistake score")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, config)


def plot_action_types(path, per_action, config=None):
    names = sorted(per_action)
    rates = [per_action[n]["success_rate"] for n in names]
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(names) + 1), 3.5))
    ax.bar(range(len(names)), rates, color="tab:blue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("session success rate")
    fig.tight_layout()
    _save(fig, path, config)


def finite_or_none(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x
