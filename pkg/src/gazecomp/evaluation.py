"""Detection metrics and the analysis statistics.

Mistakes are the positive class.  A timestep is flagged when its score is
strictly greater than the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError


def _pairs(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return s, y


def roc_curve(scores, labels):
    """ROC points (fpr, tpr) over decreasing distinct thresholds, from (0, 0)."""
    s, y = _pairs(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]  # final index of each tie group
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0, tps] / n_pos
    fpr = np.r_[0, fps] / n_neg
    return fpr, tpr, np.r_[np.inf, s[last]]


def roc_auc(scores, labels):
    """Area under the ROC curve by trapezoids; ties contribute one half."""
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


@dataclass
class MetricsReport:
    auc: float
    best_f1: float
    precision_at_best_f1: float
    recall_at_best_f1: float
    best_threshold: float
    n_positive: int
    n_negative: int
    thresholds: np.ndarray = field(repr=False, default=None)
    f1_curve: np.ndarray = field(repr=False, default=None)
    precision_curve: np.ndarray = field(repr=False, default=None)
    recall_curve: np.ndarray = field(repr=False, default=None)

    def summary(self):
        return {
            "auc": self.auc,
            "best_f1": self.best_f1,
            "precision_at_best_f1": self.precision_at_best_f1,
            "recall_at_best_f1": self.recall_at_best_f1,
            "best_threshold": self.best_threshold,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
        }

    def to_dict(self):
        d = self.summary()
        d["curve"] = {
            "threshold": self.thresholds.tolist(),
            "f1": self.f1_curve.tolist(),
            "precision": self.precision_curve.tolist(),
            "recall": self.recall_curve.tolist(),
        }
        return d

    @classmethod
    def from_dict(cls, d):
        c = d.get("curve") or {}
        arr = lambda k: np.asarray(c[k], dtype=np.float64) if k in c else None  # noqa: E731
        return cls(d["auc"], d["best_f1"], d["precision_at_best_f1"], d["recall_at_best_f1"],
                   d["best_threshold"], d["n_positive"], d["n_negative"],
                   arr("threshold"), arr("f1"), arr("precision"), arr("recall"))


def f1_at(scores, labels, theta):
    """(f1, precision, recall) when flagging scores > theta; 0/0 counts as 0."""
    s, y = _pairs(scores, labels)
    pred = s > theta
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return f1, precision, recall


def threshold_sweep(scores, labels):
    """F1/precision/recall at every distinct score used as threshold.

    A threshold just below the minimum score is included so that "flag
    everything" is a candidate.  The best point maximizes F1; ties go to
    higher precision, then lower threshold.  AUC is NaN for one-class input.
    """
    s, y = _pairs(scores, labels)
    if s.size == 0:
        raise ValueError("threshold sweep needs at least one pair")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    order = np.argsort(s, kind="mergesort")
    ss, yy = s[order], y[order]
    distinct = np.r_[np.flatnonzero(np.diff(ss)), len(ss) - 1]
    thetas = np.r_[np.nextafter(ss[0], -np.inf), ss[distinct]]
    # positives / flagged with score > theta
    pos_le = np.r_[0, np.cumsum(yy)[distinct]]
    cnt_le = np.r_[0, distinct + 1]
    tp = n_pos - pos_le
    flagged = len(ss) - cnt_le
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(flagged > 0, tp / np.maximum(flagged, 1), 0.0)
        recall = tp / n_pos if n_pos else np.zeros_like(tp, dtype=float)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1), 0.0)
    best = max(range(len(thetas)), key=lambda i: (f1[i], precision[i], -thetas[i]))
    try:
        auc = roc_auc(s, y)
    except UndefinedMetricError:
        auc = float("nan")
    return MetricsReport(
        auc=auc,
        best_f1=float(f1[best]),
        precision_at_best_f1=float(precision[best]),
        recall_at_best_f1=float(recall[best]),
        best_threshold=float(thetas[best]),
        n_positive=n_pos,
        n_negative=n_neg,
        thresholds=thetas.astype(np.float64),
        f1_curve=f1.astype(np.float64),
        precision_curve=precision.astype(np.float64),
        recall_curve=recall.astype(np.float64),
    )


def stable_threshold_interval(report, tolerance=0.1):
    """Longest threshold interval where F1 stays within ``tolerance`` of best.

    F1 is a step function of the threshold: the value computed at
    ``thresholds[i]`` holds on [thresholds[i], thresholds[i+1]).  Returns
    (low, high, fraction of the score range).
    """
    th, f1 = report.thresholds, report.f1_curve
    if len(th) < 2:
        return (float(th[0]), float(th[0]), 0.0)
    floor = (1.0 - tolerance) * report.best_f1
    ok = f1[:-1] >= floor  # last threshold flags nothing and has no extent
    lo_score, hi_score = th[1], th[-1]
    span = hi_score - lo_score
    best = (th[0], th[0], 0.0)
    i = 0
    n = len(ok)
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and ok[j + 1]:
            j += 1
        a = max(th[i], lo_score)
        b = th[j + 1]
        length = b - a
        frac = length / span if span > 0 else 0.0
        if frac > best[2]:
            best = (float(a), float(b), float(frac))
        i = j + 1
    return best


def point_biserial(continuous, binary):
    """(M1 - M0) / s_n * sqrt(p q) with the population standard deviation."""
    x = np.asarray(continuous, dtype=np.float64).ravel()
    b = np.asarray(binary).ravel().astype(np.int64)
    if x.shape != b.shape:
        raise ValueError("inputs differ in length")
    if b.min() == b.max():
        raise UndefinedMetricError("point-biserial correlation needs both classes")
    sn = x.std()
    if sn == 0:
        raise UndefinedMetricError("continuous variable has zero variance")
    m1 = x[b == 1].mean()
    m0 = x[b == 0].mean()
    p = b.mean()
    return float((m1 - m0) / sn * math.sqrt(p * (1 - p)))


def chi_square(table):
    t = np.asarray(table, dtype=np.float64)
    n = t.sum()
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n
    return float(((t - expected) ** 2 / expected).sum())


def cramers_v(table):
    """sqrt(chi2 / (n (min(r, c) - 1))) with Pearson's chi-square."""
    t = np.asarray(table, dtype=np.float64)
    if t.ndim != 2 or min(t.shape) < 2:
        raise UndefinedMetricError("Cramer's V needs at least a 2x2 table")
    if (t < 0).any():
        raise ValueError("contingency counts must be nonnegative")
    n = t.sum()
    if n <= 0:
        raise UndefinedMetricError("empty contingency table")
    if (t.sum(axis=0) == 0).any() or (t.sum(axis=1) == 0).any():
        raise UndefinedMetricError("contingency table has a zero marginal")
    return float(math.sqrt(chi_square(t) / (n * (min(t.shape) - 1))))


def contingency_table(row_labels, col_labels):
    rows = sorted(set(row_labels))
    cols = sorted(set(col_labels))
    t = np.zeros((len(rows), len(cols)), dtype=np.int64)
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: i for i, c in enumerate(cols)}
    for r, c in zip(row_labels, col_labels):
        t[ri[r], ci[c]] += 1
    return t, rows, cols


def permutation_pvalue(statistic, x, y, n_permutations=10_000, seed=0, two_sided=True):
    """Fraction of label shuffles whose statistic is at least as extreme."""
    rng = np.random.default_rng(seed)
    observed = statistic(x, y)
    y = np.asarray(y)
    hits = 0
    for _ in range(n_permutations):
        v = statistic(x, rng.permutation(y))
        if (abs(v) >= abs(observed)) if two_sided else (v >= observed):
            hits += 1
    return observed, (hits + 1) / (n_permutations + 1)


def point_biserial_test(continuous, binary, n_permutations=10_000, seed=0):
    return permutation_pvalue(point_biserial, continuous, binary, n_permutations, seed)


def cramers_v_test(row_labels, col_labels, n_permutations=10_000, seed=0):
    """Cramer's V of paired categorical observations with a permutation p."""
    rows = np.asarray(row_labels)

    def stat(r, c):
        return cramers_v(contingency_table(list(r), list(c))[0])

    return permutation_pvalue(stat, rows, np.asarray(col_labels), n_permutations, seed, two_sided=False)
