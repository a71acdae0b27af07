"""Independent oracles: exhaustive DTW, pair-counting AUC, finite differences.

These are deliberately naive.  They depend on numpy and the standard library
only; importing anything from the rest of the package here would let a bug
in the code under test leak into its verifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DTW_MAX_LEN = 6
AUC_MAX_PAIRS = 5_000_000


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: str
    size_bound: int

    def __float__(self):
        return float(self.value)


def monotone_alignments(n, m):
    """Yield every monotone alignment path from (0, 0) to (n-1, m-1).

    Steps are (1, 0), (0, 1) and (1, 1).
    """
    path = [(0, 0)]

    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield list(path)
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                path.append((a, b))
                yield from walk(a, b)
                path.pop()

    yield from walk(0, 0)


def _euclid(p, q):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return math.sqrt(float(np.sum((p - q) ** 2)))


def dtw_bruteforce(a, b, dist=None):
    """Minimum alignment cost over all enumerated monotone paths."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("dtw_bruteforce needs nonempty sequences")
    if n > DTW_MAX_LEN or m > DTW_MAX_LEN:
        raise ValueError(f"dtw_bruteforce is bounded to length {DTW_MAX_LEN}, got {n} and {m}")
    dist = dist or _euclid
    costs = [[dist(a[i], b[j]) for j in range(m)] for i in range(n)]
    best = math.inf
    for path in monotone_alignments(n, m):
        # plain left-to-right sum in path order; rounding is monotone, so the
        # minimum over paths is reproducible bit for bit
        total = 0.0
        for i, j in path:
            total = total + costs[i][j]
        best = min(best, total)
    return OracleResult(best, "exhaustive monotone-path enumeration", DTW_MAX_LEN)


def auc_paircount(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly; ties count 1/2."""
    scores = [float(s) for s in scores]
    labels = [int(l) for l in labels]
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    if not pos or not neg:
        raise ValueError("auc_paircount needs both classes")
    if len(pos) * len(neg) > AUC_MAX_PAIRS:
        raise ValueError("auc_paircount instance too large")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return OracleResult(wins / (len(pos) * len(neg)), "O(n^2) pair counting", AUC_MAX_PAIRS)


def finite_difference_gradient(func, params, step=1e-5):
    """Central-difference gradient of scalar ``func()`` w.r.t. each array.

    ``params`` are numpy arrays that ``func`` reads; they are perturbed in
    place and restored afterwards.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grads = []
    for arr in params:
        g = np.zeros(arr.shape, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            fp = float(func())
            flat[k] = orig - step
            fm = float(func())
            flat[k] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise FloatingPointError(f"non-finite function value at coordinate {k}")
            gflat[k] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads
