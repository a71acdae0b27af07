"""Brute-force reference computations used by the test suite.

Nothing in this subpackage imports the implementations it checks.
"""

from .oracles import (
    OracleResult,
    auc_paircount,
    dtw_bruteforce,
    finite_difference_gradient,
    monotone_alignments,
)

__all__ = [
    "OracleResult",
    "auc_paircount",
    "dtw_bruteforce",
    "finite_difference_gradient",
    "monotone_alignments",
]
