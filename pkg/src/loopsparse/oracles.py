"""Slow-but-sure reference solvers used for testing and baselines.

None of these share code with the homotopy path: coordinate descent verifies
objectives through the l1 duality gap, exhaustive l0 enumeration checks the
combinatorial problem at desk scale, minimum-norm least squares realizes the
dense baseline, and exhaustive nearest-neighbour matching is the comparison
method for the evaluation tooling.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DimensionMismatch,
    EnumerationTooLarge,
    Infeasible,
    IterationCapExceeded,
    NoEligibleColumns,
)

L0_SUPPORT_CAP = 3
L0_SUBSET_CAP = 10**6


@dataclass
class OracleReport:
    solution: dict  # raw column index -> coefficient
    objective: float
    iterations: int
    converged: bool


def _as_values(dictionary, b):
    vals = np.asarray(b.values if hasattr(b, "values") else b, dtype=np.float64)
    if vals.shape != (dictionary.n,):
        raise DimensionMismatch(f"b has shape {vals.shape}, dictionary n = {dictionary.n}")
    return vals


def _soft(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def cd_solve(dictionary, b, lambda_, gap_tol, max_sweeps=50000) -> OracleReport:
    """Cyclic coordinate descent with exact soft-threshold updates.

    All columns are unit norm, so each coordinate update is
    alpha_j <- soft(alpha_j + d_j^T r, lambda). The identity noise block is
    updated in one vectorized pass (its coordinates do not interact), then
    image columns cycle in order; iteration stops when the l1 duality gap
    drops to gap_tol.
    """
    if gap_tol <= 0.0:
        raise ValueError("gap_tol must be positive")
    bvals = _as_values(dictionary, b)
    n, m = dictionary.n, dictionary.m
    rows = dictionary.image_block()
    alpha = np.zeros(n + m)
    r = bvals.copy()

    for sweep in range(1, max_sweeps + 1):
        noise_new = _soft(alpha[:n] + r[:n], lambda_)
        r[:n] -= noise_new - alpha[:n]
        alpha[:n] = noise_new
        for j in range(m):
            col = rows[j]
            old = alpha[n + j]
            new = float(_soft(old + col @ r, lambda_))
            if new != old:
                r -= (new - old) * col
                alpha[n + j] = new

        primal = lambda_ * float(np.abs(alpha).sum()) + 0.5 * float(r @ r)
        corr = dictionary.correlations(r)
        cmax = float(np.max(np.abs(corr))) if corr.size else 0.0
        scale = 1.0 if cmax <= lambda_ else lambda_ / cmax
        theta = scale * r
        dual = float(bvals @ theta) - 0.5 * float(theta @ theta)
        if primal - dual <= gap_tol:
            solution = {j: float(v) for j, v in enumerate(alpha) if v != 0.0}
            return OracleReport(solution, primal, sweep, True)

    raise IterationCapExceeded(f"coordinate descent did not reach gap {gap_tol} in {max_sweeps} sweeps")


def l0_solve(dictionary, b, max_support, residual_tol) -> OracleReport:
    """Exhaustively search supports of size <= max_support (Eq.-level oracle).

    Returns the smallest support whose least-squares fit meets residual_tol;
    ties break by residual norm, then by lexicographic support order. Only
    desk-scale instances are accepted (support cap 3, subset cap 1e6).
    """
    if not 0 < max_support <= L0_SUPPORT_CAP:
        raise ValueError(f"max_support must be in [1, {L0_SUPPORT_CAP}]")
    bvals = _as_values(dictionary, b)
    width = dictionary.width
    total = sum(math.comb(width, k) for k in range(max_support + 1))
    if total > L0_SUBSET_CAP:
        raise EnumerationTooLarge(f"{total} subsets exceed the {L0_SUBSET_CAP} cap")

    dense = dictionary.dense()
    evaluated = 0
    for k in range(max_support + 1):
        best = None
        for support in combinations(range(width), k):
            evaluated += 1
            if k == 0:
                rnorm = float(np.linalg.norm(bvals))
                coef = np.zeros(0)
            else:
                sub = dense[:, support]
                coef, *_ = np.linalg.lstsq(sub, bvals, rcond=None)
                rnorm = float(np.linalg.norm(bvals - sub @ coef))
            if rnorm <= residual_tol and (best is None or rnorm < best[0]):
                best = (rnorm, support, coef)
        if best is not None:
            rnorm, support, coef = best
            solution = {int(j): float(v) for j, v in zip(support, coef)}
            return OracleReport(solution, rnorm, evaluated, True)
    raise Infeasible(
        f"no support of size <= {max_support} reaches residual {residual_tol}"
    )


def lsq_min_norm(dictionary, b):
    """Minimum-l2-norm solution of D alpha = b (dense least-squares baseline).

    The system is always consistent because D contains the identity block;
    the SVD-backed solver returns the minimum-norm solution directly.
    """
    bvals = _as_values(dictionary, b)
    alpha, *_ = np.linalg.lstsq(dictionary.dense(), bvals, rcond=None)
    return alpha


def nn_match(dictionary, b, t_g_frames, query_index):
    """Exhaustive nearest neighbour over image columns outside the time gate.

    Returns (image_index, distance); equidistant candidates resolve to the
    lower index.
    """
    bvals = _as_values(dictionary, b)
    if dictionary.m == 0:
        raise NoEligibleColumns("dictionary has no image columns")
    frame_idx = np.asarray([meta.frame_index for meta in dictionary.frame_meta])
    eligible = np.flatnonzero(np.abs(query_index - frame_idx) > t_g_frames)
    if eligible.size == 0:
        raise NoEligibleColumns(f"all {dictionary.m} columns fall within the gate")
    rows = dictionary.image_block()
    dists = np.linalg.norm(rows[eligible] - bvals, axis=1)
    local = int(np.argmin(dists))
    return int(eligible[local]), float(dists[local])
