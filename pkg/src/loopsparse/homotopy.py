"""Homotopy solver for the unconstrained l1 reconstruction problem

    min_a  lambda * ||a||_1  +  1/2 * ||D a - b||_2^2

over the redundant dictionary D = [I_n | B] with unit columns. The solver
traces the piecewise-linear solution path in the regularization weight,
starting at lambda_max = ||D^T b||_inf (where the zero solution is optimal)
and walking down to the requested weight. At every breakpoint exactly one
column either enters the active set (its correlation with the residual has
reached the current weight) or leaves it (its coefficient has crossed zero).

Active-set linear systems are solved through a Cholesky factor of the active
Gram matrix that is maintained incrementally: entering columns append a row
via one triangular solve, and removals apply a Givens-rotation downdate. A
full refactorization is attempted if a downdate degenerates; if the factor
cannot be repaired (duplicate columns driven to tiny weights), the solve
fails loudly rather than returning garbage.

Because all columns are unit vectors, lambda_max <= 1, so weights are
directly comparable across dictionaries and the mid-path default of 0.5
behaves uniformly.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import BreakpointCapExceeded, DimensionMismatch, NumericalBreakdown

# Relative slack used when comparing path breakpoint candidates.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Target weight and numerical guards for one solve."""

    lambda_: float
    kkt_tol: float = 1e-9
    max_breakpoints: int | None = None  # defaults to 4 * (n + m)
    sign_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.lambda_ <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lambda_}")
        if self.kkt_tol < 0.0 or self.sign_tol < 0.0:
            raise ValueError("tolerances must be nonnegative")


@dataclass
class SparseSolution:
    """Nonzeros of the solution plus diagnostics of the path that produced it."""

    coeffs: dict  # raw column index -> coefficient
    residual: np.ndarray
    objective: float
    breakpoints_used: int
    lambda_max: float
    n: int
    width: int

    def nnz(self, threshold=1e-12):
        return sum(1 for v in self.coeffs.values() if abs(v) > threshold)

    def dense(self):
        alpha = np.zeros(self.width)
        for raw, val in self.coeffs.items():
            alpha[raw] = val
        return alpha

    def norm(self):
        return math.sqrt(sum(v * v for v in self.coeffs.values()))


@dataclass
class KKTReport:
    ok: bool
    max_violation: float
    worst_column: int
    worst_kind: str = ""

    def __bool__(self):
        return self.ok


class _ActiveSet:
    """Active columns, their signs, and a maintained Cholesky factor."""

    def __init__(self, dictionary, capacity=8):
        self.dict = dictionary
        self.raw = []
        self.signs = []
        n = dictionary.n
        self._A = np.empty((n, capacity))
        self._L = np.zeros((capacity, capacity))

    def __len__(self):
        return len(self.raw)

    @property
    def A(self):
        return self._A[:, : len(self.raw)]

    @property
    def L(self):
        k = len(self.raw)
        return self._L[:k, :k]

    def _grow(self):
        cap = self._A.shape[1]
        if len(self.raw) < cap:
            return
        A = np.empty((self._A.shape[0], 2 * cap))
        A[:, :cap] = self._A
        L = np.zeros((2 * cap, 2 * cap))
        L[:cap, :cap] = self._L
        self._A, self._L = A, L

    def add(self, raw_index, sign, sign_tol):
        self._grow()
        k = len(self.raw)
        col = self.dict.column(raw_index)
        if k:
            g = self.A.T @ col
            w = solve_triangular(self.L, g, lower=True, check_finite=False)
            z2 = 1.0 - float(w @ w)
            if z2 <= sign_tol:
                raise NumericalBreakdown(
                    f"column {raw_index} is numerically dependent on the active set"
                )
            self._L[k, :k] = w
            self._L[k, k] = math.sqrt(z2)
        else:
            self._L[0, 0] = 1.0
        self._A[:, k] = col
        self.raw.append(raw_index)
        self.signs.append(sign)

    def remove(self, pos):
        k = len(self.raw)
        L = self._L
        # Delete row `pos` of the factor, then restore triangularity with
        # Givens rotations sweeping the stray superdiagonal entries.
        L[pos : k - 1, :k] = L[pos + 1 : k, :k]
        for j in range(pos, k - 1):
            a, b = L[j, j], L[j, j + 1]
            r = math.hypot(a, b)
            if r == 0.0:
                self._refactor_after_removal(pos)
                return
            c, s = a / r, b / r
            L[j, j], L[j, j + 1] = r, 0.0
            if j + 1 < k - 1:
                cols_j = L[j + 1 : k - 1, j].copy()
                cols_j1 = L[j + 1 : k - 1, j + 1].copy()
                L[j + 1 : k - 1, j] = c * cols_j + s * cols_j1
                L[j + 1 : k - 1, j + 1] = -s * cols_j + c * cols_j1
        L[k - 1, :k] = 0.0
        self._A[:, pos : k - 1] = self._A[:, pos + 1 : k]
        del self.raw[pos]
        del self.signs[pos]

    def _refactor_after_removal(self, pos):
        del self.raw[pos]
        del self.signs[pos]
        k = len(self.raw)
        self._A[:, pos:k] = self._A[:, pos + 1 : k + 1]
        gram = self.A.T @ self.A
        try:
            self._L[:k, :k] = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("active Gram factor lost positive-definiteness") from exc

    def direction(self):
        """Solve G_A d = signs through the maintained factor."""
        k = len(self.raw)
        if k == 0:
            return np.zeros(0)
        s = np.asarray(self.signs, dtype=np.float64)
        y = solve_triangular(self.L, s, lower=True, check_finite=False)
        return solve_triangular(self.L, y, lower=True, trans="T", check_finite=False)


def _zero_solution(dictionary, bvals, cfg, lambda_max):
    residual = bvals.copy()
    return SparseSolution(
        coeffs={},
        residual=residual,
        objective=0.5 * float(residual @ residual),
        breakpoints_used=0,
        lambda_max=lambda_max,
        n=dictionary.n,
        width=dictionary.width,
    )


def _lowest_argmax(values):
    best = np.max(values)
    ties = np.flatnonzero(values >= best - _TIE_TOL * max(1.0, best))
    return int(ties[0])


def solve(dictionary, b, cfg: SolverConfig) -> SparseSolution:
    """Trace the homotopy path from lambda_max down to cfg.lambda_.

    Tie-breaking is deterministic: when several columns reach a breakpoint
    together, the lowest raw index enters first. Exactly duplicated columns
    never co-activate; the later copy's entry condition is degenerate and is
    suppressed by the sign_tol denominator guard.
    """
    bvals = np.asarray(b.values if hasattr(b, "values") else b, dtype=np.float64)
    if bvals.shape != (dictionary.n,):
        raise DimensionMismatch(f"b has shape {bvals.shape}, dictionary n = {dictionary.n}")
    width = dictionary.width
    max_bp = cfg.max_breakpoints if cfg.max_breakpoints is not None else 4 * width

    c = dictionary.correlations(bvals)
    lambda_max = float(np.max(np.abs(c)))
    if cfg.lambda_ >= lambda_max:
        return _zero_solution(dictionary, bvals, cfg, lambda_max)

    active = _ActiveSet(dictionary)
    j0 = _lowest_argmax(np.abs(c))
    active.add(j0, 1.0 if c[j0] > 0 else -1.0, cfg.sign_tol)

    lam = lambda_max
    alpha = np.zeros(1)
    breakpoints = 0
    just_dropped = -1
    inactive_mask = np.ones(width, dtype=bool)
    inactive_mask[j0] = False

    while True:
        breakpoints += 1
        if breakpoints > max_bp:
            raise BreakpointCapExceeded(
                f"path exceeded {max_bp} breakpoints at lambda={lam:.3e}"
            )

        d = active.direction()
        u = active.A @ d if len(active) else np.zeros(dictionary.n)
        a = dictionary.correlations(u)
        gamma_target = lam - cfg.lambda_
        tie = _TIE_TOL * max(1.0, lam)

        # Entry candidates: inactive column j joins when |c_j(gamma)| meets
        # the decreasing weight; c_j moves linearly with slope -a_j.
        denom_p = 1.0 - a
        denom_m = 1.0 + a
        with np.errstate(divide="ignore", invalid="ignore"):
            gp = np.where(denom_p > cfg.sign_tol, (lam - c) / denom_p, np.inf)
            gm = np.where(denom_m > cfg.sign_tol, (lam + c) / denom_m, np.inf)
        gp = np.where(inactive_mask & (gp >= -tie), np.maximum(gp, 0.0), np.inf)
        gm = np.where(inactive_mask & (gm >= -tie), np.maximum(gm, 0.0), np.inf)
        if 0 <= just_dropped < width:
            gp[just_dropped] = np.inf
            gm[just_dropped] = np.inf
        entry_g = np.minimum(gp, gm)
        j_entry = -1
        gamma_entry = np.inf
        if np.isfinite(entry_g).any():
            gamma_entry = float(np.min(entry_g))
            j_entry = int(np.flatnonzero(entry_g <= gamma_entry + tie)[0])
            gamma_entry = float(entry_g[j_entry])

        # Drop candidates: active coefficient crossing zero.
        gamma_drop = np.inf
        pos_drop = -1
        if len(active):
            with np.errstate(divide="ignore", invalid="ignore"):
                gd = np.where(d != 0.0, -alpha / d, np.inf)
            sign_arr = np.asarray(active.signs)
            crossing = (alpha * d < 0.0) | ((alpha == 0.0) & (sign_arr * d < 0.0))
            gd = np.where(crossing & (gd >= -tie), np.maximum(gd, 0.0), np.inf)
            if np.isfinite(gd).any():
                gamma_drop = float(np.min(gd))
                pos_drop = int(np.flatnonzero(gd <= gamma_drop + tie)[0])
                gamma_drop = float(gd[pos_drop])

        gamma = min(gamma_target, gamma_entry, gamma_drop)
        alpha = alpha + gamma * d
        lam -= gamma

        if gamma_target <= min(gamma_entry, gamma_drop):
            lam = cfg.lambda_
            break

        if gamma_drop < gamma_entry:
            raw = active.raw[pos_drop]
            active.remove(pos_drop)
            alpha = np.delete(alpha, pos_drop)
            inactive_mask[raw] = True
            just_dropped = raw
        else:
            sign = 1.0 if gp[j_entry] <= gm[j_entry] else -1.0
            active.add(j_entry, sign, cfg.sign_tol)
            alpha = np.append(alpha, 0.0)
            inactive_mask[j_entry] = False
            just_dropped = -1

        r = bvals - active.A @ alpha if len(active) else bvals.copy()
        c = dictionary.correlations(r)

    residual = bvals - active.A @ alpha if len(active) else bvals.copy()
    coeffs = {
        raw: float(val) for raw, val in zip(active.raw, alpha) if val != 0.0
    }
    l1 = sum(abs(v) for v in coeffs.values())
    objective = cfg.lambda_ * l1 + 0.5 * float(residual @ residual)
    return SparseSolution(
        coeffs=coeffs,
        residual=residual,
        objective=objective,
        breakpoints_used=breakpoints,
        lambda_max=lambda_max,
        n=dictionary.n,
        width=width,
    )


def certify_kkt(dictionary, b, sol: SparseSolution, lambda_, tol) -> KKTReport:
    """Check first-order optimality of ``sol`` at weight ``lambda_``.

    Inactive columns must satisfy |d_j^T r| <= lambda + tol; active columns
    must satisfy d_j^T r = lambda * sign(alpha_j) within tol. The residual is
    recomputed from the coefficients, independent of solver bookkeeping.
    """
    bvals = np.asarray(b.values if hasattr(b, "values") else b, dtype=np.float64)
    r = bvals.copy()
    for raw, val in sol.coeffs.items():
        r -= val * dictionary.column(raw)
    c = dictionary.correlations(r)

    worst = 0.0
    worst_col = -1
    worst_kind = "none"
    active_idx = set(sol.coeffs)
    for j in range(dictionary.width):
        if j in active_idx:
            viol = abs(c[j] - lambda_ * math.copysign(1.0, sol.coeffs[j]))
            kind = "active"
        else:
            viol = max(0.0, abs(c[j]) - lambda_)
            kind = "inactive"
        if viol > worst:
            worst, worst_col, worst_kind = viol, j, kind
    return KKTReport(ok=worst <= tol, max_violation=worst, worst_column=worst_col, worst_kind=worst_kind)
