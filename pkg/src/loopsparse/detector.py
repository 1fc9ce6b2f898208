"""Online loop-closure detection over the growing dictionary.

Per frame: solve the l1 problem against the current dictionary snapshot,
normalize the full solution (noise and image coefficients together) to a
unit vector, emit at most one hypothesis (the largest image entry above the
threshold and outside the temporal gate), apply the temporal-consistency
filter, then append the frame to the dictionary.

Hypothesis emission is deliberately conservative: thresholding acts on
signed normalized coefficients, noise entries are never hypotheses, and for
thresholds >= 1/sqrt(2) at most one entry of a unit vector can qualify, so
every query yields zero or one hypothesis. When aliasing splits the solution
over several similar columns, no single entry clears the threshold and the
query is silently skipped; the optional joint-contribution mode sums entries
of frames already linked by accepted loops to recover multi-revisit matches.

The decision stage (everything after the solve) is a pure function of the
normalized solution, so recorded runs can be re-thresholded exactly without
re-solving; ``replay_decisions`` is that same code path applied offline.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary
from .errors import DimensionMismatch
from .homotopy import SolverConfig, solve


@dataclass(frozen=True)
class DetectorConfig:
    lambda_: float = 0.5
    tau: float = 0.99
    t_g_seconds: float = 10.0
    fps: float = 1.0
    consistency_window_seconds: float | None = None  # defaults to t_g_seconds
    consistency_required: bool = True
    joint_contribution: bool = False
    kkt_tol: float = 1e-9
    sign_tol: float = 1e-12
    max_breakpoints: int | None = None

    def __post_init__(self):
        if not 0.5 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0.5, 1], got {self.tau}")
        if self.t_g_seconds < 0 or (
            self.consistency_window_seconds is not None and self.consistency_window_seconds < 0
        ):
            raise ValueError("time windows must be nonnegative")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def t_g_frames(self):
        return math.ceil(self.t_g_seconds * self.fps)

    @property
    def consistency_window_frames(self):
        seconds = (
            self.t_g_seconds
            if self.consistency_window_seconds is None
            else self.consistency_window_seconds
        )
        return math.ceil(seconds * self.fps)

    def solver_config(self, lambda_=None):
        return SolverConfig(
            lambda_=self.lambda_ if lambda_ is None else lambda_,
            kkt_tol=self.kkt_tol,
            sign_tol=self.sign_tol,
            max_breakpoints=self.max_breakpoints,
        )


@dataclass
class LoopHypothesis:
    query_index: int
    match_index: int
    score: float
    accepted: bool = False


@dataclass
class QueryTrace:
    query_index: int
    alpha_hat: dict  # raw column index -> normalized coefficient
    nnz: int
    solve_time: float  # seconds spent in the solver
    hypotheses: list
    m: int  # image columns at query time
    width: int  # n + m at query time
    lambda_max: float

    @property
    def n(self):
        return self.width - self.m


@dataclass
class SparsityMatrix:
    entries: list  # (row, col) coordinates, row = raw column, col = query
    rows: int
    cols: int


def image_scores(alpha_hat, n):
    """Signed normalized scores keyed by image frame index."""
    return {raw - n: val for raw, val in alpha_hat.items() if raw >= n}


def joint_scores(trace, loop_graph):
    """Sum scores of frames linked (transitively) by accepted loops.

    Each connected group contributes one adjusted entry at its earliest
    frame; frames outside any group keep their own score.
    """
    scores = image_scores(trace.alpha_hat, trace.n)
    if not loop_graph:
        return dict(scores)
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, l in loop_graph:
        rk, rl = find(k), find(l)
        if rk != rl:
            parent[max(rk, rl)] = min(rk, rl)

    groups = {}
    for frame in parent:
        groups.setdefault(find(frame), []).append(frame)

    adjusted = dict(scores)
    for root, members in groups.items():
        total = sum(scores.get(frame, 0.0) for frame in members)
        involved = [frame for frame in members if frame in scores]
        if not involved:
            continue
        for frame in involved:
            adjusted.pop(frame, None)
        adjusted[min(members)] = total
    return adjusted


def pick_hypothesis(scores, query_index, tau, t_g_frames):
    """Largest super-threshold entry outside the gate; lowest index on ties."""
    best = None
    for frame, score in scores.items():
        if score <= tau or abs(query_index - frame) <= t_g_frames:
            continue
        if best is None or score > best.score or (score == best.score and frame < best.match_index):
            best = LoopHypothesis(query_index, frame, float(score))
    return best


class _ConsistencyState:
    """Symmetric temporal-consistency filter over emitted hypotheses.

    A hypothesis is accepted iff some other hypothesis lies within the window
    on both the query and the match index; confirmation marks the earlier
    hypothesis retroactively, so the flag set equals the batch computation.
    """

    def __init__(self, window_frames):
        self.window = window_frames
        self.recent = []

    def observe(self, hyp):
        confirmed = []
        for other in reversed(self.recent):
            if hyp.query_index - other.query_index > self.window:
                break
            if abs(hyp.match_index - other.match_index) <= self.window:
                hyp.accepted = True
                if not other.accepted:
                    other.accepted = True
                    confirmed.append(other)
        self.recent.append(hyp)
        if hyp.accepted:
            confirmed.append(hyp)
        return confirmed


class LoopDetector:
    """Sequential per-stream detector; one dictionary append per frame."""

    def __init__(self, n, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self.dictionary = Dictionary(n)
        self.traces = []
        self._solver_cfg = self.config.solver_config()
        self._consistency = _ConsistencyState(self.config.consistency_window_frames)
        self._loop_graph = set()
        self._frozen = False
        self._last_timestamp = None
        self._query_count = 0

    def freeze(self):
        """Stop dictionary growth (memory/live two-phase protocol)."""
        self._frozen = True

    @property
    def query_count(self):
        return self._query_count

    def hypotheses(self, accepted_only=False):
        out = []
        for trace in self.traces:
            for hyp in trace.hypotheses:
                if not accepted_only or hyp.accepted:
                    out.append(hyp)
        return out

    def process_frame(self, f, timestamp=None):
        if f.dim != self.dictionary.n:
            raise DimensionMismatch(
                f"feature dim {f.dim} != detector dim {self.dictionary.n}"
            )
        i = self._query_count
        if timestamp is None:
            timestamp = i / self.config.fps
        if self._last_timestamp is not None and timestamp < self._last_timestamp:
            raise ValueError(
                f"timestamps must be non-decreasing ({timestamp} < {self._last_timestamp})"
            )
        self._last_timestamp = timestamp

        if self.dictionary.m == 0:
            trace = QueryTrace(
                query_index=i,
                alpha_hat={},
                nnz=0,
                solve_time=0.0,
                hypotheses=[],
                m=0,
                width=self.dictionary.width,
                lambda_max=0.0,
            )
        else:
            t0 = time.perf_counter()
            sol = solve(self.dictionary, f, self._solver_cfg)
            elapsed = time.perf_counter() - t0
            norm = sol.norm()
            alpha_hat = (
                {raw: val / norm for raw, val in sol.coeffs.items()} if norm > 0.0 else {}
            )
            trace = QueryTrace(
                query_index=i,
                alpha_hat=alpha_hat,
                nnz=sol.nnz(),
                solve_time=elapsed,
                hypotheses=[],
                m=self.dictionary.m,
                width=sol.width,
                lambda_max=sol.lambda_max,
            )
            scores = (
                joint_scores(trace, self._loop_graph)
                if self.config.joint_contribution
                else image_scores(alpha_hat, trace.n)
            )
            hyp = pick_hypothesis(scores, i, self.config.tau, self.config.t_g_frames)
            if hyp is not None:
                trace.hypotheses.append(hyp)
                if self.config.consistency_required:
                    confirmed = self._consistency.observe(hyp)
                else:
                    hyp.accepted = True
                    confirmed = [hyp]
                if self.config.joint_contribution:
                    for acc in confirmed:
                        self._loop_graph.add((acc.query_index, acc.match_index))

        self.traces.append(trace)
        if not self._frozen:
            self.dictionary.append(f, timestamp=timestamp, frame_index=i)
        self._query_count += 1
        return trace


def replay_decisions(traces, config: DetectorConfig, tau=None):
    """Re-run the decision stage of every trace at threshold ``tau``.

    Produces fresh LoopHypothesis objects exactly as a live run at that
    threshold would have (same gating, tie-breaking, consistency filtering,
    and joint-contribution bookkeeping), without re-solving anything.
    """
    tau = config.tau if tau is None else tau
    consistency = _ConsistencyState(config.consistency_window_frames)
    loop_graph = set()
    out = []
    for trace in sorted(traces, key=lambda t: t.query_index):
        if not trace.alpha_hat:
            continue
        scores = (
            joint_scores(trace, loop_graph)
            if config.joint_contribution
            else image_scores(trace.alpha_hat, trace.n)
        )
        hyp = pick_hypothesis(scores, trace.query_index, tau, config.t_g_frames)
        if hyp is None:
            continue
        if config.consistency_required:
            confirmed = consistency.observe(hyp)
        else:
            hyp.accepted = True
            confirmed = [hyp]
        if config.joint_contribution:
            for acc in confirmed:
                loop_graph.add((acc.query_index, acc.match_index))
        out.append(hyp)
    return out


def sparsity_matrix(traces, tau):
    """Coordinate-list indicator of super-threshold entries, one column per query.

    Rows are raw dictionary columns (noise block first), so neighbor
    explanations form a band at offset n and loops appear off-diagonal.
    """
    entries = []
    rows = 0
    for trace in sorted(traces, key=lambda t: t.query_index):
        rows = max(rows, trace.width)
        for raw, val in trace.alpha_hat.items():
            if val > tau:
                entries.append((raw, trace.query_index))
    cols = 1 + max((t.query_index for t in traces), default=-1)
    return SparsityMatrix(entries=entries, rows=rows, cols=max(cols, 0))
