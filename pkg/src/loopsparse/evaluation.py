"""Scoring detector output against ground truth, parameter sweeps, statistics.

Threshold sweeps re-use recorded normalized solutions (no re-solving);
changing the regularization weight genuinely requires re-solving and lives
in the run orchestration layer. The nearest-neighbour baseline is scored
through the same machinery with score = 1 - distance.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .detector import replay_decisions
from .dictionary import Dictionary
from .errors import NoEligibleColumns
from .oracles import nn_match

DEFAULT_TOLERANCE_FRAMES = 5


@dataclass(frozen=True)
class GroundTruth:
    pairs: frozenset  # canonicalized (i, j) with i > j
    tolerance_frames: int = DEFAULT_TOLERANCE_FRAMES

    @staticmethod
    def from_pairs(pairs, tolerance_frames=DEFAULT_TOLERANCE_FRAMES):
        canon = frozenset((max(i, j), min(i, j)) for i, j in pairs)
        return GroundTruth(canon, tolerance_frames)


def load_ground_truth(path, tolerance_frames=DEFAULT_TOLERANCE_FRAMES):
    """Read i,j pairs from CSV; a non-numeric first line is treated as a header."""
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            tokens = line.split(",")[:2]
            try:
                i, j = int(tokens[0]), int(tokens[1])
            except (ValueError, IndexError):
                if pairs:
                    raise
                continue  # header
            pairs.append((i, j))
    return GroundTruth.from_pairs(pairs, tolerance_frames)


@dataclass(frozen=True)
class PRPoint:
    parameter: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class TimingStats:
    min_ms: float
    mean_ms: float
    max_ms: float
    std_ms: float
    final_width: int
    queries: int


def _canonical(pair):
    i, j = pair
    return (max(i, j), min(i, j))


def score_run(hypotheses, truth: GroundTruth):
    """Count (tp, fp, fn) with fuzzy frame matching.

    A hypothesis is credited against the nearest unclaimed truth pair whose
    query and match indices both lie within tolerance; every truth pair is
    creditable once, and unclaimed pairs count as false negatives.
    """
    tol = truth.tolerance_frames
    unclaimed = set(truth.pairs)
    tp = fp = 0
    for hyp in sorted(_canonical(_pair_of(h)) for h in hypotheses):
        i, j = hyp
        best = None
        for cand in unclaimed:
            di, dj = abs(i - cand[0]), abs(j - cand[1])
            if di > tol or dj > tol:
                continue
            key = (max(di, dj), di + dj, cand)
            if best is None or key < best[0]:
                best = (key, cand)
        if best is None:
            fp += 1
        else:
            unclaimed.remove(best[1])
            tp += 1
    return tp, fp, len(unclaimed)


def _pair_of(h):
    if isinstance(h, tuple):
        return h
    return (h.query_index, h.match_index)


def pr_point(parameter, tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return PRPoint(parameter, precision, recall, tp, fp, fn)


def detections(hypotheses, consistency_required):
    """The hypotheses a run reports: accepted ones when filtering is on."""
    if consistency_required:
        return [h for h in hypotheses if h.accepted]
    return list(hypotheses)


def sweep_tau(traces, taus, truth: GroundTruth, config):
    """Re-threshold recorded solutions per tau; identical to fresh runs."""
    points = []
    for tau in taus:
        hyps = replay_decisions(traces, config, tau=tau)
        dets = detections(hyps, config.consistency_required)
        tp, fp, fn = score_run(dets, truth)
        points.append(pr_point(tau, tp, fp, fn))
    return points


def nnz_stats(traces_by_lambda):
    """Per-lambda {min, mean, max, std} of percent nonzeros in raw solutions."""
    stats = {}
    for lam, traces in traces_by_lambda.items():
        solved = [t for t in traces if t.m > 0]
        percents = np.asarray(
            [100.0 * t.nnz / t.width for t in solved] if solved else [0.0]
        )
        stats[lam] = {
            "min": float(percents.min()),
            "mean": float(percents.mean()),
            "max": float(percents.max()),
            "std": float(percents.std()),
        }
    return stats


def timing_report(traces):
    """Aggregate per-query solve times (queries that actually solved)."""
    solved = [t for t in traces if t.m > 0]
    times = np.asarray([t.solve_time for t in solved]) * 1000.0
    if times.size == 0:
        return TimingStats(0.0, 0.0, 0.0, 0.0, 0, 0)
    final = max(traces, key=lambda t: t.query_index)
    return TimingStats(
        min_ms=float(times.min()),
        mean_ms=float(times.mean()),
        max_ms=float(times.max()),
        std_ms=float(times.std()),
        final_width=final.width + 1,  # width after the final append
        queries=len(solved),
    )


def nn_baseline_matches(feature_list, t_g_frames):
    """Exhaustive-NN match per query over an incrementally grown dictionary.

    Returns (query_index, match_index, score) triples with score =
    1 - euclidean distance, mirroring the detector's single-phase protocol.
    """
    if not feature_list:
        return []
    d = Dictionary(feature_list[0].dim)
    matches = []
    for i, f in enumerate(feature_list):
        if d.m > 0:
            try:
                j, dist = nn_match(d, f, t_g_frames, i)
                matches.append((i, j, 1.0 - dist))
            except NoEligibleColumns:
                pass
        d.append(f, timestamp=float(i), frame_index=i)
    return matches


def nn_pr(matches, thresholds, truth: GroundTruth):
    """PR points for the NN baseline: detection iff score > threshold."""
    points = []
    for thr in thresholds:
        dets = [(i, j) for i, j, score in matches if score > thr]
        tp, fp, fn = score_run(dets, truth)
        points.append(pr_point(thr, tp, fp, fn))
    return points


def write_pr_csv(path, points):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "precision", "recall", "tp", "fp", "fn"])
        for p in points:
            writer.writerow([repr(p.parameter), repr(p.precision), repr(p.recall), p.tp, p.fp, p.fn])


def read_pr_csv(path):
    points = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            points.append(
                PRPoint(
                    float(row["parameter"]),
                    float(row["precision"]),
                    float(row["recall"]),
                    int(row["tp"]),
                    int(row["fp"]),
                    int(row["fn"]),
                )
            )
    return points
