"""Run orchestration: stream ingestion, detection, archives, evaluation.

A detection run leaves a self-contained archive directory behind:

    features.lcdf     the exact unit-feature stream that was processed
    frames.csv        query_index, timestamp, source_tag
    solutions.csv     sparse raw and normalized solutions, one row per nonzero
    traces.csv        per-query nnz / width / lambda_max
    hypotheses.csv    query_index, match_index, score, accepted
    sparsity.csv      coordinate list of super-threshold entries
    timing.csv        per-query solve milliseconds (excluded from determinism)
    run_config.json   detector configuration echo

Evaluation consumes an archive plus a ground-truth CSV: tau sweeps re-use
the recorded solutions, lambda sweeps re-solve from features.lcdf (and say
so, loudly), and the NN baseline runs over the same feature stream.
"""

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import evaluation, formats, synth
from .detector import DetectorConfig, LoopDetector, QueryTrace, sparsity_matrix
from .errors import BadDimensions, EmptyInput, LoopSparseError
from .features import (
    FeatureVector,
    detect_descriptor_format,
    image_from_pgm,
    image_to_feature,
    load_descriptors,
    stack_features,
)

log = logging.getLogger(__name__)

DEFAULT_TAUS = tuple(round(0.5 + 0.1 * k, 1) for k in range(6))


@dataclass(frozen=True)
class RunConfig:
    """One detection run: exactly one input source plus detector settings."""

    out_dir: str
    input_dir: str | None = None  # directory of binary PGM frames
    descriptor_paths: tuple = ()
    stack: bool = False
    rows: int = 8
    cols: int = 6
    lambda_: float = 0.5
    tau: float = 0.99
    t_g_seconds: float = 10.0
    fps: float = 1.0
    stride: int = 1
    consistency: bool = True
    joint: bool = False
    two_phase: int | None = None  # freeze dictionary after this many frames
    seed: int = 0

    def __post_init__(self):
        sources = (self.input_dir is not None) + (len(self.descriptor_paths) > 0)
        if sources != 1:
            raise ValueError("exactly one input source (images or descriptors) required")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if len(self.descriptor_paths) > 1 and not self.stack:
            raise ValueError("multiple descriptor files require stack mode")

    def detector_config(self):
        return DetectorConfig(
            lambda_=self.lambda_,
            tau=self.tau,
            t_g_seconds=self.t_g_seconds,
            fps=self.fps / self.stride,
            consistency_required=self.consistency,
            joint_contribution=self.joint,
        )


def load_stream(cfg: RunConfig):
    """Materialize the unit-feature stream (stride already applied)."""
    if cfg.input_dir is not None:
        names = sorted(
            fname
            for fname in os.listdir(cfg.input_dir)
            if fname.lower().endswith(".pgm")
        )
        if not names:
            raise EmptyInput(f"no .pgm frames under {cfg.input_dir}")
        feats = []
        for fname in names[:: cfg.stride]:
            img = image_from_pgm(os.path.join(cfg.input_dir, fname))
            feats.append(image_to_feature(img, cfg.rows, cfg.cols))
        return feats
    streams = []
    for path in cfg.descriptor_paths:
        records = load_descriptors(path, format=detect_descriptor_format(path))
        streams.append(records[:: cfg.stride])
    if len(streams) == 1:
        return streams[0]
    counts = {len(s) for s in streams}
    if len(counts) != 1:
        raise BadDimensions(f"descriptor streams disagree on frame count: {sorted(counts)}")
    return [stack_features(list(parts)) for parts in zip(*streams)]


@dataclass
class DetectReport:
    archive_dir: str
    queries: int
    emitted: int
    accepted: int
    timing: evaluation.TimingStats
    config: DetectorConfig


def run_detect(cfg: RunConfig) -> DetectReport:
    features = load_stream(cfg)
    dconfig = cfg.detector_config()
    detector = LoopDetector(features[0].dim, dconfig)
    for i, f in enumerate(features):
        if cfg.two_phase is not None and i == cfg.two_phase:
            detector.freeze()
        detector.process_frame(f, timestamp=i / dconfig.fps)
    report = write_archive(cfg.out_dir, detector, features, dconfig)
    return report


def write_archive(out_dir, detector: LoopDetector, features, dconfig: DetectorConfig):
    os.makedirs(out_dir, exist_ok=True)
    traces = detector.traces

    formats.write_lcdf(
        os.path.join(out_dir, "features.lcdf"), np.stack([f.values for f in features])
    )
    with open(os.path.join(out_dir, "frames.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "timestamp", "source_tag"])
        for i, f in enumerate(features):
            writer.writerow([i, repr(i / dconfig.fps), f.source_tag])

    with open(os.path.join(out_dir, "solutions.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "column", "alpha_hat"])
        for trace in traces:
            for raw in sorted(trace.alpha_hat):
                writer.writerow([trace.query_index, raw, repr(trace.alpha_hat[raw])])

    with open(os.path.join(out_dir, "traces.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "m", "width", "nnz", "lambda_max"])
        for trace in traces:
            writer.writerow(
                [trace.query_index, trace.m, trace.width, trace.nnz, repr(trace.lambda_max)]
            )

    write_hypotheses_csv(os.path.join(out_dir, "hypotheses.csv"), detector.hypotheses())

    sparsity = sparsity_matrix(traces, dconfig.tau)
    with open(os.path.join(out_dir, "sparsity.csv"), "w", newline="", encoding="ascii") as fh:
        fh.write(f"# shape={sparsity.rows}x{sparsity.cols}\n")
        writer = csv.writer(fh)
        writer.writerow(["row", "col"])
        for row, col in sparsity.entries:
            writer.writerow([row, col])

    with open(os.path.join(out_dir, "timing.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "solve_ms"])
        for trace in traces:
            writer.writerow([trace.query_index, repr(trace.solve_time * 1000.0)])

    with open(os.path.join(out_dir, "run_config.json"), "w", encoding="ascii") as fh:
        json.dump(asdict(dconfig), fh, indent=2, sort_keys=True)
        fh.write("\n")

    emitted = detector.hypotheses()
    return DetectReport(
        archive_dir=out_dir,
        queries=len(traces),
        emitted=len(emitted),
        accepted=sum(1 for h in emitted if h.accepted),
        timing=evaluation.timing_report(traces),
        config=dconfig,
    )


def write_hypotheses_csv(path, hypotheses):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "match_index", "score", "accepted"])
        for h in hypotheses:
            writer.writerow([h.query_index, h.match_index, repr(h.score), int(h.accepted)])


def load_archive(archive_dir):
    """Rebuild (traces, config, features) from a detection archive."""
    with open(os.path.join(archive_dir, "run_config.json"), "r", encoding="ascii") as fh:
        config = DetectorConfig(**json.load(fh))

    records = formats.read_lcdf(os.path.join(archive_dir, "features.lcdf"))
    features = [FeatureVector(row) for row in records]

    alpha = {}
    with open(os.path.join(archive_dir, "solutions.csv"), newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            alpha.setdefault(int(row["query_index"]), {})[int(row["column"])] = float(
                row["alpha_hat"]
            )

    solve_ms = {}
    timing_path = os.path.join(archive_dir, "timing.csv")
    if os.path.exists(timing_path):
        with open(timing_path, newline="", encoding="ascii") as fh:
            for row in csv.DictReader(fh):
                solve_ms[int(row["query_index"])] = float(row["solve_ms"])

    traces = []
    with open(os.path.join(archive_dir, "traces.csv"), newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            qi = int(row["query_index"])
            traces.append(
                QueryTrace(
                    query_index=qi,
                    alpha_hat=alpha.get(qi, {}),
                    nnz=int(row["nnz"]),
                    solve_time=solve_ms.get(qi, 0.0) / 1000.0,
                    hypotheses=[],
                    m=int(row["m"]),
                    width=int(row["width"]),
                    lambda_max=float(row["lambda_max"]),
                )
            )
    return traces, config, features


@dataclass
class EvalReport:
    pr_tau: list
    pr_lambda: list
    nn_pr: list
    nnz_by_lambda: dict
    timing: evaluation.TimingStats
    out_dir: str
    warnings: list = field(default_factory=list)


def run_eval(
    archive_dir,
    truth_path,
    out_dir,
    taus=DEFAULT_TAUS,
    lambdas=(),
    nn_thresholds=(),
    tolerance_frames=evaluation.DEFAULT_TOLERANCE_FRAMES,
) -> EvalReport:
    traces, config, features = load_archive(archive_dir)
    truth = evaluation.load_ground_truth(truth_path, tolerance_frames)
    os.makedirs(out_dir, exist_ok=True)
    warnings = []

    pr_tau = evaluation.sweep_tau(traces, taus, truth, config)
    evaluation.write_pr_csv(os.path.join(out_dir, "pr_tau.csv"), pr_tau)

    pr_lambda = []
    traces_by_lambda = {config.lambda_: traces}
    if lambdas:
        msg = (
            f"lambda sweep re-solves the whole run per value "
            f"({len(features)} queries x {len(lambdas)} lambdas)"
        )
        warnings.append(msg)
        log.warning(msg)
        for lam in lambdas:
            lam_config = DetectorConfig(
                lambda_=lam,
                tau=config.tau,
                t_g_seconds=config.t_g_seconds,
                fps=config.fps,
                consistency_window_seconds=config.consistency_window_seconds,
                consistency_required=config.consistency_required,
                joint_contribution=config.joint_contribution,
            )
            det = LoopDetector(features[0].dim, lam_config)
            for i, f in enumerate(features):
                det.process_frame(f, timestamp=i / lam_config.fps)
            traces_by_lambda[lam] = det.traces
            dets = evaluation.detections(
                det.hypotheses(), lam_config.consistency_required
            )
            tp, fp, fn = evaluation.score_run(dets, truth)
            pr_lambda.append(evaluation.pr_point(lam, tp, fp, fn))
        evaluation.write_pr_csv(os.path.join(out_dir, "pr_lambda.csv"), pr_lambda)

    nnz = evaluation.nnz_stats(traces_by_lambda)
    with open(os.path.join(out_dir, "nnz.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "min", "mean", "max", "std"])
        for lam in sorted(nnz):
            s = nnz[lam]
            writer.writerow([repr(lam), repr(s["min"]), repr(s["mean"]), repr(s["max"]), repr(s["std"])])

    nn_points = []
    if nn_thresholds:
        matches = evaluation.nn_baseline_matches(features, config.t_g_frames)
        nn_points = evaluation.nn_pr(matches, nn_thresholds, truth)
        evaluation.write_pr_csv(os.path.join(out_dir, "pr_nn.csv"), nn_points)

    timing = evaluation.timing_report(traces)
    with open(os.path.join(out_dir, "timing_summary.json"), "w", encoding="ascii") as fh:
        json.dump(asdict(timing), fh, indent=2, sort_keys=True)
        fh.write("\n")

    return EvalReport(
        pr_tau=pr_tau,
        pr_lambda=pr_lambda,
        nn_pr=nn_points,
        nnz_by_lambda=nnz,
        timing=timing,
        out_dir=out_dir,
        warnings=warnings,
    )


@dataclass
class SynthReport:
    features_path: str
    truth_path: str
    n_frames: int
    n_loops: int
    dim: int


def run_synth(seed, n_frames, n_loops, dim, noise_level, out_dir) -> SynthReport:
    dataset = synth.generate(seed, n_frames, n_loops, dim, noise_level)
    os.makedirs(out_dir, exist_ok=True)
    features_path = os.path.join(out_dir, "features.lcdf")
    truth_path = os.path.join(out_dir, "truth.csv")
    formats.write_lcdf(features_path, dataset.features)
    with open(truth_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j"])
        for i, j in dataset.truth_pairs:
            writer.writerow([i, j])
    with open(os.path.join(out_dir, "synth_config.json"), "w", encoding="ascii") as fh:
        json.dump(
            {
                "seed": seed,
                "n_frames": n_frames,
                "n_loops": n_loops,
                "dim": dim,
                "noise_level": noise_level,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return SynthReport(features_path, truth_path, n_frames, n_loops, dim)
