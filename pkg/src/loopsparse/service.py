"""HTTP service wrapping the detection toolkit.

Batch endpoints (detect / eval / synth) execute a run against files on the
server's filesystem and return a summary; the artifacts land in the
requested output directory. The session endpoints expose the online mode:
create a session, stream frames one at a time, read hypotheses back. The
bundled CLI is a thin client of these endpoints.
"""

import threading
import uuid
from dataclasses import asdict

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import runs
from .detector import DetectorConfig, LoopDetector
from .errors import LoopSparseError
from .features import FeatureVector, unit_feature

app = FastAPI(title="loopsparse", version="0.1.0")


class DetectRequest(BaseModel):
    out_dir: str
    input_dir: str | None = None
    descriptor_paths: list[str] = Field(default_factory=list)
    stack: bool = False
    rows: int = 8
    cols: int = 6
    lam: float = Field(0.5, alias="lambda")
    tau: float = 0.99
    t_g_seconds: float = 10.0
    fps: float = 1.0
    stride: int = 1
    consistency: bool = True
    joint: bool = False
    two_phase: int | None = None

    model_config = {"populate_by_name": True}


class TimingModel(BaseModel):
    min_ms: float
    mean_ms: float
    max_ms: float
    std_ms: float
    final_width: int
    queries: int


class DetectResponse(BaseModel):
    archive_dir: str
    queries: int
    emitted: int
    accepted: int
    timing: TimingModel


class EvalRequest(BaseModel):
    archive_dir: str
    truth_path: str
    out_dir: str
    taus: list[float] = Field(default_factory=lambda: list(runs.DEFAULT_TAUS))
    lambdas: list[float] = Field(default_factory=list)
    nn_thresholds: list[float] = Field(default_factory=list)
    tolerance_frames: int = 5


class PRPointModel(BaseModel):
    parameter: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


class EvalResponse(BaseModel):
    out_dir: str
    pr_tau: list[PRPointModel]
    pr_lambda: list[PRPointModel]
    nn_pr: list[PRPointModel]
    nnz_by_lambda: dict[str, dict[str, float]]
    timing: TimingModel
    warnings: list[str]


class SynthRequest(BaseModel):
    out_dir: str
    seed: int = 0
    n_frames: int = 200
    n_loops: int = 20
    dim: int = 128
    noise_level: float = 0.05


class SynthResponse(BaseModel):
    features_path: str
    truth_path: str
    n_frames: int
    n_loops: int
    dim: int


class SessionRequest(BaseModel):
    dim: int
    lam: float = Field(0.5, alias="lambda")
    tau: float = 0.99
    t_g_seconds: float = 10.0
    fps: float = 1.0
    consistency: bool = True
    joint: bool = False

    model_config = {"populate_by_name": True}


class SessionInfo(BaseModel):
    session_id: str
    dim: int
    queries: int
    dictionary_columns: int


class HypothesisModel(BaseModel):
    query_index: int
    match_index: int
    score: float
    accepted: bool


class FrameRequest(BaseModel):
    values: list[float]
    timestamp: float | None = None
    normalize: bool = True


class FrameResponse(BaseModel):
    query_index: int
    hypotheses: list[HypothesisModel]
    nnz: int
    solve_ms: float
    lambda_max: float


_sessions: dict = {}
_sessions_lock = threading.Lock()


class _Session:
    def __init__(self, detector):
        self.detector = detector
        self.lock = threading.Lock()


def _get_session(session_id) -> _Session:
    with _sessions_lock:
        session = _sessions.get(session_id)
    if session is None:
        raise HTTPException(status_code=404, detail=f"no session {session_id}")
    return session


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/detect", response_model=DetectResponse)
def detect(req: DetectRequest):
    try:
        cfg = runs.RunConfig(
            out_dir=req.out_dir,
            input_dir=req.input_dir,
            descriptor_paths=tuple(req.descriptor_paths),
            stack=req.stack,
            rows=req.rows,
            cols=req.cols,
            lambda_=req.lam,
            tau=req.tau,
            t_g_seconds=req.t_g_seconds,
            fps=req.fps,
            stride=req.stride,
            consistency=req.consistency,
            joint=req.joint,
            two_phase=req.two_phase,
        )
        report = runs.run_detect(cfg)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (LoopSparseError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return DetectResponse(
        archive_dir=report.archive_dir,
        queries=report.queries,
        emitted=report.emitted,
        accepted=report.accepted,
        timing=TimingModel(**asdict(report.timing)),
    )


@app.post("/eval", response_model=EvalResponse)
def evaluate(req: EvalRequest):
    try:
        report = runs.run_eval(
            req.archive_dir,
            req.truth_path,
            req.out_dir,
            taus=req.taus,
            lambdas=req.lambdas,
            nn_thresholds=req.nn_thresholds,
            tolerance_frames=req.tolerance_frames,
        )
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (LoopSparseError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc

    def points(seq):
        return [PRPointModel(**asdict(p)) for p in seq]

    return EvalResponse(
        out_dir=report.out_dir,
        pr_tau=points(report.pr_tau),
        pr_lambda=points(report.pr_lambda),
        nn_pr=points(report.nn_pr),
        nnz_by_lambda={repr(k): v for k, v in report.nnz_by_lambda.items()},
        timing=TimingModel(**asdict(report.timing)),
        warnings=report.warnings,
    )


@app.post("/synth", response_model=SynthResponse)
def synthesize(req: SynthRequest):
    try:
        report = runs.run_synth(
            req.seed, req.n_frames, req.n_loops, req.dim, req.noise_level, req.out_dir
        )
    except (LoopSparseError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return SynthResponse(**asdict(report))


@app.post("/sessions", response_model=SessionInfo)
def create_session(req: SessionRequest):
    try:
        config = DetectorConfig(
            lambda_=req.lam,
            tau=req.tau,
            t_g_seconds=req.t_g_seconds,
            fps=req.fps,
            consistency_required=req.consistency,
            joint_contribution=req.joint,
        )
        detector = LoopDetector(req.dim, config)
    except (LoopSparseError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    session_id = uuid.uuid4().hex
    with _sessions_lock:
        _sessions[session_id] = _Session(detector)
    return SessionInfo(
        session_id=session_id, dim=req.dim, queries=0, dictionary_columns=0
    )


@app.get("/sessions/{session_id}", response_model=SessionInfo)
def session_info(session_id: str):
    session = _get_session(session_id)
    det = session.detector
    return SessionInfo(
        session_id=session_id,
        dim=det.dictionary.n,
        queries=det.query_count,
        dictionary_columns=det.dictionary.m,
    )


@app.post("/sessions/{session_id}/frames", response_model=FrameResponse)
def push_frame(session_id: str, req: FrameRequest):
    session = _get_session(session_id)
    try:
        values = np.asarray(req.values, dtype=np.float64)
        if req.normalize:
            f = unit_feature(values, source_tag="session")
        else:
            f = FeatureVector(values, source_tag="session")
        with session.lock:
            trace = session.detector.process_frame(f, timestamp=req.timestamp)
    except (LoopSparseError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return FrameResponse(
        query_index=trace.query_index,
        hypotheses=[HypothesisModel(**asdict(h)) for h in trace.hypotheses],
        nnz=trace.nnz,
        solve_ms=trace.solve_time * 1000.0,
        lambda_max=trace.lambda_max,
    )


@app.get("/sessions/{session_id}/hypotheses", response_model=list[HypothesisModel])
def session_hypotheses(session_id: str, accepted_only: bool = False):
    session = _get_session(session_id)
    with session.lock:
        hyps = session.detector.hypotheses(accepted_only=accepted_only)
        return [HypothesisModel(**asdict(h)) for h in hyps]


@app.delete("/sessions/{session_id}")
def close_session(session_id: str):
    with _sessions_lock:
        if _sessions.pop(session_id, None) is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
    return {"closed": session_id}
