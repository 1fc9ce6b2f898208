import math

import numpy as np
import pytest

from loopsparse.detector import (
    DetectorConfig,
    LoopDetector,
    QueryTrace,
    image_scores,
    joint_scores,
    pick_hypothesis,
    replay_decisions,
    sparsity_matrix,
)
from loopsparse.errors import DimensionMismatch
from loopsparse.features import FeatureVector, unit_feature
from loopsparse import synth

from conftest import random_unit


def iid_stream(rng, n_frames, dim):
    return [random_unit(rng, dim) for _ in range(n_frames)]


def make_trace(query_index, alpha_hat, n, m):
    return QueryTrace(
        query_index=query_index,
        alpha_hat=alpha_hat,
        nnz=len(alpha_hat),
        solve_time=0.0,
        hypotheses=[],
        m=m,
        width=n + m,
        lambda_max=1.0,
    )


class TestProcessFrame:
    def test_first_frame_no_hypotheses(self, rng):
        det = LoopDetector(16)
        trace = det.process_frame(random_unit(rng, 16))
        assert trace.hypotheses == []
        assert trace.alpha_hat == {}
        assert det.dictionary.m == 1

    def test_exploration_concentrates_on_gated_neighbor(self, rng):
        det = LoopDetector(32, DetectorConfig(t_g_seconds=5, fps=1))
        prev = random_unit(rng, 32)
        det.process_frame(prev)
        noisy = unit_feature(prev.values + 0.01 * rng.standard_normal(32))
        trace = det.process_frame(noisy)
        scores = image_scores(trace.alpha_hat, 32)
        assert max(scores, key=scores.get) == 0  # neighbor dominates
        assert scores[0] > 0.99
        assert trace.hypotheses == []  # but the gate suppresses it

    def test_planted_revisit_single_accepted_hypothesis(self, rng):
        det = LoopDetector(64, DetectorConfig(t_g_seconds=3, fps=1, consistency_required=False))
        frames = iid_stream(rng, 12, 64)
        target = frames[2]
        for f in frames:
            det.process_frame(f)
        trace = det.process_frame(target)
        assert len(trace.hypotheses) == 1
        hyp = trace.hypotheses[0]
        assert hyp.match_index == 2
        assert hyp.score > 0.99
        assert hyp.accepted

    def test_timestamps_must_be_nondecreasing(self, rng):
        det = LoopDetector(8)
        det.process_frame(random_unit(rng, 8), timestamp=5.0)
        with pytest.raises(ValueError):
            det.process_frame(random_unit(rng, 8), timestamp=4.0)

    def test_dimension_mismatch(self, rng):
        det = LoopDetector(8)
        with pytest.raises(DimensionMismatch):
            det.process_frame(random_unit(rng, 9))

    def test_freeze_stops_dictionary_growth(self, rng):
        det = LoopDetector(16)
        for f in iid_stream(rng, 3, 16):
            det.process_frame(f)
        det.freeze()
        for f in iid_stream(rng, 4, 16):
            det.process_frame(f)
        assert det.dictionary.m == 3
        assert det.query_count == 7


class TestInvariants:
    def test_alpha_hat_unit_norm_or_zero(self, rng):
        ds = synth.generate(1, 120, 8, 64, 0.1)
        det = LoopDetector(64)
        for f in ds.feature_list():
            det.process_frame(f)
        for trace in det.traces:
            if trace.alpha_hat:
                norm = math.sqrt(sum(v * v for v in trace.alpha_hat.values()))
                assert abs(norm - 1.0) <= 1e-9
            else:
                assert trace.nnz == 0

    def test_at_most_one_hypothesis_per_query(self, rng):
        ds = synth.generate(2, 150, 10, 64, 0.2)
        det = LoopDetector(64)
        for f in ds.feature_list():
            det.process_frame(f)
        for trace in det.traces:
            assert len(trace.hypotheses) <= 1
            # two entries of a unit vector cannot both exceed 1/sqrt(2)
            super_entries = [v for v in trace.alpha_hat.values() if v > 0.7072]
            assert len(super_entries) <= 1

    def test_temporal_gate_never_violated(self, rng):
        ds = synth.generate(3, 150, 10, 64, 0.1)
        cfg = DetectorConfig(t_g_seconds=10, fps=1)
        det = LoopDetector(64, cfg)
        for f in ds.feature_list():
            det.process_frame(f)
        for hyp in det.hypotheses():
            assert abs(hyp.query_index - hyp.match_index) > cfg.t_g_frames

    def test_determinism(self, rng):
        ds = synth.generate(4, 100, 6, 48, 0.1)
        runs = []
        for _ in range(2):
            det = LoopDetector(48)
            for f in ds.feature_list():
                det.process_frame(f)
            runs.append(
                [(h.query_index, h.match_index, h.score, h.accepted) for h in det.hypotheses()]
            )
        assert runs[0] == runs[1]

    def test_repeated_queries_match_earliest_occurrence(self, rng):
        stream = synth.repeated_visit_stream(5, 6, 4, 32)
        det = LoopDetector(32, DetectorConfig(t_g_seconds=2, fps=1, consistency_required=False))
        for row in stream:
            det.process_frame(FeatureVector(row))
        for hyp in det.hypotheses():
            assert hyp.match_index == hyp.query_index % 6


class TestConsistencyFilter:
    def config(self):
        return DetectorConfig(t_g_seconds=5, fps=1, consistency_window_seconds=3)

    def run(self, hyp_specs):
        """Feed crafted traces through replay to exercise only the filter."""
        traces = []
        for qi, match, score in hyp_specs:
            traces.append(make_trace(qi, {64 + match: score}, 64, qi))
        return replay_decisions(traces, self.config(), tau=0.9)

    def test_isolated_hypothesis_rejected(self):
        hyps = self.run([(20, 3, 0.995)])
        assert len(hyps) == 1 and not hyps[0].accepted

    def test_pair_confirms_retroactively(self):
        hyps = self.run([(20, 3, 0.995), (21, 4, 0.995)])
        assert [h.accepted for h in hyps] == [True, True]

    def test_support_requires_both_windows(self):
        # queries adjacent but matches far apart: no support
        hyps = self.run([(20, 3, 0.995), (21, 40, 0.995)])
        assert [h.accepted for h in hyps] == [False, False]
        # matches adjacent but queries far apart: no support
        hyps = self.run([(20, 3, 0.995), (40, 4, 0.995)])
        assert [h.accepted for h in hyps] == [False, False]

    def test_disabled_filter_accepts_everything(self):
        cfg = DetectorConfig(consistency_required=False)
        traces = [make_trace(20, {64 + 3: 0.995}, 64, 20)]
        hyps = replay_decisions(traces, cfg, tau=0.9)
        assert hyps[0].accepted


class TestJointScores:
    def test_empty_graph_unchanged(self):
        trace = make_trace(30, {64 + 5: 0.6, 64 + 9: 0.7}, 64, 30)
        assert joint_scores(trace, set()) == {5: 0.6, 9: 0.7}

    def test_group_sum_emits_on_earliest(self):
        trace = make_trace(30, {64 + 5: 0.6, 64 + 9: 0.55}, 64, 30)
        adjusted = joint_scores(trace, {(9, 5)})
        assert adjusted == {5: pytest.approx(1.15)}
        hyp = pick_hypothesis(adjusted, 30, tau=0.9, t_g_frames=3)
        assert hyp is not None and hyp.match_index == 5
        assert hyp.score == pytest.approx(1.15)

    def test_unconnected_frames_stay_separate(self):
        trace = make_trace(30, {64 + 5: 0.6, 64 + 9: 0.6}, 64, 30)
        adjusted = joint_scores(trace, {(20, 25)})
        assert pick_hypothesis(adjusted, 30, tau=0.9, t_g_frames=3) is None

    def test_transitive_closure(self):
        trace = make_trace(50, {64 + 1: 0.4, 64 + 7: 0.4, 64 + 13: 0.35}, 64, 50)
        adjusted = joint_scores(trace, {(7, 1), (13, 7)})
        assert adjusted == {1: pytest.approx(1.15)}

    def test_third_visit_detected_end_to_end(self, rng):
        # place revisited twice: second revisit splits between the original
        # and the first revisit, and only the joint mode recovers it
        dim = 96
        base = iid_stream(rng, 10, dim)
        place = base[1]
        jitter = unit_feature(place.values + 0.02 * rng.standard_normal(dim))

        def run(joint):
            cfg = DetectorConfig(
                t_g_seconds=3,
                fps=1,
                consistency_required=False,
                joint_contribution=joint,
                tau=0.95,
            )
            det = LoopDetector(dim, cfg)
            for f in base:
                det.process_frame(f)
            det.process_frame(jitter)  # first revisit: accepted, links (10, 1)
            for f in iid_stream(rng, 5, dim):
                det.process_frame(f)
            trace = det.process_frame(place)  # second revisit
            return det, trace

        det, trace = run(joint=True)
        assert any(h.query_index == 10 for h in det.hypotheses())
        final = [h for h in trace.hypotheses]
        assert len(final) == 1
        assert final[0].match_index == 1

    def test_spec_signature_accepts_trace(self):
        trace = make_trace(30, {64 + 2: 0.8}, 64, 30)
        assert joint_scores(trace, frozenset()) == {2: 0.8}


class TestSparsityMatrix:
    def test_exploration_band_within_gate(self, rng):
        ds = synth.generate(6, 80, 4, 48, 0.0)
        cfg = DetectorConfig(t_g_seconds=10, fps=1)
        det = LoopDetector(48, cfg)
        for f in ds.feature_list():
            det.process_frame(f)
        mat = sparsity_matrix(det.traces, 0.99)
        revisit_queries = {i for i, _ in ds.truth_pairs}
        for row, col in mat.entries:
            if col in revisit_queries:
                continue
            assert row >= 48  # image entries only at this threshold
            assert col - (row - 48) <= cfg.t_g_frames

    def test_repeated_visits_map_to_first_block(self):
        stream = synth.repeated_visit_stream(8, 10, 5, 32)
        det = LoopDetector(32, DetectorConfig(t_g_seconds=2, fps=1))
        for row in stream:
            det.process_frame(FeatureVector(row))
        mat = sparsity_matrix(det.traces, 0.99)
        loop_entries = [(r, c) for r, c in mat.entries if c >= 10]
        assert loop_entries
        assert all(r - 32 < 10 for r, c in loop_entries)
        assert all((r - 32) == c % 10 for r, c in loop_entries)

    def test_empty_run(self):
        mat = sparsity_matrix([], 0.9)
        assert mat.entries == [] and mat.rows == 0 and mat.cols == 0


class TestConfig:
    def test_tau_range_validated(self):
        with pytest.raises(ValueError):
            DetectorConfig(tau=0.5)
        with pytest.raises(ValueError):
            DetectorConfig(tau=1.0001)

    def test_frame_conversions_ceil(self):
        cfg = DetectorConfig(t_g_seconds=10, fps=0.35)
        assert cfg.t_g_frames == math.ceil(3.5)
        assert cfg.consistency_window_frames == cfg.t_g_frames
        cfg2 = DetectorConfig(t_g_seconds=10, fps=1, consistency_window_seconds=2.2)
        assert cfg2.consistency_window_frames == 3
