import numpy as np
import pytest

from chewdet.boosting import BoostConfig
from chewdet.evaluation import (
    ablate_sensors,
    losocv,
    per_episode_metrics,
    per_second_metrics,
    session_candidates,
    train_fold,
)
from chewdet.records import IntervalKind, LabeledInterval
from conftest import quick_config


def episode(start, end, participant="P1"):
    return LabeledInterval(start, end, IntervalKind.EPISODE, participant)


def chew(start, end, participant="P1"):
    return LabeledInterval(start, end, IntervalKind.CHEW, participant)


class TestPerSecond:
    def test_perfect_agreement(self):
        m = per_second_metrics(set(range(100)), [chew(0, 100)])
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_half_coverage(self):
        m = per_second_metrics(set(range(50)), [chew(0, 100)])
        assert m.precision == 1.0
        assert m.recall == 0.5
        assert m.f1 == pytest.approx(2 / 3)

    def test_half_precision_half_recall(self):
        pred = set(range(0, 50)) | set(range(200, 250))
        m = per_second_metrics(pred, [chew(0, 100)])
        assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)

    def test_empty_prediction_conventions(self):
        with_truth = per_second_metrics(set(), [chew(0, 10)])
        assert (with_truth.precision, with_truth.recall, with_truth.f1) == (0.0, 0.0, 0.0)
        both_empty = per_second_metrics(set(), [])
        assert (both_empty.precision, both_empty.recall, both_empty.f1) == (1.0, 1.0, 1.0)

    def test_empty_truth_with_predictions(self):
        m = per_second_metrics({1, 2}, [])
        assert (m.precision, m.recall) == (0.0, 0.0)

    def test_translation_invariance(self):
        pred = set(range(10, 60))
        truth = [chew(5, 55)]
        base = per_second_metrics(pred, truth)
        moved = per_second_metrics(
            {s + 4096 for s in pred}, [chew(5 + 4096, 55 + 4096)]
        )
        assert base == moved


class TestPerEpisode:
    def test_identical_lists(self):
        eps = [episode(0, 100), episode(500, 700)]
        m = per_episode_metrics(eps, eps)
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_half_overlap_counts_at_default_threshold(self):
        # 50 s of a 100 s truth episode: ratio is exactly 0.5 and >= wins.
        m = per_episode_metrics([episode(0, 50)], [episode(0, 100)])
        assert m.recall == 1.0
        assert m.precision == 1.0

    def test_spurious_prediction_is_false_positive(self):
        m = per_episode_metrics(
            [episode(0, 100), episode(500, 600)], [episode(0, 100)]
        )
        assert m.precision == 0.5
        assert m.recall == 1.0
        assert m.f1 == pytest.approx(2 / 3)

    def test_zero_overlap_never_matches(self):
        m = per_episode_metrics([episode(200, 300)], [episode(0, 100)], overlap_threshold=0.0)
        assert m.precision == 0.0
        assert m.recall == 0.0

    def test_overlapping_predictions_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            per_episode_metrics([episode(0, 100), episode(50, 150)], [episode(0, 100)])

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(1)
        pred, truth = [], []
        t = 0.0
        for _ in range(12):
            start = t + float(rng.uniform(0, 50))
            dur = float(rng.uniform(20, 120))
            truth.append(episode(start, start + dur))
            shift = float(rng.uniform(-30, 30))
            pred.append(episode(start + shift, start + shift + dur * float(rng.uniform(0.4, 1.2))))
            t = max(truth[-1].end, pred[-1].end) + 10.0
        previous = None
        for thr in np.linspace(0.0, 1.0, 11):
            m = per_episode_metrics(pred, truth, overlap_threshold=float(thr))
            if previous is not None:
                assert m.precision <= previous.precision + 1e-12
                assert m.recall <= previous.recall + 1e-12
            previous = m

    def test_base_variants(self):
        # Long prediction over a short truth: full truth coverage but only
        # a sliver of the prediction.
        pred = [episode(0, 1000)]
        truth = [episode(0, 100)]
        by_truth = per_episode_metrics(pred, truth, base="truth")
        assert by_truth.recall == 1.0
        by_pred = per_episode_metrics(pred, truth, base="pred")
        assert by_pred.recall == 0.0
        by_min = per_episode_metrics(pred, truth, base="min")
        assert by_min.recall == 1.0

    def test_many_to_one_counts_truth_once(self):
        # Both halves clear the 50 s bar against the one 100 s truth
        # episode: two TP predictions, one detected truth.
        pred = [episode(0, 50), episode(50, 100)]
        truth = [episode(0, 100)]
        m = per_episode_metrics(pred, truth)
        assert m.recall == 1.0
        assert m.precision == 1.0
        assert m.tp == 2
        assert m.fn == 0


class TestPipeline:
    def test_candidates_and_labels_on_clean_session(self, clean_sessions):
        cfg = quick_config()
        session = clean_sessions[0]
        cands, table = session_candidates(session, cfg)
        assert len(cands) == len(table)
        assert len(table.names) == 257
        labels = table.label
        assert set(labels.tolist()) == {0, 1}  # talking gives negatives

    def test_losocv_on_identical_clean_participants(self, clean_sessions):
        cfg = quick_config()
        report = losocv(clean_sessions, cfg=cfg)
        assert report.second_avg.f1 == pytest.approx(1.0)
        assert report.episode_avg.f1 == pytest.approx(1.0)

    def test_losocv_requires_two_participants(self, clean_sessions):
        with pytest.raises(ValueError, match="at least 2"):
            losocv(clean_sessions[:1], cfg=quick_config())

    def test_always_negative_threshold_conventions(self, clean_sessions):
        # threshold > 1 turns the classifier into an always-negative stub.
        cfg = quick_config(threshold=1.01)
        report = losocv(clean_sessions, cfg=cfg)
        for score in report.scores:
            assert score.second.recall == 0.0
            assert score.second.precision == 0.0  # truth non-empty, no preds

    def test_fold_isolation_against_poisoned_holdout(self, clean_sessions):
        # Retraining with a corrupted copy of the held-out participant must
        # leave the fold's model untouched.
        from chewdet.boosting import model_to_text
        from chewdet.records import Session

        cfg = quick_config()
        prepared = [session_candidates(s, cfg) for s in clean_sessions]
        tables = [t for _, t in prepared]
        model_before = train_fold([tables[0]], cfg.boost())

        poisoned = clean_sessions[1]
        poisoned = Session(
            participant=poisoned.participant,
            t=poisoned.t,
            prox=np.asarray(poisoned.prox) + 17.0,
            ambient=poisoned.ambient,
            quat=poisoned.quat,
            accel=poisoned.accel,
            labels=poisoned.labels,
        )
        _ = session_candidates(poisoned, cfg)
        model_after = train_fold([tables[0]], cfg.boost())
        assert model_to_text(model_before) == model_to_text(model_after)

    def test_grid_selection_is_deterministic(self, clean_sessions):
        cfg = quick_config()
        grid = [cfg.boost(), BoostConfig(**{**cfg.boost().__dict__, "n_rounds": 20})]
        a = losocv(clean_sessions, boost_grid=grid, cfg=cfg)
        b = losocv(clean_sessions, boost_grid=grid, cfg=cfg)
        assert a.to_csv_rows() == b.to_csv_rows()

    def test_report_rows_and_average(self, clean_sessions):
        report = losocv(clean_sessions, cfg=quick_config())
        rows = report.to_csv_rows()
        assert rows[0] == ["participant", "level", "precision", "recall", "f1"]
        participants = {r[0] for r in rows[1:]}
        assert participants == {"P1", "P2", "AVERAGE"}
        # macro average equals the mean of the per-participant values
        seconds = [s.second.f1 for s in report.scores]
        assert report.second_avg.f1 == pytest.approx(float(np.mean(seconds)))


class TestAblation:
    def test_subset_must_include_proximity(self, clean_sessions):
        with pytest.raises(ValueError, match="prox"):
            ablate_sensors(clean_sessions, ("ambient",), cfg=quick_config())

    def test_empty_subset_rejected(self, clean_sessions):
        with pytest.raises(ValueError, match="non-empty"):
            ablate_sensors(clean_sessions, (), cfg=quick_config())

    def test_proximity_only_layout_shrinks(self, clean_sessions):
        cfg = quick_config()
        cands, table = session_candidates(clean_sessions[0], cfg, signals=("prox",))
        assert len(table.names) == 65

    def test_full_set_not_worse_than_proximity_only(self, noisy_sessions):
        cfg = quick_config()
        full = losocv(noisy_sessions, cfg=cfg)
        prox_only = ablate_sensors(noisy_sessions, ("prox",), cfg=cfg)
        assert full.episode_avg.f1 >= prox_only.episode_avg.f1 - 1e-12
