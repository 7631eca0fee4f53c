"""Two-level scoring and the leave-one-subject-out harness.

Predictions are scored against ground truth twice: per second (every whole
second of predicted chewing against every whole second of labeled chewing)
and per episode (interval matching with an overlap-ratio threshold).  The
cross-validation loop holds each participant out in turn, trains on the
rest, and reports per-participant metrics plus their unweighted means.

Empty-side conventions: with no predictions, precision is 0 unless the
truth is empty too (then 1); recall mirrors this.  F1 is the harmonic mean
and is 0 when precision and recall are both 0 -- so F1 is 1 exactly when
prediction and truth agree at that granularity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boosting import BoostConfig, TrainedModel, classify_candidates, train
from .config import PipelineConfig
from .episodes import (
    DbscanConfig,
    SecondScore,
    cluster,
    episodes_from_clusters,
    score_seconds,
)
from .features import SIGNALS, FeatureTable, extract_table, local_hour
from .peaks import find_prominent_peaks
from .periodic import segment
from .records import (
    LabeledInterval,
    Session,
    covered_seconds,
    derive_episode_labels,
)
from .signals import derive

OVERLAP_BASES = ("truth", "pred", "min")


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0


def _prf(n_matched_pred: int, n_pred: int, n_matched_truth: int, n_truth: int) -> Metrics:
    if n_pred == 0:
        precision = 1.0 if n_truth == 0 else 0.0
    else:
        precision = n_matched_pred / n_pred
    if n_truth == 0:
        recall = 1.0 if n_pred == 0 else 0.0
    else:
        recall = n_matched_truth / n_truth
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        tp=n_matched_pred,
        fp=n_pred - n_matched_pred,
        fn=n_truth - n_matched_truth,
    )


def per_second_metrics(
    pred_seconds: Iterable[int], truth_intervals: Sequence[LabeledInterval]
) -> Metrics:
    """Fine-grained scoring: sets of whole seconds."""
    pred = set(int(s) for s in pred_seconds)
    truth: set[int] = set()
    for iv in truth_intervals:
        truth.update(covered_seconds(iv.start, iv.end))
    tp = len(pred & truth)
    return _prf(tp, len(pred), tp, len(truth))


def _check_disjoint(intervals: Sequence[LabeledInterval], label: str) -> list[LabeledInterval]:
    ordered = sorted(intervals, key=lambda iv: iv.start)
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.start < prev.end:
            raise ValueError(
                f"{label} intervals overlap: [{prev.start}, {prev.end}] and "
                f"[{nxt.start}, {nxt.end}]"
            )
    return ordered


def per_episode_metrics(
    pred: Sequence[LabeledInterval],
    truth: Sequence[LabeledInterval],
    overlap_threshold: float = 0.5,
    base: str = "truth",
) -> Metrics:
    """Coarse scoring: a pair matches when its positive overlap reaches the
    threshold fraction of the base duration (ground-truth episode duration
    by default).  Many-to-one matches are allowed; each truth episode counts
    once for recall.
    """
    if base not in OVERLAP_BASES:
        raise ValueError(f"base must be one of {OVERLAP_BASES}, got {base!r}")
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ValueError(f"overlap_threshold must be in [0, 1], got {overlap_threshold}")
    pred = _check_disjoint(pred, "predicted")
    truth = _check_disjoint(truth, "truth")

    def matched(p: LabeledInterval, t: LabeledInterval) -> bool:
        ov = min(p.end, t.end) - max(p.start, t.start)
        if ov <= 0:
            return False
        if base == "truth":
            ref = t.duration
        elif base == "pred":
            ref = p.duration
        else:
            ref = min(p.duration, t.duration)
        return ov >= overlap_threshold * ref

    tp_pred = sum(1 for p in pred if any(matched(p, t) for t in truth))
    detected = sum(1 for t in truth if any(matched(p, t) for p in pred))
    return _prf(tp_pred, len(pred), detected, len(truth))


@dataclass(frozen=True)
class ParticipantScore:
    participant: str
    second: Metrics
    episode: Metrics
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    """Per-participant scores plus unweighted (macro) averages.

    Average metrics carry macro-mean precision/recall/F1 and summed
    confusion counts.  ``manifest`` snapshots the configuration that
    produced the report; its hash identifies reproducible runs.
    """

    scores: tuple[ParticipantScore, ...]
    second_avg: Metrics
    episode_avg: Metrics
    manifest: tuple[tuple[str, str], ...] = ()

    @property
    def manifest_hash(self) -> str:
        from .config import manifest_hash

        return manifest_hash(list(self.manifest))

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["participant", "level", "precision", "recall", "f1"]]
        entries = list(self.scores) + [
            ParticipantScore("AVERAGE", self.second_avg, self.episode_avg)
        ]
        for entry in entries:
            for level, m in (("second", entry.second), ("episode", entry.episode)):
                rows.append(
                    [entry.participant, level, repr(m.precision), repr(m.recall), repr(m.f1)]
                )
        return rows

    def to_text(self) -> str:
        lines = [f"{'participant':<14}{'level':<10}{'prec':>8}{'recall':>8}{'f1':>8}  flags"]
        entries = list(self.scores) + [
            ParticipantScore("AVERAGE", self.second_avg, self.episode_avg)
        ]
        for entry in entries:
            for level, m in (("second", entry.second), ("episode", entry.episode)):
                lines.append(
                    f"{entry.participant:<14}{level:<10}"
                    f"{m.precision:>8.3f}{m.recall:>8.3f}{m.f1:>8.3f}  "
                    + ",".join(entry.flags)
                )
        if self.manifest:
            lines.append(f"config hash: {self.manifest_hash}")
        return "\n".join(lines)


def _macro(scores: Sequence[ParticipantScore]) -> tuple[Metrics, Metrics]:
    def avg(level: str) -> Metrics:
        ms = [getattr(s, level) for s in scores]
        if not ms:
            return Metrics(0.0, 0.0, 0.0)
        return Metrics(
            precision=float(np.mean([m.precision for m in ms])),
            recall=float(np.mean([m.recall for m in ms])),
            f1=float(np.mean([m.f1 for m in ms])),
            tp=sum(m.tp for m in ms),
            fp=sum(m.fp for m in ms),
            fn=sum(m.fn for m in ms),
        )

    return avg("second"), avg("episode")


# ---------------------------------------------------------------------------
# Pipeline plumbing: raw session -> candidates/features -> predictions.
# ---------------------------------------------------------------------------


def session_candidates(
    session: Session,
    cfg: PipelineConfig,
    signals: Sequence[str] | None = None,
) -> tuple[list, FeatureTable]:
    """Run segmentation + feature extraction for one session."""
    trace = derive(session)
    pks = find_prominent_peaks(trace.prox, trace.t, cfg.min_prominence)
    cands = segment(pks, cfg.sweep(), cfg.min_len)
    table = extract_table(
        trace,
        cands,
        local_hour(cfg.tz_offset_s),
        session.participant,
        chews=session.chew_labels(),
        signals=tuple(signals) if signals else SIGNALS,
        min_prominence=cfg.min_prominence,
        sample_rate_hz=cfg.sample_rate_hz,
        label_min_overlap=cfg.candidate_label_min_overlap,
    )
    return cands, table


def predict_session(
    model: TrainedModel,
    cands: Sequence,
    table: FeatureTable,
    dbscan_cfg: DbscanConfig,
    threshold: float,
    delta: float,
) -> tuple[list[SecondScore], list[LabeledInterval]]:
    """Classifier output -> scored seconds and merged predicted episodes."""
    judged = classify_candidates(model, cands, table.X, threshold, table.names)
    positives = [c for c, positive, _ in judged if positive]
    scores = score_seconds(positives)
    clusters = cluster(scores, dbscan_cfg)
    participant = table.participant[0] if table.participant else ""
    episodes = episodes_from_clusters(clusters, delta, participant)
    return scores, episodes


def score_participant(
    scores: Sequence[SecondScore],
    episodes: Sequence[LabeledInterval],
    session: Session,
    cfg: PipelineConfig,
    flags: Sequence[str] = (),
) -> ParticipantScore:
    chews = session.chew_labels()
    truth_episodes = derive_episode_labels(chews, cfg.delta) if chews else []
    second = per_second_metrics([s.second for s in scores], chews)
    episode = per_episode_metrics(
        list(episodes),
        truth_episodes,
        cfg.episode_overlap_threshold,
        cfg.episode_overlap_base,
    )
    return ParticipantScore(
        participant=session.participant, second=second, episode=episode, flags=tuple(flags)
    )


def train_fold(
    tables: Sequence[FeatureTable],
    boost_cfg: BoostConfig,
) -> TrainedModel:
    """Train one fold's model from the training participants' tables only."""
    if not tables:
        raise ValueError("no training tables")
    names = tables[0].names
    for tb in tables:
        if tb.names != names:
            raise ValueError("feature layouts differ across training tables")
    X = np.vstack([tb.X for tb in tables]) if tables else np.zeros((0, len(names)))
    y = np.concatenate([tb.label for tb in tables])
    if np.any(y < 0):
        raise ValueError("training tables contain unlabeled candidates")
    return train(X, y, boost_cfg, names)


@dataclass
class _Prepared:
    session: Session
    cands: list
    table: FeatureTable


def _prepare_all(
    sessions: Sequence[Session], cfg: PipelineConfig, signals: Sequence[str] | None
) -> list[_Prepared]:
    prepared = []
    for session in sessions:
        cands, table = session_candidates(session, cfg, signals)
        prepared.append(_Prepared(session=session, cands=cands, table=table))
    return prepared


def _evaluate_one(
    model: TrainedModel,
    item: _Prepared,
    dbscan_cfg: DbscanConfig,
    cfg: PipelineConfig,
) -> ParticipantScore:
    flags = []
    if not item.cands:
        flags.append("no_candidates")
        scores: list[SecondScore] = []
        episodes: list[LabeledInterval] = []
    else:
        scores, episodes = predict_session(
            model, item.cands, item.table, dbscan_cfg, cfg.threshold, cfg.delta
        )
    return score_participant(scores, episodes, item.session, cfg, flags)


def _grid_points(
    boost_grid: Sequence[BoostConfig], dbscan_grid: Sequence[DbscanConfig]
) -> list[tuple[BoostConfig, DbscanConfig]]:
    return [(b, d) for b in boost_grid for d in dbscan_grid]


def losocv(
    sessions: Sequence[Session],
    boost_grid: Sequence[BoostConfig] | None = None,
    dbscan_grid: Sequence[DbscanConfig] | None = None,
    cfg: PipelineConfig = PipelineConfig(),
    signals: Sequence[str] | None = None,
) -> EvalReport:
    """Leave-one-subject-out evaluation with optional inner grid selection.

    Each fold trains on every other participant.  With more than one grid
    point, the point is chosen by a nested leave-one-out over the training
    participants only (mean of the two F1 levels; ties keep grid order), so
    the held-out participant never influences its own fold.
    """
    participants = [s.participant for s in sessions]
    if len(participants) != len(set(participants)):
        raise ValueError("duplicate participant ids across sessions")
    if len(sessions) < 2:
        raise ValueError(f"LOSOCV needs at least 2 participants, got {len(sessions)}")
    boost_grid = list(boost_grid) if boost_grid else [cfg.boost()]
    dbscan_grid = list(dbscan_grid) if dbscan_grid else [cfg.dbscan()]
    grid = _grid_points(boost_grid, dbscan_grid)

    prepared = _prepare_all(sessions, cfg, signals)
    scores: list[ParticipantScore] = []
    for held_idx, held in enumerate(prepared):
        train_items = [p for i, p in enumerate(prepared) if i != held_idx]
        chosen = grid[0]
        if len(grid) > 1 and len(train_items) >= 2:
            chosen = _select_grid_point(train_items, grid, cfg)
        model = train_fold([p.table for p in train_items], chosen[0])
        scores.append(_evaluate_one(model, held, chosen[1], cfg))
    second_avg, episode_avg = _macro(scores)
    return EvalReport(
        scores=tuple(scores),
        second_avg=second_avg,
        episode_avg=episode_avg,
        manifest=tuple(cfg.manifest_items()),
    )


def _select_grid_point(
    train_items: Sequence[_Prepared],
    grid: Sequence[tuple[BoostConfig, DbscanConfig]],
    cfg: PipelineConfig,
) -> tuple[BoostConfig, DbscanConfig]:
    best_score = -1.0
    best = grid[0]
    for point in grid:
        boost_cfg, dbscan_cfg = point
        fold_scores = []
        for inner_idx, inner_held in enumerate(train_items):
            inner_train = [p for i, p in enumerate(train_items) if i != inner_idx]
            try:
                model = train_fold([p.table for p in inner_train], boost_cfg)
            except ValueError:
                continue  # degenerate inner fold (single-class); skip its vote
            ps = _evaluate_one(model, inner_held, dbscan_cfg, cfg)
            fold_scores.append((ps.second.f1 + ps.episode.f1) / 2.0)
        if fold_scores:
            mean_score = float(np.mean(fold_scores))
            if mean_score > best_score:
                best_score = mean_score
                best = point
    return best


def ablate_sensors(
    sessions: Sequence[Session],
    sensors: Sequence[str],
    boost_grid: Sequence[BoostConfig] | None = None,
    dbscan_grid: Sequence[DbscanConfig] | None = None,
    cfg: PipelineConfig = PipelineConfig(),
) -> EvalReport:
    """LOSOCV with features restricted to a sensor subset.

    Proximity must stay in the subset: segmentation runs on it.
    """
    sensors = tuple(sensors)
    if not sensors:
        raise ValueError("sensor subset must be non-empty")
    if "prox" not in sensors:
        raise ValueError("sensor subset must include 'prox'; segmentation needs it")
    return losocv(sessions, boost_grid, dbscan_grid, cfg, signals=sensors)


def write_report_csv(path: str | Path, report: EvalReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(report.to_csv_rows())
