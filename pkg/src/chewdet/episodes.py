"""From positive candidates to predicted eating episodes.

Positive candidate subsequences are first flattened into per-second scores
(how many candidates cover each whole second), then clustered with a 1-D
DBSCAN so isolated or sparse detections drop out as noise, and finally the
surviving clusters are merged into episode intervals with the same gap
rule used to derive ground-truth episodes.

The DBSCAN here exploits sorted 1-D input: neighborhoods are contiguous
index windows, so core flags come from prefix sums and clusters from a
single left-to-right pass.  Border points reachable from two clusters join
the leftmost one, matching a textbook implementation that scans points in
ascending order.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .records import IntervalKind, LabeledInterval, covered_seconds, merge_intervals


@dataclass(frozen=True)
class SecondScore:
    """One scored second: how many positive candidates cover it."""

    second: int
    score: int

    def __post_init__(self) -> None:
        if self.score < 1:
            raise ValueError(f"scores are counts >= 1, got {self.score}")


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 30.0
    min_pts: int = 15
    use_score_weight: bool = True

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


def score_seconds(positives: Sequence) -> list[SecondScore]:
    """Per-second overlap counts over all positive candidates, sorted.

    A second counts when the closed interval [s, s+1) touches the candidate
    span at all, so a candidate ending exactly on an integer still scores
    that second.
    """
    counts: Counter[int] = Counter()
    for cand in positives:
        if not cand.c2 > cand.c1:
            raise ValueError(f"candidate needs c2 > c1, got [{cand.c1}, {cand.c2}]")
        counts.update(range(math.floor(cand.c1), math.floor(cand.c2) + 1))
    return [SecondScore(second=s, score=counts[s]) for s in sorted(counts)]


def cluster(scores: Sequence[SecondScore], cfg: DbscanConfig) -> list[tuple[int, ...]]:
    """DBSCAN over scored seconds; returns clusters as sorted second tuples.

    With ``use_score_weight`` set, a neighbor contributes its score to the
    neighborhood mass instead of counting once; the point itself is part of
    its own neighborhood either way.  Noise points are dropped.
    """
    if not scores:
        return []
    pts = np.array([s.second for s in scores], dtype=float)
    if not np.all(np.diff(pts) > 0):
        raise ValueError("scores must be sorted by second with no duplicates")
    weights = (
        np.array([s.score for s in scores], dtype=float)
        if cfg.use_score_weight
        else np.ones(len(scores))
    )
    lo = np.searchsorted(pts, pts - cfg.eps, side="left")
    hi = np.searchsorted(pts, pts + cfg.eps, side="right")
    prefix = np.concatenate([[0.0], np.cumsum(weights)])
    mass = prefix[hi] - prefix[lo]
    core = mass >= cfg.min_pts

    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return []
    # Chains of cores within eps of each other form the cluster spines.
    breaks = np.flatnonzero(np.diff(pts[core_idx]) > cfg.eps)
    spines = np.split(core_idx, breaks + 1)
    assignment = np.full(len(scores), -1, dtype=int)
    for label, spine in enumerate(spines):
        assignment[spine] = label
    core_pos = pts[core_idx]
    for i in np.flatnonzero(~core):
        # Border point: joins the leftmost core within eps, if any.
        k = int(np.searchsorted(core_pos, pts[i] - cfg.eps, side="left"))
        if k < core_idx.size and core_pos[k] - pts[i] <= cfg.eps:
            assignment[i] = assignment[core_idx[k]]
    clusters: dict[int, list[int]] = {}
    for i, label in enumerate(assignment):
        if label >= 0:
            clusters.setdefault(int(label), []).append(int(pts[i]))
    return [tuple(sorted(members)) for _, members in sorted(clusters.items())]


def episodes_from_clusters(
    clusters: Sequence[Sequence[int]], delta: float, participant: str = ""
) -> list[LabeledInterval]:
    """Clusters of seconds -> episode intervals, merging gaps <= delta."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    spans = []
    seen: set[int] = set()
    for members in clusters:
        if not members:
            raise ValueError("empty cluster")
        if seen & set(members):
            raise ValueError("clusters must be disjoint")
        seen.update(members)
        spans.append((float(min(members)), float(max(members)) + 1.0))
    merged = merge_intervals(spans, delta)
    return [
        LabeledInterval(start=a, end=b, kind=IntervalKind.EPISODE, participant=participant)
        for a, b in merged
    ]


EPISODE_HEADER = ("participant", "start_s", "end_s", "n_seconds", "peak_score")


def write_episode_csv(
    path: str | Path,
    episodes: Sequence[LabeledInterval],
    scores: Sequence[SecondScore],
) -> None:
    by_second = {s.second: s.score for s in scores}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_HEADER)
        for ep in episodes:
            seconds = [s for s in covered_seconds(ep.start, ep.end) if s in by_second]
            writer.writerow(
                [
                    ep.participant,
                    repr(ep.start),
                    repr(ep.end),
                    len(seconds),
                    max((by_second[s] for s in seconds), default=0),
                ]
            )


def read_episode_csv(path: str | Path) -> list[LabeledInterval]:
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != EPISODE_HEADER:
            raise ValueError(f"{path}: bad header {header!r}, expected {','.join(EPISODE_HEADER)}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != 5:
                raise ValueError(f"{path}: line {lineno}: expected 5 fields, got {len(raw)}")
            try:
                out.append(
                    LabeledInterval(
                        start=float(raw[1]),
                        end=float(raw[2]),
                        kind=IntervalKind.EPISODE,
                        participant=raw[0],
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}")
    return out
