"""Longest periodic-subsequence segmentation of peak event times.

A run of event timestamps is treated as periodic when every consecutive
gap lies inside a band [p_min, p_max].  For a single band the longest
such subsequence is found by a left-to-right dynamic program:

    opt[i] = 1 + max(opt[j])  over j with p_min <= t[i] - t[j] <= p_max

where opt[i] counts gaps of the best run ending at i.  Because the valid
predecessor window slides monotonically with i, a max-deque keeps the
whole pass linear in the number of events as long as the band width and
event density are bounded.

Sweeping geometrically spaced bands over the physiological inter-chew
range (0.4 s to 1.5 s by factors of 1 + epsilon) turns "find chewing of
unknown rate" into a small family of banded problems.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import csv

import numpy as np

from .peaks import Peak

_RATIO_SLACK = 1.0 + 1e-12  # absorbs one rounding step in band-edge ratios


@dataclass(frozen=True)
class PeriodicSubsequence:
    """A maximal run of event times whose gaps all fall in one band.

    ``length`` counts inter-event gaps, so three timestamps have length 2.
    """

    timestamps: tuple[float, ...]
    p_min: float
    p_max: float
    epsilon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamps", tuple(float(v) for v in self.timestamps))
        if len(self.timestamps) < 2:
            raise ValueError("a periodic subsequence needs at least 2 timestamps")
        if not 0 < self.p_min <= self.p_max:
            raise ValueError(f"need 0 < p_min <= p_max, got [{self.p_min}, {self.p_max}]")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.p_max / self.p_min > (1.0 + self.epsilon) * _RATIO_SLACK:
            raise ValueError(
                f"band ratio {self.p_max / self.p_min} exceeds 1 + epsilon = {1 + self.epsilon}"
            )
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            gap = b - a
            if not self.p_min <= gap <= self.p_max:
                raise ValueError(
                    f"gap {gap} between {a} and {b} outside band [{self.p_min}, {self.p_max}]"
                )

    @property
    def length(self) -> int:
        return len(self.timestamps) - 1

    @property
    def c1(self) -> float:
        return self.timestamps[0]

    @property
    def c2(self) -> float:
        return self.timestamps[-1]


@dataclass(frozen=True)
class CandidateWindow:
    """A candidate as persisted to CSV: boundaries plus band metadata."""

    c1: float
    c2: float
    p_min: float
    p_max: float
    epsilon: float
    length: int


@dataclass(frozen=True)
class SweepConfig:
    """Inter-chew sweep range: 0.4 s to 1.5 s covers 0.94-2.17 Hz chewing."""

    min: float = 0.4
    max: float = 1.5
    epsilon: float = 0.2
    strict_bounds: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.min < self.max:
            raise ValueError(f"need 0 < min < max, got [{self.min}, {self.max}]")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def bands(self) -> list[tuple[float, float]]:
        """Geometric bands [b, b(1+eps)] from min up to max, last one clipped."""
        out = []
        b = self.min
        while b < self.max:
            hi = b * (1.0 + self.epsilon)
            out.append((b, hi if hi < self.max else self.max))
            b = hi
        return out


def _validate_times(t) -> np.ndarray:
    ts = np.asarray(t, dtype=float)
    if ts.ndim != 1:
        raise ValueError("timestamps must be one-dimensional")
    if ts.shape[0] > 1 and not np.all(np.diff(ts) > 0):
        i = int(np.flatnonzero(np.diff(ts) <= 0)[0])
        raise ValueError(
            f"timestamps must be strictly increasing; t[{i}]={ts[i]} >= t[{i + 1}]={ts[i + 1]}"
        )
    return ts


def longest_abs_periodic(
    t,
    p_min: float,
    p_max: float,
    *,
    epsilon: float | None = None,
    strict: bool = False,
) -> list[PeriodicSubsequence]:
    """All longest subsequences whose consecutive gaps stay in [p_min, p_max].

    Bounds are inclusive by default; ``strict`` switches both comparisons to
    the open interval.  Every optimum (tie) is returned, ordered by start
    time.  ``epsilon`` only tags the result band; when omitted it is the
    smallest value consistent with the band ratio.
    """
    if not 0 < p_min <= p_max:
        raise ValueError(f"need 0 < p_min <= p_max, got [{p_min}, {p_max}]")
    ts = _validate_times(t)
    n = ts.shape[0]
    if epsilon is None:
        epsilon = max(p_max / p_min - 1.0, 1e-12)
    if n < 2:
        return []

    tl = ts.tolist()
    if strict:
        def admissible(gap: float) -> bool:
            return p_min < gap < p_max
    else:
        def admissible(gap: float) -> bool:
            return p_min <= gap <= p_max

    # Sliding-window DP: dq holds candidate predecessors with non-increasing
    # opt values; a predecessor enters once its gap reaches p_min and leaves
    # once its gap passes p_max.
    opt = [0] * n
    dq: deque[int] = deque()
    nxt = 0  # next index eligible to enter the window
    for i in range(n):
        ti = tl[i]
        if strict:
            while nxt < i and ti - tl[nxt] > p_min:
                while dq and opt[dq[-1]] <= opt[nxt]:
                    dq.pop()
                dq.append(nxt)
                nxt += 1
            while dq and ti - tl[dq[0]] >= p_max:
                dq.popleft()
        else:
            while nxt < i and ti - tl[nxt] >= p_min:
                while dq and opt[dq[-1]] <= opt[nxt]:
                    dq.pop()
                dq.append(nxt)
                nxt += 1
            while dq and ti - tl[dq[0]] > p_max:
                dq.popleft()
        if dq:
            opt[i] = opt[dq[0]] + 1

    best = max(opt)
    if best < 1:
        return []

    def predecessors(i: int) -> list[int]:
        want = opt[i] - 1
        out = []
        j = i - 1
        while j >= 0:
            gap = tl[i] - tl[j]
            if (gap >= p_max if strict else gap > p_max):
                break
            if opt[j] == want and admissible(gap):
                out.append(j)
            j -= 1
        out.reverse()
        return out

    # Walk the backpointer DAG from every optimal endpoint; each root-to-end
    # path is one tied optimum.
    chains: list[tuple[float, ...]] = []
    for end in [i for i in range(n) if opt[i] == best]:
        stack: list[tuple[int, list[int]]] = [(end, [end])]
        while stack:
            i, tail = stack.pop()
            if opt[i] == 0:
                chains.append(tuple(tl[k] for k in reversed(tail)))
                continue
            preds = predecessors(i)
            if len(preds) == 1:
                tail.append(preds[0])
                stack.append((preds[0], tail))
            else:
                for j in preds:
                    stack.append((j, tail + [j]))
    chains.sort()
    return [
        PeriodicSubsequence(timestamps=c, p_min=p_min, p_max=p_max, epsilon=epsilon)
        for c in chains
    ]


def longest_rel_periodic(t, cfg: SweepConfig) -> list[PeriodicSubsequence]:
    """Per-band optima over the whole sweep, deduplicated across bands.

    Each band is solved independently; a subsequence found in two adjacent
    bands (all gaps on the shared edge) is kept once, tagged with the lower
    band.  Results are ordered by start time, then band.
    """
    ts = _validate_times(t)
    found: dict[tuple[float, ...], PeriodicSubsequence] = {}
    for b_lo, b_hi in cfg.bands():
        for sub in longest_abs_periodic(
            ts, b_lo, b_hi, epsilon=cfg.epsilon, strict=cfg.strict_bounds
        ):
            found.setdefault(sub.timestamps, sub)
    return sorted(found.values(), key=lambda s: (s.c1, s.p_min, s.timestamps))


def segment(
    peaks: Sequence[Peak], cfg: SweepConfig, min_len: int
) -> list[PeriodicSubsequence]:
    """Candidate chewing subsequences from a stream of prominent peaks.

    The peak stream is split wherever consecutive peaks are more than
    cfg.max apart (no band gap can bridge such a break), each fragment is
    swept independently, and candidates shorter than ``min_len`` gaps are
    dropped.  Output is ordered by start time, then band.
    """
    if min_len < 1:
        raise ValueError(f"min_len must be >= 1, got {min_len}")
    times = [p.t for p in peaks]
    _validate_times(times)

    fragments: list[list[float]] = []
    current: list[float] = []
    for v in times:
        if current and v - current[-1] > cfg.max:
            fragments.append(current)
            current = []
        current.append(v)
    if current:
        fragments.append(current)

    out: list[PeriodicSubsequence] = []
    for frag in fragments:
        if len(frag) < 2:
            continue
        out.extend(s for s in longest_rel_periodic(frag, cfg) if s.length >= min_len)
    out.sort(key=lambda s: (s.c1, s.p_min, s.timestamps))
    return out


CANDIDATE_HEADER = ("c1_s", "c2_s", "p_min", "p_max", "epsilon", "length")


def write_candidate_csv(path: str | Path, candidates: Sequence[PeriodicSubsequence | CandidateWindow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANDIDATE_HEADER)
        for c in candidates:
            writer.writerow(
                [repr(float(c.c1)), repr(float(c.c2)), repr(float(c.p_min)),
                 repr(float(c.p_max)), repr(float(c.epsilon)), int(c.length)]
            )


def read_candidate_csv(path: str | Path) -> list[CandidateWindow]:
    path = Path(path)
    out: list[CandidateWindow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CANDIDATE_HEADER:
            raise ValueError(
                f"{path}: bad header {header!r}, expected {','.join(CANDIDATE_HEADER)}"
            )
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != 6:
                raise ValueError(f"{path}: line {lineno}: expected 6 fields, got {len(raw)}")
            try:
                out.append(
                    CandidateWindow(
                        c1=float(raw[0]), c2=float(raw[1]), p_min=float(raw[2]),
                        p_max=float(raw[3]), epsilon=float(raw[4]), length=int(raw[5]),
                    )
                )
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {','.join(raw)!r}")
    return out
