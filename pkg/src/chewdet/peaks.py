"""Prominent-peak detection for the proximity signal.

Chewing shows up as peaks that stand out from nearby terrain, not merely
as local maxima.  A peak's prominence is its height above the higher of
the two minima separating it from higher terrain on each side; where no
higher terrain exists, the search runs to the end of the signal.  Noise
maxima ride on larger structures and get small prominences, so a single
threshold separates chew candidates from jitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Peak:
    t: float
    height: float
    prominence: float


def _plateau_maxima(sig: np.ndarray) -> list[int]:
    # Local maxima; a flat plateau counts once, at its leftmost sample.
    # Endpoints are never peaks and neither is a plateau touching an end.
    n = sig.shape[0]
    maxima: list[int] = []
    i = 1
    while i < n - 1:
        if sig[i] > sig[i - 1]:
            j = i
            while j < n - 1 and sig[j + 1] == sig[j]:
                j += 1
            if j < n - 1 and sig[j + 1] < sig[j]:
                maxima.append(i)
            i = j + 1
        else:
            i += 1
    return maxima


def _prominence(sig: np.ndarray, idx: int) -> float:
    h = sig[idx]
    bases = []
    for step in (-1, 1):
        j = idx + step
        m = h
        while 0 <= j < sig.shape[0] and sig[j] <= h:
            if sig[j] < m:
                m = sig[j]
            j += step
        bases.append(m)
    return float(h - max(bases))


def find_prominent_peaks(signal, t, min_prominence: float) -> list[Peak]:
    """Return local maxima whose topographic prominence reaches the threshold.

    Args:
        signal: 1-D sample values.
        t: matching timestamps in seconds.
        min_prominence: keep peaks with prominence >= this (signal units).

    Returns:
        Peaks sorted by time.  Fewer than 3 samples cannot contain an
        interior maximum and yield an empty list.
    """
    sig = np.asarray(signal, dtype=float)
    ts = np.asarray(t, dtype=float)
    if sig.shape != ts.shape:
        raise ValueError(f"signal length {sig.shape} != time length {ts.shape}")
    if min_prominence <= 0:
        raise ValueError(f"min_prominence must be positive, got {min_prominence}")
    out = []
    for idx in _plateau_maxima(sig):
        prom = _prominence(sig, idx)
        if prom >= min_prominence:
            out.append(Peak(t=float(ts[idx]), height=float(sig[idx]), prominence=prom))
    return out
