"""Synthetic 20 Hz necklace traces with exactly known chewing activity.

The generator plants meals made of chewing sequences on the sample grid:
proximity gets a small bump per chew and a taller one per bite, ambient
light dips around bites, the lean-forward angle dips at each meal start,
and the energy signal stays near 1 g^2 apart from sparse bite spikes.
Confounders reproduce the hard cases: walking (sustained energy
oscillation, flat proximity), talking (prominent but irregular proximity
peaks with none of the other eating signatures), rest (nothing), and
dark-room eating (ambient pinned near zero through a meal).

Chew periods are snapped to the 50 ms grid so planted peak times are exact;
the returned labels are therefore a ground-truth oracle for every stage.
Everything is driven by one seed: same spec, same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import IntervalKind, LabeledInterval, Session

CHEW_RATE_BAND_HZ = (0.94, 2.17)
CONFOUNDER_KINDS = ("walking", "talking", "rest", "dark_eating")
# 2020-01-01 10:00:00 UTC; keeps hour-of-day features stable across runs.
DEFAULT_START_EPOCH = 1_577_872_800.0
# Floor for peak amplitudes so noise-free scenarios still clear the
# default prominence threshold.
_AMP_FLOOR = 2.5


@dataclass(frozen=True)
class MealSpec:
    """One planted meal: a run of chewing sequences separated by breaks."""

    start: float
    n_sequences: int = 4
    chew_rate_hz: float = 1.5
    bite_period_s: float = 5.0
    seq_duration_s: float = 30.0
    seq_gap_s: float = 20.0

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError(f"meal start must be >= 0, got {self.start}")
        if self.n_sequences < 1:
            raise ValueError(f"need at least one sequence, got {self.n_sequences}")
        lo, hi = CHEW_RATE_BAND_HZ
        if not lo <= self.chew_rate_hz <= hi:
            raise ValueError(
                f"chew rate {self.chew_rate_hz} Hz outside the plausible band {CHEW_RATE_BAND_HZ}"
            )
        if self.bite_period_s <= 0 or self.seq_gap_s <= 0:
            raise ValueError("bite period and sequence gap must be positive")
        if self.seq_duration_s * self.chew_rate_hz < 2:
            raise ValueError("sequence too short to hold two chews")

    @property
    def span(self) -> tuple[float, float]:
        total = self.n_sequences * self.seq_duration_s + (self.n_sequences - 1) * self.seq_gap_s
        return self.start, self.start + total


@dataclass(frozen=True)
class Confounder:
    kind: str
    start: float
    duration: float

    def __post_init__(self) -> None:
        if self.kind not in CONFOUNDER_KINDS:
            raise ValueError(f"unknown confounder {self.kind!r}, expected one of {CONFOUNDER_KINDS}")
        if self.start < 0 or self.duration <= 0:
            raise ValueError("confounder needs start >= 0 and positive duration")


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float
    meals: tuple[MealSpec, ...] = ()
    confounders: tuple[Confounder, ...] = ()
    noise_prox: float = 0.0
    noise_ambient: float = 0.0
    noise_lfa_deg: float = 0.0
    noise_accel: float = 0.0
    seed: int = 0
    start_epoch: float = DEFAULT_START_EPOCH
    participant: str = "SYN"
    sample_rate_hz: float = 20.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        object.__setattr__(self, "meals", tuple(self.meals))
        object.__setattr__(self, "confounders", tuple(self.confounders))
        spans = sorted(m.span for m in self.meals)
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ValueError(f"meals overlap: [{a0}, {a1}] and [{b0}, {b1}]")
        for lo, hi in spans:
            if hi > self.duration:
                raise ValueError(f"meal [{lo}, {hi}] runs past the scenario duration")


def _snap_period(rate_hz: float, sample_rate_hz: float) -> float:
    # Nearest whole number of samples, at least one.
    samples = max(1, round(sample_rate_hz / rate_hz))
    return samples / sample_rate_hz


def _bump(center_idx: int, amp: float, out: np.ndarray) -> None:
    # Triangular 3-sample bump; the center stays the local max.
    out[center_idx] += amp
    if center_idx - 1 >= 0:
        out[center_idx - 1] += 0.4 * amp
    if center_idx + 1 < out.shape[0]:
        out[center_idx + 1] += 0.4 * amp


def _smooth_dip(t_rel: np.ndarray, center: float, depth: float, width: float, out: np.ndarray) -> None:
    lo = np.searchsorted(t_rel, center - 4 * width)
    hi = np.searchsorted(t_rel, center + 4 * width)
    seg = t_rel[lo:hi]
    out[lo:hi] -= depth * np.exp(-0.5 * ((seg - center) / width) ** 2)


def generate(spec: ScenarioSpec) -> tuple[Session, list[LabeledInterval]]:
    """Build a session plus its exact chewing-sequence ground truth.

    Labels span each sequence's first to last planted chew and obey the
    label invariants by construction.  A scenario without meals yields an
    empty label list.
    """
    rng = np.random.default_rng(spec.seed)
    fs = spec.sample_rate_hz
    n = int(round(spec.duration * fs))
    t_rel = np.arange(n) / fs

    prox = np.full(n, 100.0)
    ambient = np.full(n, 500.0)
    lfa = np.full(n, 90.0)
    accel = np.zeros((n, 3))
    accel[:, 2] = 1.0  # gravity at rest

    if spec.noise_prox:
        prox += rng.normal(0.0, spec.noise_prox, n)
    if spec.noise_ambient:
        ambient += rng.normal(0.0, spec.noise_ambient, n)
    if spec.noise_lfa_deg:
        lfa += rng.normal(0.0, spec.noise_lfa_deg, n)
    if spec.noise_accel:
        accel += rng.normal(0.0, spec.noise_accel, (n, 3))

    amp_scale = max(spec.noise_prox, _AMP_FLOOR)
    labels: list[LabeledInterval] = []

    for meal in sorted(spec.meals, key=lambda m: m.start):
        period = _snap_period(meal.chew_rate_hz, fs)
        bite_every = max(1, round(meal.bite_period_s / period))
        # Lean forward at the meal start.
        _smooth_dip(t_rel, meal.start, 25.0, 1.5, lfa)
        for k in range(meal.n_sequences):
            seq_start = meal.start + k * (meal.seq_duration_s + meal.seq_gap_s)
            n_chews = int(meal.seq_duration_s / period) + 1
            chew_times = [seq_start + c * period for c in range(n_chews)]
            for c, ct in enumerate(chew_times):
                idx = int(round(ct * fs))
                if idx >= n:
                    continue
                amp = rng.uniform(2.0, 4.0) * amp_scale
                is_bite = c % bite_every == 0
                if is_bite:
                    amp *= 2.0
                    _smooth_dip(t_rel, ct, rng.uniform(150.0, 250.0), 0.4, ambient)
                    spike = int(round(ct * fs))
                    if spike < n:
                        accel[spike, 2] += 0.8
                _bump(idx, amp, prox)
            first = spec.start_epoch + chew_times[0]
            last = spec.start_epoch + min(chew_times[-1], spec.duration - 1.0 / fs)
            labels.append(
                LabeledInterval(
                    start=first, end=last, kind=IntervalKind.CHEW, participant=spec.participant
                )
            )

    for conf in spec.confounders:
        lo = int(round(conf.start * fs))
        hi = min(n, int(round((conf.start + conf.duration) * fs)))
        if lo >= hi:
            continue
        if conf.kind == "walking":
            seg = t_rel[lo:hi]
            accel[lo:hi, 2] += 0.5 * np.sin(2 * math.pi * 1.8 * seg)
            accel[lo:hi, 0] += 0.3 * np.sin(2 * math.pi * 0.9 * seg)
        elif conf.kind == "talking":
            # Chin motion during speech: semi-periodic prominent proximity
            # peaks with none of the other eating signatures, so proximity
            # alone cannot reliably tell these from chewing.
            period = rng.uniform(0.7, 1.3)
            t = conf.start + rng.uniform(0.3, 1.0)
            while t < conf.start + conf.duration:
                idx = int(round(t * fs))
                if idx < n:
                    _bump(idx, rng.uniform(2.0, 4.0) * amp_scale, prox)
                t += period * rng.uniform(0.92, 1.08)
        elif conf.kind == "dark_eating":
            ambient[lo:hi] = 2.0
        # "rest" adds nothing on purpose.

    np.clip(ambient, 0.0, None, out=ambient)

    # Encode the LFA profile as an x-axis rotation so the round trip through
    # quaternions is exact.
    half = np.radians(lfa) / 2.0
    quat = np.zeros((n, 4))
    quat[:, 0] = np.cos(half)
    quat[:, 1] = np.sin(half)

    session = Session(
        participant=spec.participant,
        t=spec.start_epoch + t_rel,
        prox=prox,
        ambient=ambient,
        quat=quat,
        accel=accel,
        labels=tuple(labels),
        metadata={"source": "synthetic", "seed": spec.seed, "tz_offset_s": 0.0},
    )
    return session, labels


# ---------------------------------------------------------------------------
# Flat-text scenario files.
# ---------------------------------------------------------------------------

_SCALARS = {
    "duration": float,
    "noise_prox": float,
    "noise_ambient": float,
    "noise_lfa_deg": float,
    "noise_accel": float,
    "seed": int,
    "start_epoch": float,
    "participant": str,
    "sample_rate_hz": float,
}

_MEAL_KEYS = {
    "start": ("start", float),
    "sequences": ("n_sequences", int),
    "rate": ("chew_rate_hz", float),
    "bite": ("bite_period_s", float),
    "seq_dur": ("seq_duration_s", float),
    "gap": ("seq_gap_s", float),
}


def _parse_pairs(raw: str, lineno: int, path: Path) -> dict[str, str]:
    pairs = {}
    for token in raw.split():
        if "=" not in token:
            raise ValueError(f"{path}: line {lineno}: expected key=value tokens, got {token!r}")
        key, _, value = token.partition("=")
        pairs[key] = value
    return pairs


def read_scenario(path: str | Path) -> ScenarioSpec:
    """Parse a scenario file: scalar keys plus repeatable meal/confounder lines.

    Example::

        duration = 7200
        noise_prox = 2.0
        meal = start=600 sequences=4 rate=1.5 bite=5 seq_dur=30 gap=20
        confounder = kind=talking start=3000 duration=120
    """
    path = Path(path)
    scalars: dict = {}
    meals: list[MealSpec] = []
    confounders: list[Confounder] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "meal":
            pairs = _parse_pairs(raw, lineno, path)
            kwargs = {}
            for name, value in pairs.items():
                if name not in _MEAL_KEYS:
                    raise ValueError(f"{path}: line {lineno}: unknown meal key {name!r}")
                field_name, cast = _MEAL_KEYS[name]
                kwargs[field_name] = cast(value)
            meals.append(MealSpec(**kwargs))
        elif key == "confounder":
            pairs = _parse_pairs(raw, lineno, path)
            try:
                confounders.append(
                    Confounder(
                        kind=pairs["kind"],
                        start=float(pairs["start"]),
                        duration=float(pairs["duration"]),
                    )
                )
            except KeyError as exc:
                raise ValueError(f"{path}: line {lineno}: confounder missing {exc}")
        elif key in _SCALARS:
            scalars[key] = _SCALARS[key](raw)
        else:
            raise ValueError(f"{path}: line {lineno}: unknown scenario key {key!r}")
    if "duration" not in scalars:
        raise ValueError(f"{path}: scenario must set duration")
    return ScenarioSpec(meals=tuple(meals), confounders=tuple(confounders), **scalars)
