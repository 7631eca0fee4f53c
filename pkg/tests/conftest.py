import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chewdet.config import PipelineConfig
from chewdet.synthetic import Confounder, MealSpec, ScenarioSpec, generate


def quick_config(**overrides) -> PipelineConfig:
    """Small-but-real pipeline config so unit tests stay fast."""
    base = dict(n_rounds=60, subsample=0.8, max_depth=2, min_child_weight=0.5, seed=7)
    base.update(overrides)
    return PipelineConfig(**base)


def two_meal_scenario(seed: int, participant: str, noise: float = 0.5) -> ScenarioSpec:
    """Compact eating day: two meals plus talking/walking confounders.

    Talking bouts are sized like chewing sequences so candidate duration
    alone cannot separate the classes.
    """
    return ScenarioSpec(
        duration=2400.0,
        meals=(
            MealSpec(start=200.0, n_sequences=3, chew_rate_hz=1.5,
                     seq_duration_s=25.0, seq_gap_s=15.0),
            MealSpec(start=1600.0, n_sequences=3, chew_rate_hz=1.25,
                     seq_duration_s=25.0, seq_gap_s=15.0),
        ),
        confounders=(
            Confounder(kind="talking", start=600.0, duration=28.0),
            Confounder(kind="talking", start=700.0, duration=25.0),
            Confounder(kind="talking", start=820.0, duration=30.0),
            Confounder(kind="talking", start=1080.0, duration=26.0),
            Confounder(kind="talking", start=1250.0, duration=28.0),
            Confounder(kind="walking", start=900.0, duration=100.0),
            Confounder(kind="rest", start=1400.0, duration=100.0),
        ),
        noise_prox=noise,
        noise_ambient=4.0 * noise,
        noise_lfa_deg=0.5 * noise,
        noise_accel=0.02 * noise,
        seed=seed,
        participant=participant,
    )


@pytest.fixture(scope="session")
def clean_sessions():
    """Two participants with byte-identical clean data (degenerate case)."""
    out = []
    for pid in ("P1", "P2"):
        session, _ = generate(two_meal_scenario(seed=100, participant=pid))
        out.append(session)
    return out


@pytest.fixture(scope="session")
def noisy_sessions():
    out = []
    for k, pid in enumerate(("N1", "N2", "N3")):
        session, _ = generate(two_meal_scenario(seed=200 + k, participant=pid, noise=1.5))
        out.append(session)
    return out
