"""Flat run configuration shared by every pipeline stage.

One ``key = value`` text file drives all commands; every value lands in the
run manifest together with input digests, so two runs with equal manifests
produce byte-identical outputs.  Unknown keys are an error -- misspellings
must not silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .boosting import BoostConfig
from .episodes import DbscanConfig
from .periodic import SweepConfig


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate_hz: float = 20.0
    # peak detection
    min_prominence: float = 4.5
    # periodic sweep
    sweep_min: float = 0.4
    sweep_max: float = 1.5
    epsilon: float = 0.2
    min_len: int = 3
    strict_bounds: bool = False
    # boosting
    eta: float = 0.3
    max_depth: int = 4
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 0.8
    n_rounds: int = 200
    reg_lambda: float = 1.0
    pos_weight: float | None = None
    threshold: float = 0.5
    # clustering
    dbscan_eps: float = 30.0
    dbscan_min_pts: int = 15
    use_score_weight: bool = True
    # episodes + evaluation
    delta: float = 900.0
    episode_overlap_threshold: float = 0.5
    episode_overlap_base: str = "truth"
    candidate_label_min_overlap: float = 0.5
    tz_offset_s: float = 0.0
    seed: int = 0

    def sweep(self) -> SweepConfig:
        return SweepConfig(
            min=self.sweep_min,
            max=self.sweep_max,
            epsilon=self.epsilon,
            strict_bounds=self.strict_bounds,
        )

    def boost(self) -> BoostConfig:
        return BoostConfig(
            eta=self.eta,
            max_depth=self.max_depth,
            gamma=self.gamma,
            min_child_weight=self.min_child_weight,
            subsample=self.subsample,
            n_rounds=self.n_rounds,
            seed=self.seed,
            reg_lambda=self.reg_lambda,
            pos_weight=self.pos_weight,
        )

    def dbscan(self) -> DbscanConfig:
        return DbscanConfig(
            eps=self.dbscan_eps,
            min_pts=self.dbscan_min_pts,
            use_score_weight=self.use_score_weight,
        )

    def manifest_items(self) -> list[tuple[str, str]]:
        items = []
        for f in fields(self):
            value = getattr(self, f.name)
            items.append((f"config.{f.name}", "auto" if value is None else repr(value)))
        return items


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_value(name: str, raw: str, annotation: str):
    raw = raw.strip()
    if annotation == "bool":
        if raw.lower() not in _BOOL_WORDS:
            raise ValueError(f"config key {name}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[raw.lower()]
    if annotation == "int":
        return int(raw)
    if annotation == "float":
        return float(raw)
    if annotation == "float | None":
        return None if raw.lower() in ("auto", "none") else float(raw)
    return raw


def read_config(path: str | Path) -> PipelineConfig:
    """Parse a flat key = value file; '#' starts a comment."""
    path = Path(path)
    known = {f.name: f for f in fields(PipelineConfig)}
    overrides = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}: line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}: line {lineno}: unknown config key {key!r}")
        try:
            overrides[key] = _parse_value(key, raw, str(known[key].type))
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}")
    return PipelineConfig(**overrides)


def write_config(path: str | Path, cfg: PipelineConfig) -> None:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            value = "auto"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def with_overrides(cfg: PipelineConfig, **kwargs) -> PipelineConfig:
    supplied = {k: v for k, v in kwargs.items() if v is not None}
    return replace(cfg, **supplied) if supplied else cfg


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_hash(items: list[tuple[str, str]]) -> str:
    text = "\n".join(f"{k} = {v}" for k, v in items)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
