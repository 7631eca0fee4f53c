"""Second-order gradient boosting on logistic loss, built in-repo.

Each round fits one regression tree to the gradient/hessian statistics of
the logistic loss (for two classes the softmax objective reduces to it),
using exact greedy split search over sorted unique feature values.  Splits
must clear the ``gamma`` gain threshold and leave at least
``min_child_weight`` hessian mass in both children; leaf values are Newton
steps -G/(H + lambda) scaled by the learning rate.  A round whose root
cannot split contributes nothing, so with an infinite gamma the model
stays at its base score.

Everything is deterministic: row subsampling draws from one seeded
generator, and split ties break toward the lowest feature index, then the
lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

_RAW_CLIP = 500.0  # keeps exp() in range; sigmoid saturates long before this
_PROB_EPS = 1e-15


@dataclass(frozen=True)
class BoostConfig:
    """Booster hyperparameters.

    eta: learning rate in (0, 1].
    max_depth: maximum tree depth (root at depth 0).
    gamma: minimum gain required to accept a split.
    min_child_weight: minimum hessian sum in each child.
    subsample: row fraction drawn (without replacement) per round.
    n_rounds: boosting rounds.
    seed: RNG seed for subsampling.
    reg_lambda: L2 penalty on leaf values (Newton damping).
    pos_weight: positive-class weight; None means negatives/positives.
    """

    eta: float = 0.3
    max_depth: int = 4
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 0.8
    n_rounds: int = 200
    seed: int = 0
    reg_lambda: float = 1.0
    pos_weight: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.min_child_weight < 0:
            raise ValueError(f"min_child_weight must be >= 0, got {self.min_child_weight}")
        if not 0 < self.subsample <= 1:
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.reg_lambda < 0:
            raise ValueError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.pos_weight is not None and self.pos_weight <= 0:
            raise ValueError(f"pos_weight must be positive, got {self.pos_weight}")


@dataclass(frozen=True)
class TreeNode:
    """One node; leaves have feature == -1 and carry the leaf value."""

    feature: int
    threshold: float
    left: int
    right: int
    value: float

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


Tree = tuple[TreeNode, ...]


@dataclass(frozen=True)
class TrainedModel:
    trees: tuple[Tree, ...]
    base_score: float
    config: BoostConfig
    feature_names: tuple[str, ...]
    fingerprint: str
    train_loss: tuple[float, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _sigmoid(raw: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(raw, -_RAW_CLIP, _RAW_CLIP)))


def _logloss(y: np.ndarray, p: np.ndarray, w: np.ndarray) -> float:
    p = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(np.sum(w * losses) / np.sum(w))


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    cfg: BoostConfig,
) -> tuple[int, float] | None:
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    lam = cfg.reg_lambda
    parent = G * G / (H + lam)
    best_gain = cfg.gamma
    best: tuple[int, float] | None = None
    for f in range(X.shape[1]):
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cut = np.flatnonzero(np.diff(vs) > 0)
        if cut.size == 0:
            continue
        gs = np.cumsum(g[rows][order])
        hs = np.cumsum(h[rows][order])
        gl, hl = gs[cut], hs[cut]
        gr, hr = G - gl, H - hl
        gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
        valid = (hl >= cfg.min_child_weight) & (hr >= cfg.min_child_weight)
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            best = (f, float((vs[cut[k]] + vs[cut[k] + 1]) / 2.0))
    return best


def _build_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    cfg: BoostConfig,
) -> Tree | None:
    nodes: list[TreeNode] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        split = None
        if depth < cfg.max_depth and rows.size >= 2:
            split = _best_split(X, g, h, rows, cfg)
        idx = len(nodes)
        if split is None:
            G = float(g[rows].sum())
            H = float(h[rows].sum())
            value = -cfg.eta * G / (H + cfg.reg_lambda)
            nodes.append(TreeNode(feature=-1, threshold=0.0, left=-1, right=-1, value=value))
            return idx
        f, thr = split
        nodes.append(TreeNode(feature=f, threshold=thr, left=-1, right=-1, value=0.0))
        mask = X[rows, f] < thr
        left = grow(rows[mask], depth + 1)
        right = grow(rows[~mask], depth + 1)
        nodes[idx] = TreeNode(feature=f, threshold=thr, left=left, right=right, value=0.0)
        return idx

    # A root that cannot split produces no tree at all; the round is a no-op.
    if _best_split(X, g, h, rows, cfg) is None:
        return None
    grow(rows, 0)
    return tuple(nodes)


def _tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    stack: list[tuple[int, np.ndarray]] = [(0, np.arange(X.shape[0]))]
    while stack:
        idx, rows = stack.pop()
        if rows.size == 0:
            continue
        node = tree[idx]
        if node.is_leaf:
            out[rows] = node.value
            continue
        mask = X[rows, node.feature] < node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


def _validate_matrix(X: np.ndarray, feature_names: Sequence[str] | None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if not np.all(np.isfinite(X)):
        r, c = (int(v[0]) for v in np.nonzero(~np.isfinite(X)))
        name = f" ({feature_names[c]})" if feature_names else ""
        raise ValueError(f"non-finite feature value at row {r}, column {c}{name}")
    return X


def train(
    X,
    y,
    cfg: BoostConfig = BoostConfig(),
    feature_names: Sequence[str] | None = None,
) -> TrainedModel:
    """Fit a boosted ensemble on binary labels.

    Raises:
        ValueError: when only one class is present, sizes mismatch, or a
            feature value is non-finite (naming row and column).
    """
    names = tuple(feature_names) if feature_names is not None else None
    X = _validate_matrix(X, names)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"feature rows {X.shape[0]} != label count {y.shape[0]}")
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 rows to train, got {X.shape[0]}")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training labels contain a single class; need both")
    if names is None:
        names = tuple(f"f{i}" for i in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")

    pos_weight = cfg.pos_weight if cfg.pos_weight is not None else n_neg / n_pos
    w = np.where(y == 1.0, pos_weight, 1.0)
    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    raw = np.zeros(n)
    base_score = 0.0
    trees: list[Tree] = []
    losses: list[float] = []
    for _ in range(cfg.n_rounds):
        p = _sigmoid(raw)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        if cfg.subsample < 1.0:
            k = max(1, int(round(cfg.subsample * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        else:
            rows = np.arange(n)
        tree = _build_tree(X, g, h, rows, cfg)
        if tree is not None:
            trees.append(tree)
            raw += _tree_predict(tree, X)
        losses.append(_logloss(y, _sigmoid(raw), w))

    from .features import layout_fingerprint  # local import avoids a cycle

    return TrainedModel(
        trees=tuple(trees),
        base_score=base_score,
        config=cfg,
        feature_names=names,
        fingerprint=layout_fingerprint(names),
        train_loss=tuple(losses),
    )


def _check_layout(model: TrainedModel, X: np.ndarray, feature_names: Sequence[str] | None) -> None:
    if feature_names is not None:
        from .features import layout_fingerprint

        fp = layout_fingerprint(tuple(feature_names))
        if fp != model.fingerprint:
            raise ValueError(
                f"feature layout fingerprint {fp} does not match the model's "
                f"{model.fingerprint}"
            )
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"feature width {X.shape[1]} != model width {model.n_features}"
        )


def predict_raw(model: TrainedModel, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
    X = _validate_matrix(X, None)
    _check_layout(model, X, feature_names)
    raw = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        raw += _tree_predict(tree, X)
    return raw


def predict_proba(model: TrainedModel, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
    return _sigmoid(predict_raw(model, X, feature_names))


def classify_candidates(
    model: TrainedModel,
    candidates: Sequence,
    X,
    threshold: float = 0.5,
    feature_names: Sequence[str] | None = None,
) -> list[tuple[object, bool, float]]:
    """Threshold candidate probabilities; `proba >= threshold` is positive."""
    if len(candidates) == 0:
        return []
    proba = predict_proba(model, X, feature_names)
    if proba.shape[0] != len(candidates):
        raise ValueError(f"{proba.shape[0]} probabilities for {len(candidates)} candidates")
    return [(c, bool(p >= threshold), float(p)) for c, p in zip(candidates, proba)]


def split_counts(model: TrainedModel) -> np.ndarray:
    """How many ensemble splits use each feature index."""
    counts = np.zeros(model.n_features, dtype=int)
    for tree in model.trees:
        for node in tree:
            if not node.is_leaf:
                counts[node.feature] += 1
    return counts


_HEADER_KEYS = (
    "eta", "max_depth", "gamma", "min_child_weight", "subsample",
    "n_rounds", "seed", "reg_lambda", "pos_weight",
)


def model_to_text(model: TrainedModel) -> str:
    lines = ["format = chewdet-gbt-v1"]
    for key in _HEADER_KEYS:
        value = getattr(model.config, key)
        rendered = "auto" if value is None else repr(value)
        lines.append(f"{key} = {rendered}")
    lines.append(f"base_score = {model.base_score!r}")
    lines.append(f"layout_fingerprint = {model.fingerprint}")
    lines.append(f"feature_names = {','.join(model.feature_names)}")
    lines.append(f"n_trees = {len(model.trees)}")
    for k, tree in enumerate(model.trees):
        lines.append(f"tree {k}")
        for i, node in enumerate(tree):
            lines.append(
                f"{i},{node.feature},{node.threshold!r},{node.left},{node.right},{node.value!r}"
            )
    return "\n".join(lines) + "\n"


def save_model(path: str | Path, model: TrainedModel) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def model_from_text(text: str) -> TrainedModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and "=" in lines[i] and not lines[i].startswith("tree "):
        key, _, value = lines[i].partition("=")
        header[key.strip()] = value.strip()
        i += 1
    if header.get("format") != "chewdet-gbt-v1":
        raise ValueError(f"unrecognized model format {header.get('format')!r}")
    kwargs = {}
    for key in _HEADER_KEYS:
        raw = header[key]
        if key in ("max_depth", "n_rounds", "seed"):
            kwargs[key] = int(raw)
        elif key == "pos_weight":
            kwargs[key] = None if raw == "auto" else float(raw)
        else:
            kwargs[key] = float(raw)
    cfg = BoostConfig(**kwargs)
    names = tuple(header["feature_names"].split(",")) if header["feature_names"] else ()
    n_trees = int(header["n_trees"])
    trees: list[Tree] = []
    nodes: list[TreeNode] = []
    for line in lines[i:]:
        if line.startswith("tree "):
            if nodes:
                trees.append(tuple(nodes))
                nodes = []
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"malformed tree node row {line!r}")
        nodes.append(
            TreeNode(
                feature=int(parts[1]),
                threshold=float(parts[2]),
                left=int(parts[3]),
                right=int(parts[4]),
                value=float(parts[5]),
            )
        )
    if nodes:
        trees.append(tuple(nodes))
    if len(trees) != n_trees:
        raise ValueError(f"model declares {n_trees} trees but contains {len(trees)}")
    return TrainedModel(
        trees=tuple(trees),
        base_score=float(header["base_score"]),
        config=cfg,
        feature_names=names,
        fingerprint=header["layout_fingerprint"],
    )


def load_model(path: str | Path) -> TrainedModel:
    return model_from_text(Path(path).read_text(encoding="utf-8"))
