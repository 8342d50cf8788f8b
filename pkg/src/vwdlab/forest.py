"""Random forest of Gini decision trees, written out so every split is auditable."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConfigInvalid, DimensionMismatch, ParseError, SingleClassTraining

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigInvalid("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigInvalid("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ConfigInvalid("min_samples_split must be >= 2")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigInvalid("features_per_split must be >= 1")

    def n_split_features(self, d: int) -> int:
        m = self.features_per_split or math.ceil(math.sqrt(d))
        return min(m, d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf. ``x[feature] <= threshold`` goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts of the training rows reaching each node

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def leaf_of(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_of(X)]
        return c[:, 1] / c.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["counts"], dtype=np.float64).reshape(-1, 2),
        )


def gini(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    n = c.sum()
    return 0.0 if n == 0 else float(1.0 - ((c / n) ** 2).sum())


def best_split_on_feature(values: np.ndarray, y: np.ndarray):
    """Lowest weighted child Gini over midpoints of consecutive distinct values.

    Returns ``(impurity, threshold)`` or ``None`` for a constant column. Ties keep the
    lowest threshold.
    """
    order = np.argsort(values, kind="stable")
    v, t = values[order], y[order]
    n = v.size
    cut = np.flatnonzero(v[1:] != v[:-1])
    if cut.size == 0:
        return None
    ones = np.cumsum(t)[cut].astype(np.float64)
    n_left = (cut + 1).astype(np.float64)
    zeros = n_left - ones
    n_right = n - n_left
    ones_r = t.sum() - ones
    zeros_r = n_right - ones_r
    # n_side * gini(side) = n_side - (c0^2 + c1^2) / n_side
    imp = (n_left - (zeros**2 + ones**2) / n_left + n_right - (zeros_r**2 + ones_r**2) / n_right) / n
    best = int(np.flatnonzero(imp <= imp.min() + TIE_TOL)[0])
    return float(imp[best]), float((v[cut[best]] + v[cut[best] + 1]) / 2.0)


def best_split(X: np.ndarray, y: np.ndarray, features) -> tuple[int, float, float] | None:
    """Best ``(feature, threshold, impurity)`` among ``features``; lowest index wins ties."""
    best = None
    for f in sorted(int(f) for f in features):
        found = best_split_on_feature(X[:, f], y)
        if found is None:
            continue
        if best is None or found[0] < best[2] - TIE_TOL:
            best = (f, found[1], found[0])
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator) -> DecisionTree:
    d = X.shape[1]
    m = cfg.n_split_features(d)
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n1 = int(y[idx].sum())
        counts.append((idx.size - n1, n1))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n0, n1 = counts[node]
        if n0 == 0 or n1 == 0 or idx.size < cfg.min_samples_split:
            continue
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        feats = rng.choice(d, size=m, replace=False) if m < d else np.arange(d)
        split = best_split(X[idx], y[idx], feats)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(li), new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.float64).reshape(-1, 2),
    )


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(tree_index)])


@dataclass
class Forest:
    config: ForestConfig
    trees: list[DecisionTree]
    n_features: int
    oob_score: float | None = None

    def to_dict(self) -> dict:
        return {
            "format": "vwdlab-forest/1",
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "oob_score": self.oob_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls(ForestConfig(**d["config"]), [DecisionTree.from_dict(t) for t in d["trees"]], int(d["n_features"]), d.get("oob_score"))

    def split_counts(self) -> np.ndarray:
        out = np.zeros(self.n_features, dtype=np.int64)
        for t in self.trees:
            f = t.feature[t.feature >= 0]
            np.add.at(out, f, 1)
        return out


def train_random_forest(X, y, cfg: ForestConfig = ForestConfig()) -> Forest:
    """Bagged Gini trees; tree ``i`` draws from an RNG seeded by ``(cfg.seed, i)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise DimensionMismatch(f"need >= 2 rows with matching labels, got X {X.shape}, y {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ConfigInvalid("feature matrix contains non-finite values")
    if np.unique(y).size < 2:
        raise SingleClassTraining("random forest training needs both classes")
    n = X.shape[0]
    trees = []
    oob_sum = np.zeros(n)
    oob_n = np.zeros(n)
    for i in range(cfg.n_trees):
        rng = tree_rng(cfg.seed, i)
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        tree = grow_tree(X[rows], y[rows], cfg, rng)
        trees.append(tree)
        if cfg.bootstrap:
            out = np.ones(n, dtype=bool)
            out[rows] = False
            if out.any():
                oob_sum[out] += tree.predict_proba(X[out])
                oob_n[out] += 1
    oob = None
    if cfg.bootstrap and (oob_n > 0).any():
        have = oob_n > 0
        oob = float((((oob_sum[have] / oob_n[have]) > 0.5).astype(np.int64) == y[have]).mean())
    return Forest(cfg, trees, X.shape[1], oob)


def rf_predict_proba(forest: Forest, x) -> np.ndarray | float:
    """Mean over trees of the class-1 fraction in the reached leaf.

    A single feature vector gives a float, a matrix one probability per row.
    """
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    X = a[None, :] if single else a
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatch(f"expected {forest.n_features} features, got shape {a.shape}")
    p = np.mean([t.predict_proba(X) for t in forest.trees], axis=0)
    return float(p[0]) if single else p


def save_forest(forest: Forest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(forest.to_dict()), encoding="utf-8")
    return path


def load_forest(path) -> Forest:
    try:
        return Forest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    def __init__(self, n_trees=100, max_depth=None, min_samples_split=2, features_per_split=None, bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.random_state = random_state

    def config(self) -> ForestConfig:
        return ForestConfig(
            self.n_trees, self.max_depth, self.min_samples_split, self.features_per_split, self.bootstrap, int(self.random_state)
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.forest_ = train_random_forest(X, np.asarray(y, dtype=np.int64), self.config())
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.oob_score_ = self.forest_.oob_score
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "forest_")
        p = rf_predict_proba(self.forest_, check_array(X, dtype=np.float64))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)
