"""Regression learners built from scratch: CART, KNN, OLS and a bagged forest."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .data import SupervisedTable


class FitError(ValueError):
    pass


class ShapeError(ValueError):
    pass


# (low, high) ranges a tuned CART may take
CART_RANGES = {
    "max_feature": (0.01, 1.0),
    "max_depth": (1, 12),
    "min_sample_leaf": (1, 12),
    "min_sample_split": (0, 20),
}


@dataclass(frozen=True)
class CartHyperParams:
    """CART controls. ``None`` for max_feature/max_depth means "all features" / "grow until pure"."""

    max_feature: float | None = None
    max_depth: int | None = None
    min_sample_leaf: int = 1
    min_sample_split: int = 2

    def __post_init__(self):
        for name, (lo, hi) in CART_RANGES.items():
            v = getattr(self, name)
            if v is None:
                continue
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside tuning range [{lo}, {hi}]")

    @property
    def effective_min_split(self) -> int:
        return max(int(self.min_sample_split), 2)

    def n_candidates(self, n_features: int) -> int:
        if self.max_feature is None:
            return n_features
        # guard against 0.3 * 10 == 3.0000000000000004
        return min(n_features, max(1, math.ceil(self.max_feature * n_features - 1e-9)))

    def as_dict(self) -> dict:
        return {
            "max_feature": self.max_feature,
            "max_depth": self.max_depth,
            "min_sample_leaf": self.min_sample_leaf,
            "min_sample_split": self.min_sample_split,
        }


DEFAULT_CART = CartHyperParams()

_TIE_RTOL = 1e-9


class RegressionTree:
    """Array-backed binary tree. Leaves have ``feature == -1``."""

    def __init__(self, n_features: int, feature_names: Sequence[str] | None = None):
        self.n_features = n_features
        self.feature_names = tuple(feature_names) if feature_names is not None else None
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_samples: list[int] = []
        self.depth: list[int] = []

    def _add(self, value: float, n: int, depth: int) -> int:
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.n_samples.append(n)
        self.depth.append(depth)
        return len(self.value) - 1

    @property
    def node_count(self) -> int:
        return len(self.value)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    @property
    def max_depth(self) -> int:
        return max(self.depth) if self.depth else 0

    def leaves(self) -> list[int]:
        return [i for i in range(self.node_count) if self.is_leaf(i)]

    def internal_nodes(self) -> list[int]:
        return [i for i in range(self.node_count) if not self.is_leaf(i)]

    def used_features(self) -> set[int]:
        return {self.feature[i] for i in self.internal_nodes()}

    def used_feature_names(self) -> list[str]:
        names = self.feature_names or tuple(str(i) for i in range(self.n_features))
        return [names[i] for i in sorted(self.used_features())]

    def apply(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.n_features:
            raise ShapeError(f"expected a vector of {self.n_features} features, got shape {x.shape}")
        return self.value[self.apply(x)]

    def predict_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) matrix, got shape {X.shape}")
        return np.array([self.value[self.apply(row)] for row in X])

    def sse(self, X, y) -> float:
        resid = self.predict_many(X) - np.asarray(y, dtype=float)
        return float(resid @ resid)

    def to_dict(self, node: int = 0) -> dict:
        if self.is_leaf(node):
            return {"leaf": self.value[node], "n": self.n_samples[node]}
        out: dict[str, Any] = {"feature": self.feature[node]}
        if self.feature_names:
            out["name"] = self.feature_names[self.feature[node]]
        out["threshold"] = self.threshold[node]
        out["left"] = self.to_dict(self.left[node])
        out["right"] = self.to_dict(self.right[node])
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: Mapping, n_features: int, feature_names=None) -> "RegressionTree":
        tree = cls(n_features, feature_names)

        def build(node: Mapping, depth: int) -> int:
            if "leaf" in node:
                return tree._add(float(node["leaf"]), int(node["n"]), depth)
            i = tree._add(math.nan, 0, depth)
            tree.feature[i] = int(node["feature"])
            tree.threshold[i] = float(node["threshold"])
            tree.left[i] = build(node["left"], depth + 1)
            tree.right[i] = build(node["right"], depth + 1)
            tree.n_samples[i] = tree.n_samples[tree.left[i]] + tree.n_samples[tree.right[i]]
            return i

        build(d, 0)
        return tree


def _best_split(cols: np.ndarray, yn: np.ndarray, min_leaf: int, col_ids: np.ndarray, sizes: np.ndarray):
    """Best (column, threshold) over the candidate columns ``cols``, or None.

    Scores every midpoint between consecutive distinct values; SSE ties go to the
    lower column, then the lower threshold. ``col_ids`` is ``arange(n_features)`` and
    ``sizes`` is ``arange(n_rows + 1)`` as a float column, both built once per fit.
    """
    n, k = cols.shape
    if n < 2 * min_leaf:
        return None
    order = cols.argsort(axis=0, kind="stable")
    xs = cols[order, col_ids[:k]]
    ys = (yn - yn.sum() / n)[order]
    csum = ys.cumsum(axis=0)
    csq = (ys * ys).cumsum(axis=0)
    total, total_sq = csum[-1], csq[-1]
    lo, hi = min_leaf, n - min_leaf  # left size ranges over lo..hi
    sizes = sizes[lo:hi + 1]
    sl, sql = csum[lo - 1:hi], csq[lo - 1:hi]
    sse = (sql - sl * sl / sizes) + ((total_sq - sql) - (total - sl) ** 2 / (n - sizes))
    sse[xs[lo - 1:hi] >= xs[lo:hi + 1]] = np.inf
    best = sse.min()
    if best == np.inf:
        return None
    tol = _TIE_RTOL * max(1.0, float(total_sq[0]))
    # column-major scan: first column, then first position
    flat = int(np.flatnonzero((sse <= best + tol).T)[0])
    j, pos = divmod(flat, sse.shape[0])
    i = lo + pos
    return j, float((xs[i - 1, j] + xs[i, j]) / 2.0)


def cart_fit(train: SupervisedTable | tuple, hp: CartHyperParams = DEFAULT_CART, seed: int = 0,
             feature_names: Sequence[str] | None = None) -> RegressionTree:
    """Grow a regression tree greedily, depth first (left subtree before right).

    ``train`` is a SupervisedTable or an ``(X, y)`` pair.
    """
    if isinstance(train, SupervisedTable):
        X, y = train.X, train.y
        feature_names = feature_names or train.feature_names
    else:
        X, y = train
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise FitError("cannot fit a tree on an empty table")
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"X shape {X.shape} does not match y length {y.shape[0]}")

    n_features = X.shape[1]
    k = hp.n_candidates(n_features)
    max_depth = hp.max_depth if hp.max_depth is not None else math.inf
    min_leaf = int(hp.min_sample_leaf)
    min_split = hp.effective_min_split
    rng = np.random.default_rng(seed)
    tree = RegressionTree(n_features, feature_names)
    col_ids = np.arange(n_features)
    sizes = np.arange(len(y) + 1, dtype=float)[:, None]

    def grow(idx: np.ndarray, depth: int) -> int:
        yn = y[idx]
        n = len(idx)
        node = tree._add(float(yn.sum() / n), n, depth)
        if depth >= max_depth or n < min_split or yn.max() == yn.min():
            return node
        if k < n_features:
            feats = np.sort(rng.choice(n_features, size=k, replace=False))
            cols = X[idx][:, feats]
        else:
            feats = None
            cols = X[idx]
        split = _best_split(cols, yn, min_leaf, col_ids, sizes)
        if split is None:
            return node
        j, thr = split
        f = int(feats[j]) if feats is not None else j
        mask = cols[:, j] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree


def tree_predict(tree: RegressionTree, features) -> float:
    return tree.predict(features)


# --- baselines ---------------------------------------------------------

class LearnerKind(str, enum.Enum):
    KNN = "KNN"
    LNR = "LNR"
    RFT = "RFT"
    CART = "CART"
    DECART = "DECART"

    @classmethod
    def parse(cls, text: str) -> "LearnerKind":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown learner {text!r}; choose from {[k.value for k in cls]}") from None


LEARNER_ORDER = (LearnerKind.KNN, LearnerKind.LNR, LearnerKind.RFT, LearnerKind.CART, LearnerKind.DECART)

_DEFAULT_PARAMS: dict[LearnerKind, dict] = {
    LearnerKind.KNN: {"k": 5},
    LearnerKind.LNR: {"ridge": 1e-8},
    LearnerKind.RFT: {"n_trees": 100, "bootstrap": True, "max_feature": "sqrt"},
    LearnerKind.CART: {"hp": DEFAULT_CART},
    LearnerKind.DECART: {},
}


@dataclass(frozen=True)
class LearnerSpec:
    kind: LearnerKind
    params: Mapping[str, Any] = field(default_factory=dict)

    def get(self, key: str):
        if key in self.params:
            return self.params[key]
        return _DEFAULT_PARAMS[self.kind][key]

    @classmethod
    def default(cls, kind: LearnerKind | str) -> "LearnerSpec":
        kind = LearnerKind.parse(kind) if isinstance(kind, str) else kind
        return cls(kind, dict(_DEFAULT_PARAMS[kind]))


def knn_predict(X, y, x, k: int = 5) -> float:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k = min(k, len(y))
    d2 = ((X - np.asarray(x, dtype=float)) ** 2).sum(axis=1)
    nearest = np.argsort(d2, kind="stable")[:k]
    return float(y[nearest].mean())


def ols_fit(X, y, ridge: float = 1e-8) -> np.ndarray:
    """Coefficients [intercept, w...] from the normal equations.

    A ``ridge`` term is added to the Gram diagonal only when it is singular.
    """
    X = np.asarray(X, dtype=float)
    A = np.column_stack([np.ones(len(X)), X])
    G = A.T @ A
    b = A.T @ np.asarray(y, dtype=float)
    if np.linalg.matrix_rank(G) < G.shape[0]:
        G = G + ridge * np.eye(G.shape[0])
    try:
        return np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(G, b, rcond=None)[0]


def ols_predict(coef: np.ndarray, x) -> float:
    return float(coef[0] + np.asarray(x, dtype=float) @ coef[1:])


class RandomForest:
    def __init__(self, trees: list[RegressionTree]):
        self.trees = trees

    def predict(self, x) -> float:
        return float(np.mean([t.predict(x) for t in self.trees]))


def forest_fit(X, y, n_trees: int = 100, seed: int = 0, bootstrap: bool = True,
               max_feature: float | str | None = "sqrt", hp: CartHyperParams | None = None) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise FitError("cannot fit a forest on an empty table")
    p = X.shape[1]
    if max_feature == "sqrt":
        max_feature = math.sqrt(p) / p
    base = hp or DEFAULT_CART
    hp = CartHyperParams(max_feature, base.max_depth, base.min_sample_leaf, base.min_sample_split)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        tree_seed = int(rng.integers(2**63 - 1))
        if bootstrap:
            rows = rng.integers(0, len(y), size=len(y))
            trees.append(cart_fit((X[rows], y[rows]), hp, tree_seed))
        else:
            trees.append(cart_fit((X, y), hp, tree_seed))
    return RandomForest(trees)


def baseline_fit_predict(spec: LearnerSpec, train: SupervisedTable, test_features, seed: int = 0) -> float:
    if len(train) == 0:
        raise FitError("empty training table")
    x = np.asarray(test_features, dtype=float)
    if x.shape != (train.X.shape[1],):
        raise ShapeError(f"test vector has shape {x.shape}, expected ({train.X.shape[1]},)")
    kind = spec.kind
    if kind is LearnerKind.KNN:
        return knn_predict(train.X, train.y, x, int(spec.get("k")))
    if kind is LearnerKind.LNR:
        return ols_predict(ols_fit(train.X, train.y, float(spec.get("ridge"))), x)
    if kind is LearnerKind.RFT:
        forest = forest_fit(train.X, train.y, int(spec.get("n_trees")), seed,
                            bool(spec.get("bootstrap")), spec.get("max_feature"))
        return forest.predict(x)
    if kind is LearnerKind.CART:
        return cart_fit(train, spec.get("hp"), seed).predict(x)
    raise ValueError(f"{kind.value} is not a baseline learner")
