"""Differential evolution and the DE-tuned CART learner (DECART)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import InsufficientDataError, SupervisedTable
from .learners import CART_RANGES, CartHyperParams, RegressionTree, cart_fit


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class DEConfig:
    np: int = 20
    cf: float = 0.75
    f: float = 0.3
    lives: int = 10

    def __post_init__(self):
        if self.np < 4:
            raise ConfigurationError(f"np must be >= 4 (three donors plus the member), got {self.np}")
        if not 0.0 <= self.cf <= 1.0:
            raise ConfigurationError(f"cf must lie in [0, 1], got {self.cf}")
        if not self.f > 0:
            raise ConfigurationError(f"f must be positive, got {self.f}")
        if self.lives < 1:
            raise ConfigurationError(f"lives must be >= 1, got {self.lives}")


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    integer: bool = False


@dataclass(frozen=True)
class SearchBox:
    dims: tuple[Dimension, ...]

    @property
    def low(self) -> np.ndarray:
        return np.array([d.low for d in self.dims], dtype=float)

    @property
    def high(self) -> np.ndarray:
        return np.array([d.high for d in self.dims], dtype=float)

    def __len__(self) -> int:
        return len(self.dims)

    def clip(self, v: np.ndarray) -> np.ndarray:
        return np.clip(v, self.low, self.high)

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.low) and np.all(v <= self.high))

    @classmethod
    def continuous(cls, low: Sequence[float], high: Sequence[float]) -> "SearchBox":
        return cls(tuple(Dimension(f"x{i}", float(a), float(b)) for i, (a, b) in enumerate(zip(low, high))))


CART_BOX = SearchBox((
    Dimension("max_feature", *CART_RANGES["max_feature"]),
    Dimension("max_depth", *CART_RANGES["max_depth"], integer=True),
    Dimension("min_sample_leaf", *CART_RANGES["min_sample_leaf"], integer=True),
    Dimension("min_sample_split", *CART_RANGES["min_sample_split"], integer=True),
))


@dataclass
class DEState:
    frontier: np.ndarray
    scores: np.ndarray
    best: np.ndarray
    best_value: float
    lives_remaining: int
    generation: int = 0
    rng_seed: int = 0


@dataclass
class DEResult:
    best: np.ndarray
    best_value: float
    evaluations: int
    generations: int
    history: list[tuple[int, float]] = field(default_factory=list)
    state: DEState | None = None

    def __iter__(self):
        # allows ``best, value, evals = de_optimize(...)``
        return iter((self.best, self.best_value, self.evaluations))


def de_optimize(objective: Callable[[np.ndarray], float], box: SearchBox, cfg: DEConfig = DEConfig(),
                seed: int = 0, on_evaluate: Callable[[np.ndarray, float], None] | None = None) -> DEResult:
    """Minimise ``objective`` over ``box``.

    Each generation builds a whole new frontier from the previous one. A member is
    replaced only on strict improvement. Lives drop by one per generation and rise
    by one whenever a new global best appears; the run stops when none are left.
    """
    low, high = box.low, box.high
    if not np.all(low < high):
        raise ConfigurationError("search box is degenerate: every dimension needs low < high")

    rng = np.random.default_rng(seed)
    dim = len(box)
    evaluations = 0

    def evaluate(v: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        value = float(objective(v))
        if on_evaluate is not None:
            on_evaluate(v, value)
        return value

    frontier = low + rng.random((cfg.np, dim)) * (high - low)
    scores = np.array([evaluate(v) for v in frontier])
    b = int(np.argmin(scores))
    state = DEState(frontier, scores, frontier[b].copy(), float(scores[b]), cfg.lives, 0, seed)
    history = [(0, state.best_value)]

    while state.lives_remaining > 0:
        nxt = state.frontier.copy()
        nxt_scores = state.scores.copy()
        for i in range(cfg.np):
            others = [j for j in range(cfg.np) if j != i]
            x, y, z = state.frontier[rng.choice(others, size=3, replace=False)]
            new = state.frontier[i].copy()
            mutate = rng.random(dim) < cfg.cf
            new[mutate] = x[mutate] + cfg.f * (z[mutate] - y[mutate])
            new = np.clip(new, low, high)
            score = evaluate(new)
            if score < state.scores[i]:
                nxt[i] = new
                nxt_scores[i] = score
            if score < state.best_value:
                state.best = new.copy()
                state.best_value = score
                state.lives_remaining += 1
        state.frontier, state.scores = nxt, nxt_scores
        state.generation += 1
        state.lives_remaining -= 1
        history.append((state.generation, state.best_value))

    return DEResult(state.best, state.best_value, evaluations, state.generation, history, state)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def decode_hyperparams(vector: Sequence[float], box: SearchBox = CART_BOX) -> CartHyperParams:
    v = box.clip(np.asarray(vector, dtype=float))
    vals = [(_round_half_up(x) if d.integer else float(x)) for x, d in zip(v, box.dims)]
    return CartHyperParams(*vals)


@dataclass
class TuneResult:
    params: CartHyperParams
    tree: RegressionTree
    log: list[tuple[int, float]]
    evaluations: int
    best_vector: np.ndarray

    def __iter__(self):
        return iter((self.params, self.tree, self.log))


def decart_tune(train: SupervisedTable, cfg: DEConfig = DEConfig(), seed: int = 0) -> TuneResult:
    """Tune CART on ``train`` with DE, validating on its last row, then refit on all rows."""
    if len(train) < 3:
        raise InsufficientDataError(f"DECART needs >= 3 training rows, got {len(train)}")
    inner = (train.X[:-1], train.y[:-1])
    val_x, val_y = train.X[-1], float(train.y[-1])
    n_features = train.X.shape[1]

    # Many vectors decode to the same tree; fits are deterministic so cache them.
    cache: dict[tuple, float] = {}

    def objective(v: np.ndarray) -> float:
        hp = decode_hyperparams(v)
        key = (hp.n_candidates(n_features), hp.max_depth, hp.min_sample_leaf, hp.effective_min_split)
        if key not in cache:
            cache[key] = abs(cart_fit(inner, hp, seed).predict(val_x) - val_y)
        return cache[key]

    result = de_optimize(objective, CART_BOX, cfg, seed)
    params = decode_hyperparams(result.best)
    tree = cart_fit(train, params, seed)
    return TuneResult(params, tree, result.history, result.evaluations, result.best)


def write_tuning_log(log: Sequence[tuple[int, float]], fh) -> None:
    fh.write("generation,best_value\n")
    for gen, value in log:
        fh.write(f"{gen},{value!r}\n")
