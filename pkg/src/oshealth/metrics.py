"""Error measures: MRE, MAE and standardized accuracy (SA)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# MRE reported when the actual value is 0 but the prediction is not; any value > 1 qualifies.
ZERO_ACTUAL_MRE = 2.0


class MetricDomainError(ValueError):
    pass


@dataclass(frozen=True)
class EvalPoint:
    predict: float
    actual: float


@dataclass(frozen=True)
class MetricValue:
    metric: str
    value: float
    defined: bool = True

    def __float__(self) -> float:
        return self.value


def _points(points: Iterable) -> list[EvalPoint]:
    out = [p if isinstance(p, EvalPoint) else EvalPoint(*p) for p in points]
    if not out:
        raise MetricDomainError("need at least one evaluation point")
    return out


def mre(p: EvalPoint | tuple) -> MetricValue:
    p = p if isinstance(p, EvalPoint) else EvalPoint(*p)
    if p.actual != 0:
        return MetricValue("MRE", abs(p.predict - p.actual) / abs(p.actual))
    return MetricValue("MRE", 0.0 if p.predict == 0 else ZERO_ACTUAL_MRE)


def mae(points: Sequence) -> MetricValue:
    pts = _points(points)
    return MetricValue("MAE", math.fsum(abs(q.predict - q.actual) for q in pts) / len(pts))


def mae_guess(points: Sequence, train_targets: Sequence[float]) -> float:
    """MAE of always predicting the training mean (the limit of many random guesses)."""
    pts = _points(points)
    if len(train_targets) == 0:
        raise MetricDomainError("need at least one training target")
    guess = math.fsum(train_targets) / len(train_targets)
    return math.fsum(abs(guess - q.actual) for q in pts) / len(pts)


def sa(points: Sequence, train_targets: Sequence[float]) -> MetricValue:
    """Standardized accuracy in percent; undefined when the naive guess is already exact."""
    err = mae(points).value
    base = mae_guess(points, train_targets)
    if base == 0:
        if err == 0:
            return MetricValue("SA", 100.0)
        return MetricValue("SA", math.nan, defined=False)
    return MetricValue("SA", (1.0 - err / base) * 100.0)


def mae_guess_monte_carlo(points: Sequence, train_targets: Sequence[float], runs: int = 1000,
                          seed: int = 0) -> float:
    """Random-guess MAE averaged over ``runs`` draws of training targets.

    Only used to cross-check :func:`mae_guess`.
    """
    pts = _points(points)
    actual = np.array([q.actual for q in pts])
    rng = np.random.default_rng(seed)
    targets = np.asarray(train_targets, dtype=float)
    draws = rng.choice(targets, size=(runs, len(pts)))
    return float(np.abs(draws - actual).mean())
