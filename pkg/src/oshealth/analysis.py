"""Learner comparison (Cohen's d "nearly best" wins), feature usage and report tables."""
from __future__ import annotations

import csv
import io
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import FEATURES, IndicatorId, feature_names_for
from .learners import LEARNER_ORDER, LearnerKind, RegressionTree
from .metrics import MetricValue

COHEN_FRACTION = 0.3
LOWER_BETTER = "lower"
HIGHER_BETTER = "higher"
METRIC_DIRECTION = {"MRE": LOWER_BETTER, "SA": HIGHER_BETTER}
MISSING = "—"


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class EvalOutcome:
    project_id: str
    indicator: IndicatorId
    horizon: int
    learner: LearnerKind
    predict: float
    actual: float
    mre: MetricValue
    sa: MetricValue
    anchor: str = "end"
    test_month: int = 0
    train_months: int = 0
    used_features: tuple[str, ...] = ()
    fallback: bool = False

    @property
    def key(self) -> tuple:
        return (self.project_id, LEARNER_POS[self.learner], INDICATOR_POS[self.indicator], self.horizon, self.anchor)

    def metric(self, name: str) -> MetricValue:
        return self.mre if name == "MRE" else self.sa


INDICATOR_POS = {ind: i for i, ind in enumerate(IndicatorId)}
LEARNER_POS = {k: i for i, k in enumerate(LEARNER_ORDER)}


@dataclass(frozen=True)
class CohenThreshold:
    metric: str
    d: float


def cohen_threshold(values: Sequence[float], metric: str = "MRE") -> CohenThreshold:
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise ValueError("Cohen's d needs at least two values")
    # pstdev works in exact rationals, so equal values give exactly zero
    return CohenThreshold(metric, COHEN_FRACTION * statistics.pstdev(vals))


def win_flags(per_learner: Mapping, direction: str, d: CohenThreshold | float) -> dict:
    """A learner wins when it is the best or within ``d`` of the best."""
    if not per_learner:
        raise ValueError("nothing to compare")
    dval = d.d if isinstance(d, CohenThreshold) else float(d)
    vals = {k: float(v) for k, v in per_learner.items()}
    best = min(vals.values()) if direction == LOWER_BETTER else max(vals.values())
    return {k: (v == best or abs(v - best) < dval) for k, v in vals.items()}


def _cell_values(outcomes: Iterable[EvalOutcome], metric: str, indicator: IndicatorId, horizon: int,
                 anchor: str = "end") -> dict[str, dict[LearnerKind, MetricValue]]:
    by_project: dict[str, dict[LearnerKind, MetricValue]] = defaultdict(dict)
    for o in outcomes:
        if o.indicator == indicator and o.horizon == horizon and o.anchor == anchor:
            by_project[o.project_id][o.learner] = o.metric(metric)
    return by_project


@dataclass
class WinRates:
    rates: dict[LearnerKind, float]
    projects: int
    excluded: int
    d: float


def win_rates(outcomes: Sequence[EvalOutcome], metric: str, indicator: IndicatorId, horizon: int,
              learners: Sequence[LearnerKind] | None = None, anchor: str = "end") -> WinRates:
    """Percentage of projects on which each learner is best or nearly best.

    Projects where some learner's metric is undefined (SA with an exact naive
    guess) are left out of the cell and counted in ``excluded``.
    """
    cell = _cell_values(outcomes, metric, indicator, horizon, anchor)
    if learners is None:
        learners = sorted({k for per in cell.values() for k in per}, key=LEARNER_POS.get)
    missing = [(p, k.value) for p, per in sorted(cell.items()) for k in learners if k not in per]
    if missing:
        raise CoverageError(f"missing outcomes for (project, learner): {missing[:10]}")
    usable = {p: per for p, per in cell.items() if all(per[k].defined for k in learners)}
    excluded = len(cell) - len(usable)
    if not usable:
        return WinRates({k: math.nan for k in learners}, 0, excluded, math.nan)
    pooled = [per[k].value for per in usable.values() for k in learners]
    d = cohen_threshold(pooled, metric) if len(pooled) >= 2 else CohenThreshold(metric, 0.0)
    wins = {k: 0 for k in learners}
    for per in usable.values():
        flags = win_flags({k: per[k].value for k in learners}, METRIC_DIRECTION[metric], d)
        for k, won in flags.items():
            wins[k] += won
    n = len(usable)
    return WinRates({k: 100.0 * wins[k] / n for k in learners}, n, excluded, d.d)


@dataclass
class FeatureUsage:
    target: IndicatorId
    counts: dict[str, int]
    percentages: dict[str, float]
    n_trees: int

    def cell(self, feature: str) -> float | None:
        """Percentage for ``feature``; ``None`` for the target's own column."""
        if feature == self.target.column:
            return None
        return self.percentages[feature]


def _usage(target: IndicatorId, used: Iterable[Iterable[str]]) -> FeatureUsage:
    names = feature_names_for(target)
    counts = {name: 0 for name in names}
    total = 0
    for feats in used:
        total += 1
        for name in set(feats):
            counts[name] += 1
    if total == 0:
        raise ValueError("feature usage needs at least one tree")
    return FeatureUsage(target, counts, {k: 100.0 * v / total for k, v in counts.items()}, total)


def feature_usage(trees: Mapping[str, RegressionTree], target: IndicatorId) -> FeatureUsage:
    """Share of trees with at least one split on each candidate feature."""
    names = feature_names_for(target)
    return _usage(target, ([names[i] for i in t.used_features()] for t in trees.values()))


# --- report tables ----------------------------------------------------

def percentile_summary(values: Sequence[float]) -> tuple[float, float]:
    """(median, IQR) with linear interpolation between closest ranks."""
    arr = np.asarray(values, dtype=float)
    q25, q50, q75 = np.percentile(arr, [25, 50, 75])
    return float(q50), float(q75 - q25)


@dataclass
class Table:
    name: str
    title: str
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt_csv(v) for v in row])
        return buf.getvalue()

    def to_text(self) -> str:
        cells = [self.header] + [[_fmt_text(v) for v in row] for row in self.rows]
        widths = [max(len(str(r[i])) for r in cells) for i in range(len(self.header))]
        lines = [self.title]
        for r in cells:
            lines.append("  ".join(str(c).rjust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"


def _fmt_csv(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _fmt_text(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return MISSING
    if isinstance(v, float):
        return f"{round(v)}%"
    return str(v)


@dataclass
class ReportTables:
    tables: list[Table]

    def __getitem__(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def names(self) -> list[str]:
        return [t.name for t in self.tables]

    def to_text(self) -> str:
        return "\n".join(t.to_text() for t in self.tables)

    def write(self, directory) -> list:
        from pathlib import Path
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for t in self.tables:
            p = out / f"{t.name}.csv"
            p.write_text(t.to_csv(), encoding="utf-8", newline="")
            paths.append(p)
        txt = out / "tables.txt"
        txt.write_text(self.to_text(), encoding="utf-8", newline="")
        paths.append(txt)
        return paths


def _pct(v: float) -> float:
    return 100.0 * v


def summarize(outcomes: Sequence[EvalOutcome]) -> ReportTables:
    """Median/IQR tables per (indicator, learner, horizon), horizon ratios, win rates, feature usage.

    MRE and SA cells are percentages. SA cells ignore undefined values; the
    ``*_excluded`` tables give the excluded share.
    """
    if not outcomes:
        raise ValueError("no outcomes to summarize")
    groups: dict[tuple, list[EvalOutcome]] = defaultdict(list)
    for o in outcomes:
        groups[(o.anchor, o.indicator, o.learner, o.horizon)].append(o)
    anchors = sorted({o.anchor for o in outcomes})
    indicators = sorted({o.indicator for o in outcomes}, key=INDICATOR_POS.get)
    learners = sorted({o.learner for o in outcomes}, key=LEARNER_POS.get)
    horizons = sorted({o.horizon for o in outcomes})
    tables: list[Table] = []

    stats: dict[tuple, tuple[float, float]] = {}
    excluded: dict[tuple, float] = {}
    for key, group in groups.items():
        mres = [_pct(o.mre.value) for o in group]
        stats[key + ("MRE",)] = percentile_summary(mres)
        sas = [o.sa.value for o in group if o.sa.defined]
        excluded[key] = 100.0 * (len(group) - len(sas)) / len(group)
        stats[key + ("SA",)] = percentile_summary(sas) if sas else (math.nan, math.nan)

    for anchor in anchors:
        suffix = "" if anchor == "end" else f"_{anchor}"
        for h in horizons:
            for metric in ("MRE", "SA"):
                for which, label in ((0, "median"), (1, "iqr")):
                    t = Table(f"{metric.lower()}_{label}_h{h}{suffix}",
                              f"{metric} {label} ({anchor}-anchored, horizon {h})",
                              ["indicator"] + [k.value for k in learners])
                    for ind in indicators:
                        row = [ind.value]
                        for k in learners:
                            s = stats.get((anchor, ind, k, h, metric))
                            row.append(s[which] if s else None)
                        t.rows.append(row)
                    if not all(all(v is None for v in r[1:]) for r in t.rows):
                        tables.append(t)
            t = Table(f"sa_excluded_h{h}{suffix}", f"SA undefined share ({anchor}-anchored, horizon {h})",
                      ["indicator"] + [k.value for k in learners])
            for ind in indicators:
                t.rows.append([ind.value] + [excluded.get((anchor, ind, k, h)) for k in learners])
            tables.append(t)

        # ratio of each horizon to the 1-month value, per learner
        if 1 in horizons and len(horizons) > 1 and anchor == "end":
            for k in learners:
                for metric in ("MRE", "SA"):
                    for which, label in ((0, "median"), (1, "iqr")):
                        t = Table(f"ratio_{metric.lower()}_{label}_{k.value}",
                                  f"{k.value} {metric} {label} as a ratio of horizon 1",
                                  ["indicator"] + [f"h{h}" for h in horizons])
                        for ind in indicators:
                            base = stats.get((anchor, ind, k, 1, metric))
                            row = [ind.value]
                            for h in horizons:
                                s = stats.get((anchor, ind, k, h, metric))
                                if base is None or s is None or not base[which] or math.isnan(base[which]):
                                    row.append(None)
                                else:
                                    row.append(100.0 * s[which] / base[which])
                            t.rows.append(row)
                        t.rows.append(["median"] + [_nanmedian([r[i] for r in t.rows])
                                                    for i in range(1, len(horizons) + 1)])
                        tables.append(t)

        for metric in ("MRE", "SA"):
            t = Table(f"win_{metric.lower()}{suffix}", f"{metric} win rate ({anchor}-anchored)",
                      ["horizon", "indicator"] + [k.value for k in learners] + ["projects", "excluded"])
            for h in horizons:
                for ind in indicators:
                    if not any((anchor, ind, k, h) in groups for k in learners):
                        continue
                    try:
                        wr = win_rates(outcomes, metric, ind, h, learners, anchor)
                    except CoverageError:
                        continue
                    t.rows.append([h, ind.value] + [wr.rates[k] for k in learners] + [wr.projects, wr.excluded])
            tables.append(t)

        for h in horizons:
            tuned = [o for o in outcomes
                     if o.learner is LearnerKind.DECART and o.horizon == h and o.anchor == anchor]
            if not tuned:
                continue
            t = Table(f"feature_usage_h{h}{suffix}", f"DECART feature usage ({anchor}-anchored, horizon {h})",
                      ["target"] + list(FEATURES))
            for ind in indicators:
                used = [o.used_features for o in tuned if o.indicator == ind]
                if not used:
                    continue
                fu = _usage(ind, used)
                t.rows.append([ind.value] + [("n/a" if fu.cell(f) is None else fu.cell(f)) for f in FEATURES])
            tables.append(t)

    return ReportTables(tables)


def _nanmedian(vals):
    xs = [v for v in vals if isinstance(v, float) and not math.isnan(v)]
    return float(np.median(xs)) if xs else None
