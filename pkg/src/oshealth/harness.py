"""Run every (project, indicator, horizon, learner) task and collect scored outcomes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import EvalOutcome, ReportTables, summarize
from .data import (
    HORIZONS,
    HorizonSplit,
    IndicatorId,
    InsufficientDataError,
    ProjectSeries,
    load_dataset,
    split_horizon,
    split_midway,
    validate_series,
)
from .decart import DEConfig, decart_tune
from .learners import (
    LEARNER_ORDER,
    LearnerKind,
    LearnerSpec,
    baseline_fit_predict,
    cart_fit,
)
from .metrics import MetricValue, mre, sa

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    dataset_dir: str | None = None
    indicators: tuple[IndicatorId, ...] = tuple(IndicatorId)
    horizons: tuple[int, ...] = HORIZONS
    learners: tuple[LearnerKind, ...] = LEARNER_ORDER
    master_seed: int = 0
    midway_mode: bool = False
    de_config: DEConfig = DEConfig()
    jobs: int = 1

    def __post_init__(self):
        if not self.indicators or not self.horizons or not self.learners:
            raise ConfigurationError("indicators, horizons and learners must all be non-empty")
        bad = [h for h in self.horizons if h not in HORIZONS]
        if bad:
            raise ConfigurationError(f"horizons must be drawn from {HORIZONS}, got {bad}")
        object.__setattr__(self, "indicators", tuple(sorted(set(self.indicators), key=list(IndicatorId).index)))
        object.__setattr__(self, "horizons", tuple(sorted(set(self.horizons))))
        object.__setattr__(self, "learners", tuple(sorted(set(self.learners), key=LEARNER_ORDER.index)))

    def to_json(self) -> dict:
        return {
            "dataset_dir": self.dataset_dir,
            "indicators": [i.value for i in self.indicators],
            "horizons": list(self.horizons),
            "learners": [k.value for k in self.learners],
            "master_seed": self.master_seed,
            "midway_mode": self.midway_mode,
            "de_config": {"np": self.de_config.np, "cf": self.de_config.cf,
                          "f": self.de_config.f, "lives": self.de_config.lives},
        }


@dataclass(frozen=True)
class Skip:
    project_id: str
    indicator: IndicatorId
    horizon: int
    learner: LearnerKind
    reason: str

    def to_json(self) -> dict:
        return {"project_id": self.project_id, "indicator": self.indicator.value, "horizon": self.horizon,
                "learner": self.learner.value, "reason": self.reason}


@dataclass
class ExperimentResult:
    outcomes: list[EvalOutcome]
    skips: list[Skip]
    reports: ReportTables | None
    tuned: dict = field(default_factory=dict)


def task_seed(master_seed: int, project_id: str, indicator: IndicatorId, horizon: int,
              learner: LearnerKind | str, anchor: str = "end") -> int:
    """Stable per-task seed; depends only on the task's own key."""
    name = learner.value if isinstance(learner, LearnerKind) else learner
    key = f"{master_seed}|{project_id}|{indicator.value}|{horizon}|{name}|{anchor}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "big")


def _score(split: HorizonSplit, predict: float) -> tuple[MetricValue, MetricValue]:
    point = (predict, split.test_actual)
    return mre(point), sa([point], split.train.y.tolist())


def run_project(series: ProjectSeries, plan: ExperimentPlan) -> tuple[list[EvalOutcome], list[Skip], dict]:
    outcomes: list[EvalOutcome] = []
    skips: list[Skip] = []
    tuned: dict = {}
    anchor = "mid" if plan.midway_mode else "end"
    horizons = (12,) if plan.midway_mode else plan.horizons
    for indicator in plan.indicators:
        for horizon in horizons:
            try:
                if plan.midway_mode:
                    split = split_midway(series, indicator)
                else:
                    split = split_horizon(series, indicator, horizon)
            except InsufficientDataError as exc:
                skips.extend(Skip(series.project_id, indicator, horizon, k, str(exc)) for k in plan.learners)
                continue
            for kind in plan.learners:
                seed = task_seed(plan.master_seed, series.project_id, indicator, horizon, kind, anchor)
                used: tuple[str, ...] = ()
                fallback = False
                if kind is LearnerKind.DECART:
                    try:
                        result = decart_tune(split.train, plan.de_config, seed)
                        tree = result.tree
                        tuned[(series.project_id, indicator.value, horizon, anchor)] = {
                            "params": result.params.as_dict(), "tree": tree.to_dict()}
                    except InsufficientDataError as exc:
                        log.warning("%s %s h=%d: DECART fell back to default CART (%s)",
                                    series.project_id, indicator.value, horizon, exc)
                        tree = cart_fit(split.train, seed=seed)
                        fallback = True
                    predict = tree.predict(split.test_features)
                    used = tuple(tree.used_feature_names())
                elif kind is LearnerKind.CART:
                    tree = cart_fit(split.train, seed=seed)
                    predict = tree.predict(split.test_features)
                    used = tuple(tree.used_feature_names())
                else:
                    predict = baseline_fit_predict(LearnerSpec.default(kind), split.train, split.test_features, seed)
                m, s = _score(split, predict)
                outcomes.append(EvalOutcome(
                    series.project_id, indicator, horizon, kind, float(predict), split.test_actual, m, s,
                    anchor=anchor, test_month=split.test_month, train_months=len(split.train),
                    used_features=used, fallback=fallback,
                ))
    return outcomes, skips, tuned


def _run_one(args):
    return run_project(*args)


def run_experiment(plan: ExperimentPlan, series: Sequence[ProjectSeries] | None = None,
                   out_dir=None) -> ExperimentResult:
    """Evaluate every planned task. Reports and a manifest are written when ``out_dir`` is given."""
    inputs: dict[str, str] = {}
    if series is None:
        if plan.dataset_dir is None:
            raise ConfigurationError("no dataset given")
        paths = sorted(Path(plan.dataset_dir).glob("*.csv"))
        inputs = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in paths}
        series = load_dataset(plan.dataset_dir)
    series = sorted(series, key=lambda s: s.project_id)
    valid = []
    for s in series:
        report = validate_series(s)
        if report.ok:
            valid.append(s)
        else:
            log.warning("%s: invalid series skipped: %s", s.project_id, [f.message for f in report.findings])
    if not valid:
        raise ConfigurationError("dataset contains no valid project series")

    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            parts = list(pool.map(_run_one, [(s, plan) for s in valid]))
    else:
        parts = [run_project(s, plan) for s in valid]

    outcomes = sorted((o for p in parts for o in p[0]), key=lambda o: o.key)
    skips = [k for p in parts for k in p[1]]
    tuned = {key: v for p in parts for key, v in p[2].items()}
    reports = summarize(outcomes) if outcomes else None
    result = ExperimentResult(outcomes, skips, reports, tuned)
    if out_dir is not None:
        write_run(result, plan, out_dir, inputs)
    return result


# --- persistence ----------------------------------------------------------

OUTCOME_COLUMNS = ("project_id", "indicator", "horizon", "anchor", "learner", "test_month", "train_months",
                   "predict", "actual", "mre", "sa", "sa_defined", "fallback", "used_features")


def outcomes_to_csv(outcomes: Sequence[EvalOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OUTCOME_COLUMNS)
    for o in outcomes:
        w.writerow([o.project_id, o.indicator.value, o.horizon, o.anchor, o.learner.value, o.test_month,
                    o.train_months, repr(o.predict), repr(o.actual), repr(o.mre.value),
                    "" if not o.sa.defined else repr(o.sa.value), int(o.sa.defined), int(o.fallback),
                    ";".join(o.used_features)])
    return buf.getvalue()


def read_outcomes_csv(path) -> list[EvalOutcome]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            defined = row["sa_defined"] == "1"
            out.append(EvalOutcome(
                project_id=row["project_id"],
                indicator=IndicatorId.parse(row["indicator"]),
                horizon=int(row["horizon"]),
                learner=LearnerKind.parse(row["learner"]),
                predict=float(row["predict"]),
                actual=float(row["actual"]),
                mre=MetricValue("MRE", float(row["mre"])),
                sa=MetricValue("SA", float(row["sa"]) if defined else math.nan, defined),
                anchor=row["anchor"],
                test_month=int(row["test_month"]),
                train_months=int(row["train_months"]),
                used_features=tuple(f for f in row["used_features"].split(";") if f),
                fallback=row["fallback"] == "1",
            ))
    return out


def write_run(result: ExperimentResult, plan: ExperimentPlan, out_dir, inputs: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "outcomes.csv").write_text(outcomes_to_csv(result.outcomes), encoding="utf-8", newline="")
    if result.reports is not None:
        result.reports.write(out / "reports")
    if result.tuned:
        tuned = {f"{pid}|{ind}|h{h}|{anchor}": v for (pid, ind, h, anchor), v in sorted(result.tuned.items())}
        (out / "tuned.json").write_text(json.dumps(tuned, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    manifest = {
        "version": __version__,
        "plan": plan.to_json(),
        "inputs": inputs or {},
        "outcome_count": len(result.outcomes),
        "skips": [s.to_json() for s in result.skips],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def tune_dataset(series: Sequence[ProjectSeries], indicators: Sequence[IndicatorId], horizon: int,
                 master_seed: int, cfg: DEConfig = DEConfig()) -> dict:
    """DECART hyperparameters and trees per project and indicator, JSON-ready."""
    out: dict = {}
    for s in sorted(series, key=lambda s: s.project_id):
        per = {}
        for ind in indicators:
            try:
                split = split_horizon(s, ind, horizon)
                result = decart_tune(split.train, cfg, task_seed(master_seed, s.project_id, ind, horizon,
                                                                 LearnerKind.DECART))
            except InsufficientDataError as exc:
                per[ind.value] = {"skipped": str(exc)}
                continue
            per[ind.value] = {
                "params": result.params.as_dict(),
                "validation_error": result.log[-1][1],
                "evaluations": result.evaluations,
                "tree": result.tree.to_dict(),
            }
        out[s.project_id] = per
    return out
