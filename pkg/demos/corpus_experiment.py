"""Run every learner on a small synthetic corpus and print the report tables."""
import time

from oshealth.analysis import win_rates
from oshealth.data import IndicatorId
from oshealth.harness import ExperimentPlan, run_experiment
from oshealth.learners import LearnerKind
from oshealth.synthetic import SyntheticSpec, generate_synthetic

corpus = generate_synthetic(SyntheticSpec(project_count=10, months_per_project=48, seed=2020))
plan = ExperimentPlan(horizons=(1, 12), master_seed=11)

start = time.perf_counter()
result = run_experiment(plan, corpus)
print(f"{len(result.outcomes)} outcomes, {len(result.skips)} skips in {time.perf_counter() - start:.0f}s")

# win rate: lowest MRE per project, or within 0.3 pooled sigma of it
for h in plan.horizons:
    print(f"\nMRE win rates, horizon {h}")
    for ind in IndicatorId:
        wr = win_rates(result.outcomes, "MRE", ind, h)
        print(f"  {ind.value:12s}", "  ".join(f"{k.value} {wr.rates[k]:5.1f}" for k in LearnerKind))

print()
print(result.reports.to_text())
