"""Seeded synthetic project corpora with learnable cross-feature structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FEATURES, ProjectSeries, add_months, series_from_matrix


class SyntheticSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    project_count: int = 50
    months_per_project: int = 60
    noise_scale: float = 0.15
    seed: int = 0
    drift: float = 0.5
    start_month: str = "2015-03"

    def __post_init__(self):
        if self.project_count < 1:
            raise SyntheticSpecError("project_count must be >= 1")
        if self.months_per_project < 14:
            raise SyntheticSpecError("months_per_project must be >= 14")
        if self.noise_scale < 0:
            raise SyntheticSpecError("noise_scale must be >= 0")


def _activity(rng: np.random.Generator, n: int) -> np.ndarray:
    """Latent monthly activity: a rise-then-decay envelope times an AR(1) wobble."""
    t = np.arange(n, dtype=float)
    peak = rng.uniform(3, n / 3)
    level = rng.uniform(np.log(30), np.log(250))
    decay = rng.uniform(0.005, 0.04)
    envelope = np.where(t < peak, (t + 1) / (peak + 1), np.exp(-decay * (t - peak)))
    wobble = np.zeros(n)
    for i in range(1, n):
        wobble[i] = 0.7 * wobble[i - 1] + rng.normal(0, 0.25)
    return np.exp(level + wobble) * envelope + 1.0


def _project(rng: np.random.Generator, n: int, noise: float, drift: float) -> np.ndarray:
    act = _activity(rng, n)
    phase = np.linspace(0.0, 1.0, n)
    # per-project rates; some of them drift over the project's life
    commit_rate = rng.uniform(0.8, 2.5) * (1 + drift * rng.uniform(-0.6, 0.6) * phase)
    pr_share = rng.uniform(0.15, 0.5)
    merge_share = rng.uniform(0.5, 0.9) * (1 - 0.3 * drift * phase)
    issue_rate = rng.uniform(0.1, 0.6) * (1 + drift * rng.uniform(-0.8, 0.8) * phase)
    star_base = rng.uniform(20, 150)
    star_decay = rng.uniform(0.01, 0.06)

    def jitter(x: np.ndarray) -> np.ndarray:
        if noise == 0:
            return x
        return x * np.exp(rng.normal(0, noise, size=x.shape))

    def count(x: np.ndarray) -> np.ndarray:
        return np.maximum(np.rint(x), 0).astype(np.int64)

    commits = count(jitter(commit_rate * act))
    contributors = count(jitter(1 + np.sqrt(commits) * rng.uniform(0.4, 0.9)))
    open_prs = count(jitter(pr_share * commits + 0.3 * contributors))
    merged_prs = count(jitter(merge_share * open_prs))
    closed_prs = merged_prs + count(jitter(0.15 * open_prs))
    pr_mergers = np.minimum(contributors, count(jitter(1 + merged_prs / 12)))
    pr_comments = count(jitter(1.8 * open_prs + 0.5 * merged_prs))
    t = np.arange(n, dtype=float)
    popularity = star_base * np.exp(-star_decay * t) + 0.15 * commits
    stars = count(jitter(popularity))
    forks = count(jitter(0.12 * stars + 0.2 * contributors))
    open_issues = count(jitter(issue_rate * act * 0.3 + 0.05 * stars))
    # closing tracks last month's openings, so it carries some state
    prev_open = np.concatenate([[open_issues[0]], open_issues[:-1]])
    closed_issues = count(jitter(0.6 * prev_open + 0.3 * open_issues + 0.02 * commits))
    issue_comments = count(jitter(2.5 * open_issues + 1.2 * closed_issues))

    cols = {
        "commits": commits, "contributors": contributors, "stars": stars,
        "open_prs": open_prs, "closed_prs": closed_prs, "merged_prs": merged_prs,
        "pr_mergers": pr_mergers, "pr_comments": pr_comments, "open_issues": open_issues,
        "closed_issues": closed_issues, "issue_comments": issue_comments, "forks": forks,
    }
    return np.column_stack([cols[name] for name in FEATURES])


def generate_synthetic(spec: SyntheticSpec) -> list[ProjectSeries]:
    root = np.random.SeedSequence(spec.seed)
    out = []
    for i, child in enumerate(root.spawn(spec.project_count)):
        rng = np.random.default_rng(child)
        offset = int(rng.integers(0, 24))
        values = _project(rng, spec.months_per_project, spec.noise_scale, spec.drift)
        out.append(series_from_matrix(f"synthetic/project-{i:03d}", add_months(spec.start_month, offset), values))
    return out
