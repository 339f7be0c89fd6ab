"""Monthly activity schema, series container and the supervised/horizon transforms."""
from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Column order used everywhere: CSV files, tree feature indices, reports.
FEATURES = (
    "commits",
    "contributors",
    "stars",
    "open_prs",
    "closed_prs",
    "merged_prs",
    "pr_mergers",
    "pr_comments",
    "open_issues",
    "closed_issues",
    "issue_comments",
    "forks",
)

CSV_HEADER = ("project_id", "month_index", "calendar_month") + FEATURES

HORIZONS = (1, 3, 6, 12)
MIN_TRAIN_MONTHS = 2

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


class InsufficientDataError(ValueError):
    """Series is too short for the requested split."""


class IndicatorId(str, enum.Enum):
    COMMIT = "commit"
    CONTRIBUTOR = "contributor"
    STAR = "star"
    OPEN_PR = "openPR"
    CLOSE_PR = "closePR"
    OPEN_ISSUE = "openISSUE"
    CLOSED_ISSUE = "closedISSUE"

    @property
    def column(self) -> str:
        return _INDICATOR_COLUMN[self]

    @classmethod
    def parse(cls, text: str) -> "IndicatorId":
        key = text.strip().lower()
        for member in cls:
            if key in (member.value.lower(), member.name.lower(), member.column):
                return member
        raise ValueError(f"unknown indicator: {text!r}")


_INDICATOR_COLUMN = {
    IndicatorId.COMMIT: "commits",
    IndicatorId.CONTRIBUTOR: "contributors",
    IndicatorId.STAR: "stars",
    IndicatorId.OPEN_PR: "open_prs",
    IndicatorId.CLOSE_PR: "closed_prs",
    IndicatorId.OPEN_ISSUE: "open_issues",
    IndicatorId.CLOSED_ISSUE: "closed_issues",
}


def parse_month(label: str) -> tuple[int, int]:
    m = _MONTH_RE.match(label)
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise ValueError(f"bad calendar month {label!r}, expected YYYY-MM")
    return int(m.group(1)), int(m.group(2))


def month_label(year: int, month: int) -> str:
    return f"{year:04d}-{month:02d}"


def add_months(label: str, k: int) -> str:
    y, m = parse_month(label)
    total = y * 12 + (m - 1) + k
    return month_label(total // 12, total % 12 + 1)


@dataclass(frozen=True)
class MonthlyRecord:
    month_index: int
    calendar_month: str
    commits: int = 0
    contributors: int = 0
    stars: int = 0
    open_prs: int = 0
    closed_prs: int = 0
    merged_prs: int = 0
    pr_mergers: int = 0
    pr_comments: int = 0
    open_issues: int = 0
    closed_issues: int = 0
    issue_comments: int = 0
    forks: int = 0

    def values(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in FEATURES)


@dataclass(frozen=True)
class ProjectSeries:
    project_id: str
    records: tuple[MonthlyRecord, ...]
    start_month: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.start_month and self.records:
            object.__setattr__(self, "start_month", self.records[0].calendar_month)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_months(self) -> int:
        return len(self.records)

    def matrix(self) -> np.ndarray:
        """All 12 features as an (N, 12) float array in FEATURES order."""
        return np.array([r.values() for r in self.records], dtype=float).reshape(-1, len(FEATURES))

    def record(self, month_index: int) -> MonthlyRecord:
        return self.records[month_index - 1]


@dataclass(frozen=True)
class Finding:
    kind: str
    month_index: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def kinds(self) -> list[str]:
        return [f.kind for f in self.findings]


@dataclass(frozen=True)
class SupervisedTable:
    target: IndicatorId
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    month_indices: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.y)

    def rows(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(x), float(t)) for x, t in zip(self.X, self.y)]

    def head(self, n: int) -> "SupervisedTable":
        return SupervisedTable(self.target, self.X[:n], self.y[:n], self.feature_names, self.month_indices[:n])


@dataclass(frozen=True)
class HorizonSplit:
    horizon: int
    train: SupervisedTable
    test_features: np.ndarray
    test_actual: float
    test_month: int


def feature_names_for(target: IndicatorId) -> tuple[str, ...]:
    return tuple(name for name in FEATURES if name != target.column)


def validate_series(series: ProjectSeries) -> ValidationReport:
    """Collect every invariant violation; never raises."""
    findings: list[Finding] = []
    recs = series.records
    if len(recs) < MIN_TRAIN_MONTHS:
        findings.append(Finding("too_short", None, f"series has {len(recs)} months, need >= {MIN_TRAIN_MONTHS}"))
    expected = 1
    prev_month = None
    for rec in recs:
        if rec.month_index != expected:
            findings.append(Finding("gap", expected, f"gap at index {expected}: found month_index {rec.month_index}"))
            expected = rec.month_index
        expected += 1
        for name in FEATURES:
            v = getattr(rec, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                findings.append(Finding("non_integer", rec.month_index, f"{name}={v!r} is not an integer"))
            elif v < 0:
                findings.append(Finding("negative", rec.month_index, f"negative feature {name}={v}"))
        try:
            ym = parse_month(rec.calendar_month)
        except ValueError as exc:
            findings.append(Finding("bad_month", rec.month_index, str(exc)))
            continue
        if prev_month is not None and ym <= prev_month:
            findings.append(Finding("month_order", rec.month_index,
                                    f"calendar month {rec.calendar_month} does not increase"))
        prev_month = ym
    return ValidationReport(tuple(findings))


def to_supervised(series: ProjectSeries, target: IndicatorId, first: int, last: int) -> SupervisedTable:
    n = series.n_months
    if not 1 <= first <= last <= n:
        raise IndexError(f"month range {first}..{last} outside 1..{n}")
    data = series.matrix()[first - 1:last]
    col = FEATURES.index(target.column)
    X = np.delete(data, col, axis=1)
    return SupervisedTable(
        target=target,
        X=X,
        y=data[:, col].copy(),
        feature_names=feature_names_for(target),
        month_indices=tuple(range(first, last + 1)),
    )


def _test_point(series: ProjectSeries, target: IndicatorId, month: int):
    row = to_supervised(series, target, month, month)
    return row.X[0], float(row.y[0])


def split_horizon(series: ProjectSeries, target: IndicatorId, horizon: int) -> HorizonSplit:
    """Train on months 1..N-horizon, test on month N."""
    n = series.n_months
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    last_train = n - horizon
    if last_train < MIN_TRAIN_MONTHS:
        raise InsufficientDataError(
            f"{series.project_id}: {n} months leaves {max(last_train, 0)} training months for horizon {horizon}")
    x, y = _test_point(series, target, n)
    return HorizonSplit(horizon, to_supervised(series, target, 1, last_train), x, y, n)


def split_midway(series: ProjectSeries, target: IndicatorId, horizon: int = 12) -> HorizonSplit:
    """Train on months 1..floor(N/2), test on month floor(N/2)+12."""
    n = series.n_months
    half = n // 2
    if n < 26 or half + horizon > n:
        raise InsufficientDataError(f"{series.project_id}: {n} months is too short for a midway split (need 26)")
    x, y = _test_point(series, target, half + horizon)
    return HorizonSplit(horizon, to_supervised(series, target, 1, half), x, y, half + horizon)


# --- CSV ---------------------------------------------------------------

def write_series_csv(series: ProjectSeries, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in series.records:
        w.writerow([series.project_id, r.month_index, r.calendar_month, *r.values()])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def read_series_csv(path: str | Path) -> ProjectSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_series_csv(fh)


def parse_series_csv(lines: Iterable[str]) -> ProjectSeries:
    reader = csv.reader(lines)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    project_id = None
    records = []
    for row in reader:
        if not row:
            continue
        pid, idx, month, *vals = row
        if project_id is None:
            project_id = pid
        elif pid != project_id:
            raise ValueError(f"mixed project ids {project_id!r} and {pid!r} in one file")
        records.append(MonthlyRecord(int(idx), month, *(int(v) for v in vals)))
    if project_id is None:
        raise ValueError("CSV has no data rows")
    return ProjectSeries(project_id, tuple(records))


def project_filename(project_id: str) -> str:
    return project_id.replace("/", "__") + ".csv"


def load_dataset(directory: str | Path) -> list[ProjectSeries]:
    paths = sorted(Path(directory).glob("*.csv"))
    return [read_series_csv(p) for p in paths]


def series_from_matrix(project_id: str, start_month: str, values: Sequence[Sequence[int]]) -> ProjectSeries:
    records = tuple(
        MonthlyRecord(i + 1, add_months(start_month, i), *(int(v) for v in row))
        for i, row in enumerate(values)
    )
    return ProjectSeries(project_id, records, start_month)
