"""Raw activity events and their monthly aggregation."""
from __future__ import annotations

import datetime as dt
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..data import FEATURES, MonthlyRecord, ProjectSeries, month_label, parse_month


class NoDataError(ValueError):
    pass


EVENT_KINDS = (
    "commit", "pr_open", "pr_close", "pr_merge", "pr_comment",
    "issue_open", "issue_close", "issue_comment", "star", "fork",
)

# event kind -> counted feature (contributors and pr_mergers are distinct-actor counts)
_COUNTED = {
    "commit": "commits",
    "pr_open": "open_prs",
    "pr_close": "closed_prs",
    "pr_merge": "merged_prs",
    "pr_comment": "pr_comments",
    "issue_open": "open_issues",
    "issue_close": "closed_issues",
    "issue_comment": "issue_comments",
    "star": "stars",
    "fork": "forks",
}


def parse_timestamp(text: str) -> dt.datetime:
    ts = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


@dataclass(frozen=True)
class Event:
    timestamp: dt.datetime
    kind: str
    actor: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        ts = self.timestamp
        if isinstance(ts, str):
            ts = parse_timestamp(ts)
        elif ts.tzinfo is None:
            raise ValueError("event timestamps must carry a timezone")
        object.__setattr__(self, "timestamp", ts.astimezone(dt.timezone.utc))

    def sort_key(self) -> tuple:
        # deleted accounts come back with no actor
        return self.timestamp, self.kind, self.actor or ""

    @property
    def month(self) -> str:
        return month_label(self.timestamp.year, self.timestamp.month)

    def to_json(self) -> dict:
        return {"kind": self.kind, "timestamp": self.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"), "actor": self.actor}


@dataclass
class EventStream:
    project_id: str
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        self.events = sorted(self.events, key=Event.sort_key)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def extend(self, events: Iterable[Event]) -> None:
        self.events = sorted([*self.events, *events], key=Event.sort_key)

    def to_json(self) -> dict:
        return {"project_id": self.project_id, "events": [e.to_json() for e in self.events]}

    @classmethod
    def from_json(cls, data: dict) -> "EventStream":
        return cls(data["project_id"], [Event(e["timestamp"], e["kind"], e.get("actor")) for e in data["events"]])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EventStream":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _next_month(label: str) -> str:
    y, m = parse_month(label)
    return month_label(y + m // 12, m % 12 + 1)


def aggregate_monthly(events: EventStream, project_id: str | None = None) -> ProjectSeries:
    """Bucket events by UTC calendar month, from the first commit's month to the last event's."""
    project_id = project_id or events.project_id
    if not events.events:
        raise NoDataError(f"{project_id}: empty event stream")
    commits = events.of_kind("commit")
    if not commits:
        raise NoDataError(f"{project_id}: no commits, cannot determine the start month")
    start = min(e.month for e in commits)
    end = max(e.month for e in events.events)

    counts: dict[str, dict[str, int]] = defaultdict(lambda: dict.fromkeys(FEATURES, 0))
    authors: dict[str, set] = defaultdict(set)
    mergers: dict[str, set] = defaultdict(set)
    for e in events.events:
        if e.month < start:
            continue
        counts[e.month][_COUNTED[e.kind]] += 1
        if e.kind == "commit" and e.actor:
            authors[e.month].add(e.actor)
        elif e.kind == "pr_merge" and e.actor:
            mergers[e.month].add(e.actor)

    records = []
    month, idx = start, 1
    while month <= end:
        row = counts[month]
        row["contributors"] = len(authors[month])
        row["pr_mergers"] = len(mergers[month])
        records.append(MonthlyRecord(idx, month, **row))
        month, idx = _next_month(month), idx + 1
    return ProjectSeries(project_id, tuple(records), start)
