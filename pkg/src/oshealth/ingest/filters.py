"""Repository selection: metadata thresholds and the irrelevant-keyword dictionary."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable

IRRELEVANT_WORDS = frozenset({
    "template", "web", "tutorial", "lecture", "sample", "note", "sheet",
    "book", "doc", "image", "video", "demo", "conf", "intro",
    "class", "exam", "study", "material", "test", "exercise", "resource",
    "article", "academic", "result", "output", "resume", "cv", "guide",
    "present", "slide", "101", "qa", "view", "form", "course",
    "org", "collect", "pdf", "learn", "blog", "lesson", "pic",
    "paper", "camp", "summit", "work", "wiki", "thesis", "lang",
})

CREATED_FROM = dt.date(2015, 1, 1)
CREATED_TO = dt.date(2016, 12, 31)


@dataclass(frozen=True)
class KeywordDictionary:
    words: frozenset[str] = IRRELEVANT_WORDS

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(w.lower() for w in self.words))

    def matches(self, url: str) -> list[str]:
        low = url.lower()
        return sorted(w for w in self.words if w in low)


DEFAULT_DICTIONARY = KeywordDictionary()


@dataclass(frozen=True)
class RepoMeta:
    url: str
    is_public: bool = True
    is_archived: bool = False
    is_mirror: bool = False
    stars: int = 0
    size_kb: int = 0
    forks: int = 0
    created_date: dt.date = CREATED_FROM
    contributor_count: int = 0
    total_commits: int = 0
    total_issues_closed: int = 0
    total_prs_closed: int = 0
    recent_prs_30d: int = 0
    recent_commits_30d: int = 0

    def __post_init__(self):
        if isinstance(self.created_date, str):
            object.__setattr__(self, "created_date", dt.date.fromisoformat(self.created_date[:10]))
        for name in ("stars", "size_kb", "forks", "contributor_count", "total_commits", "total_issues_closed",
                     "total_prs_closed", "recent_prs_30d", "recent_commits_30d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


# name -> predicate; the two creation-date bounds report under one name
FILTERS = (
    ("public", lambda m: m.is_public),
    ("archived", lambda m: not m.is_archived),
    ("mirror", lambda m: not m.is_mirror),
    ("stars", lambda m: 1000 <= m.stars <= 20000),
    ("size", lambda m: m.size_kb >= 10000),
    ("forks", lambda m: m.forks >= 10),
    ("created", lambda m: CREATED_FROM <= m.created_date <= CREATED_TO),
    ("contributors", lambda m: m.contributor_count >= 3),
    ("total_commits", lambda m: m.total_commits >= 1000),
    ("total_issues_closed", lambda m: m.total_issues_closed >= 50),
    ("total_prs_closed", lambda m: m.total_prs_closed >= 50),
    ("recent_prs", lambda m: m.recent_prs_30d >= 1),
    ("recent_commits", lambda m: m.recent_commits_30d >= 1),
)


def passes_filters(meta: RepoMeta, reference_date: dt.date | None = None) -> tuple[bool, list[str]]:
    """Return (accepted, names of failed filters).

    The ``recent_*`` counts are taken as already measured over the 30 days before
    ``reference_date``; the date only matters for rejecting repositories created after it.
    """
    failed = [name for name, pred in FILTERS if not pred(meta)]
    if reference_date is not None and meta.created_date > reference_date and "created" not in failed:
        failed.append("created")
    return not failed, failed


def is_relevant_url(url: str, dictionary: KeywordDictionary = DEFAULT_DICTIONARY) -> bool:
    if not url:
        raise ValueError("empty URL")
    return not dictionary.matches(url)


def select_repositories(metas: Iterable[RepoMeta], reference_date: dt.date | None = None,
                        dictionary: KeywordDictionary = DEFAULT_DICTIONARY) -> list[RepoMeta]:
    return [m for m in metas if passes_filters(m, reference_date)[0] and is_relevant_url(m.url, dictionary)]
