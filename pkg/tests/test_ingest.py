import dataclasses
import datetime as dt
import json
import os
import subprocess
from urllib.parse import urlparse

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from oshealth.data import validate_series, write_series_csv
from oshealth.ingest import (
    IRRELEVANT_WORDS,
    CacheMiss,
    CredentialError,
    Event,
    EventStream,
    NoDataError,
    RateLimitError,
    RepoMeta,
    aggregate_monthly,
    is_relevant_url,
    mine,
    passes_filters,
)
from oshealth.ingest.mining import commit_events

CASES = json.loads((FIXTURES / "selection_cases.json").read_text())
BASE = RepoMeta(**CASES["base_meta"])


def test_dictionary_has_the_49_words():
    assert len(IRRELEVANT_WORDS) == 49
    assert {"tutorial", "101", "qa", "lang", "cv", "thesis"} <= IRRELEVANT_WORDS
    assert all(w == w.lower() for w in IRRELEVANT_WORDS)


@pytest.mark.parametrize("case", CASES["filter_cases"], ids=lambda c: c["name"])
def test_filter_table(case):
    meta = dataclasses.replace(BASE, **case["change"])
    accepted, failed = passes_filters(meta, dt.date(2020, 4, 1))
    assert accepted is case["accepted"]
    assert failed == case["failed"]


@pytest.mark.parametrize("case", CASES["url_cases"], ids=lambda c: c["url"])
def test_url_table(case):
    assert is_relevant_url(case["url"]) is case["relevant"]
    # brute-force substring oracle
    assert case["relevant"] == (not any(w in case["url"].lower() for w in sorted(IRRELEVANT_WORDS)))


def test_empty_url_rejected():
    with pytest.raises(ValueError):
        is_relevant_url("")


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        dataclasses.replace(BASE, forks=-1)


GE_FIELDS = {"size_kb": "size", "forks": "forks", "contributor_count": "contributors",
             "total_commits": "total_commits", "total_issues_closed": "total_issues_closed",
             "total_prs_closed": "total_prs_closed", "recent_prs_30d": "recent_prs",
             "recent_commits_30d": "recent_commits"}


@settings(max_examples=60)
@given(st.sampled_from(sorted(GE_FIELDS)), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 30000))
def test_filters_monotone_in_lower_bounds(field, value, bump, stars):
    meta = dataclasses.replace(BASE, **{field: value, "stars": stars})
    ok, failed = passes_filters(meta)
    ok2, failed2 = passes_filters(dataclasses.replace(meta, **{field: value + bump}))
    assert set(failed2) <= set(failed)
    if ok:
        assert ok2


def test_golden_monthly_csv():
    stream = EventStream.load(FIXTURES / "events_acme_gizmo.json")
    series = aggregate_monthly(stream)
    golden = (FIXTURES / "monthly_acme_gizmo.csv").read_bytes()
    assert write_series_csv(series).encode("utf-8") == golden
    assert validate_series(series).ok


def test_pr_open_then_merge_next_month():
    stream = EventStream.load(FIXTURES / "events_acme_gizmo.json")
    series = aggregate_monthly(stream)
    may, june = series.record(1), series.record(2)
    assert (may.calendar_month, may.open_prs, may.merged_prs) == ("2016-05", 1, 0)
    assert (june.calendar_month, june.merged_prs, june.closed_prs, june.pr_mergers) == ("2016-06", 1, 1, 1)


def test_counting_and_zero_fill():
    ev = [Event("2016-05-01T00:00:00Z", "commit", "a"), Event("2016-05-02T00:00:00Z", "commit", "b"),
          Event("2016-05-03T00:00:00Z", "commit", "a"), Event("2016-05-04T00:00:00Z", "star"),
          Event("2016-07-04T00:00:00Z", "star"), Event("2016-07-09T00:00:00Z", "star")]
    series = aggregate_monthly(EventStream("x/y", ev))
    assert (series.record(1).commits, series.record(1).contributors) == (3, 2)
    assert [r.stars for r in series.records] == [1, 0, 2]


def test_empty_stream():
    with pytest.raises(NoDataError):
        aggregate_monthly(EventStream("x/y", []))
    with pytest.raises(NoDataError):
        aggregate_monthly(EventStream("x/y", [Event("2016-01-01T00:00:00Z", "star")]))


def test_naive_timestamps_refused():
    with pytest.raises(ValueError):
        Event(dt.datetime(2016, 1, 1), "commit")


KINDS = ["pr_open", "pr_close", "pr_merge", "pr_comment", "issue_open", "issue_close", "issue_comment", "star", "fork",
         "commit"]
stamp = st.datetimes(min_value=dt.datetime(2015, 1, 1), max_value=dt.datetime(2019, 12, 31),
                     timezones=st.just(dt.timezone.utc))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(stamp, st.sampled_from(KINDS), st.sampled_from(["a", "b", "c", None])), max_size=60))
def test_sum_invariant_and_validity(raw):
    # bracketing commits: the stream starts with a commit and spans at least two months
    first = Event(dt.datetime(2015, 1, 1, tzinfo=dt.timezone.utc), "commit", "root")
    last = Event(dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc), "commit", "root")
    events = [first, last] + [Event(t, k, a) for t, k, a in raw]
    series = aggregate_monthly(EventStream("p/q", events))
    assert validate_series(series).ok
    feature_of = {"commit": "commits", "pr_open": "open_prs", "pr_close": "closed_prs", "pr_merge": "merged_prs",
                  "pr_comment": "pr_comments", "issue_open": "open_issues", "issue_close": "closed_issues",
                  "issue_comment": "issue_comments", "star": "stars", "fork": "forks"}
    for kind, feature in feature_of.items():
        assert sum(getattr(r, feature) for r in series.records) == sum(e.kind == kind for e in events)


# --- mining against a fake API -----------------------------------------

class FakeResponse:
    def __init__(self, status_code=200, body=None, headers=None):
        self.status_code = status_code
        self.headers = headers or {}
        self.text = json.dumps(body if body is not None else [])


PAGES = {
    "/repos/acme/gizmo/pulls": [
        [{"number": 1, "created_at": "2016-05-10T08:00:00Z", "closed_at": "2016-06-02T12:00:00Z",
          "merged_at": "2016-06-02T12:00:00Z", "user": {"login": "carol"}}],
        [{"number": 2, "created_at": "2016-06-11T08:00:00Z", "closed_at": None, "merged_at": None,
          "user": {"login": "bob"}}],
    ],
    "/repos/acme/gizmo/issues/events": [[{"event": "merged", "issue": {"number": 1}, "actor": {"login": "alice"}}]],
    "/repos/acme/gizmo/issues": [[
        {"number": 1, "pull_request": {}, "created_at": "2016-05-10T08:00:00Z"},
        {"number": 3, "created_at": "2016-05-12T08:00:00Z", "closed_at": "2016-07-05T00:00:00Z",
         "user": {"login": "erin"}},
    ]],
    "/repos/acme/gizmo/issues/comments": [[
        {"created_at": "2016-05-13T08:00:00Z", "issue_url": "https://x/repos/acme/gizmo/issues/3",
         "user": {"login": "frank"}},
        {"created_at": "2016-06-03T09:00:00Z", "issue_url": "https://x/repos/acme/gizmo/issues/1",
         "user": {"login": "bob"}},
    ]],
    "/repos/acme/gizmo/pulls/comments": [[]],
    "/repos/acme/gizmo/stargazers": [[{"starred_at": "2016-05-11T08:00:00Z", "user": {"login": "dave"}}]],
    "/repos/acme/gizmo/forks": [[{"created_at": "2016-06-20T09:00:00Z", "owner": {"login": "gus"}}]],
}


class FakeSession:
    def __init__(self, status=200, headers=None):
        self.calls = []
        self.status = status
        self.headers = headers or {}

    def get(self, url, params=None, headers=None, timeout=None):
        self.calls.append((url, params, headers))
        if self.status != 200:
            return FakeResponse(self.status, {"message": "nope"}, self.headers)
        path = urlparse(url).path
        page = int(dict(p.split("=") for p in urlparse(url).query.split("&") if p).get("page", 1))
        pages = PAGES[path]
        link = {}
        if page < len(pages):
            link = {"Link": f'<https://api.test{path}?page={page + 1}&per_page=100>; rel="next"'}
        return FakeResponse(200, pages[page - 1], link)


def git(*args, cwd, env=None):
    subprocess.run(["git", *args], cwd=cwd, check=True, capture_output=True, env=env)


@pytest.fixture
def small_repo(tmp_path):
    repo = tmp_path / "src" / "acme" / "gizmo"
    repo.mkdir(parents=True)
    git("init", "-q", cwd=repo)
    for i, (when, who) in enumerate([("2016-05-03T10:00:00Z", "alice"), ("2016-07-31T23:59:59Z", "bob")]):
        (repo / "f.txt").write_text(str(i))
        env = {**os.environ, "GIT_AUTHOR_DATE": when, "GIT_COMMITTER_DATE": when,
               "GIT_AUTHOR_NAME": who, "GIT_AUTHOR_EMAIL": f"{who}@example.org",
               "GIT_COMMITTER_NAME": who, "GIT_COMMITTER_EMAIL": f"{who}@example.org"}
        git("add", ".", cwd=repo, env=env)
        git("commit", "-q", "-m", f"c{i}", cwd=repo, env=env)
    return repo


def test_mine_then_replay_offline(small_repo, tmp_path):
    cache = tmp_path / "cache"
    session = FakeSession()
    online = mine(str(small_repo), "tok", cache, session=session, api_url="https://api.test")
    assert session.calls and all(h["Authorization"] == "Bearer tok" for _, _, h in session.calls)
    assert len(online.of_kind("commit")) == 2
    assert len(online.of_kind("pr_open")) == 2
    assert [e.actor for e in online.of_kind("pr_merge")] == ["alice"]
    assert len(online.of_kind("pr_comment")) == 1 and len(online.of_kind("issue_comment")) == 1
    offline = mine(str(small_repo), None, cache, session=None, api_url="https://api.test", offline=True)
    assert offline.to_json() == online.to_json()


def test_offline_without_cache(small_repo, tmp_path):
    with pytest.raises(CacheMiss):
        mine(str(small_repo), None, tmp_path / "empty", api_url="https://api.test", offline=True)


def test_missing_token_is_a_credential_error(small_repo, tmp_path):
    with pytest.raises(CredentialError):
        mine(str(small_repo), None, tmp_path / "c", session=FakeSession(), api_url="https://api.test")


def test_invalid_token_leaves_no_output(small_repo, tmp_path):
    cache = tmp_path / "c"
    with pytest.raises(CredentialError):
        mine(str(small_repo), "bad", cache, session=FakeSession(401), api_url="https://api.test")
    assert not list((cache / "http").iterdir())


def test_rate_limit_carries_reset_time(small_repo, tmp_path):
    session = FakeSession(403, {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1600000000"})
    with pytest.raises(RateLimitError) as info:
        mine(str(small_repo), "tok", tmp_path / "c", session=session, api_url="https://api.test")
    assert info.value.reset_at == dt.datetime(2020, 9, 13, 12, 26, 40, tzinfo=dt.timezone.utc)


def test_thousand_commit_clone(tmp_path):
    repo = tmp_path / "big"
    git("init", "-q", "--bare", str(repo), cwd=tmp_path)
    lines = []
    base = 1_450_000_000
    for i in range(1000):
        msg = f"c{i}"
        lines.append("commit refs/heads/master")
        lines.append(f"committer dev{i % 7} <dev{i % 7}@example.org> {base + 3600 * i} +0000")
        lines.append(f"data {len(msg)}\n{msg}")
        lines.append("")
    subprocess.run(["git", "fast-import", "--quiet"], cwd=repo, input="\n".join(lines) + "\n",
                   text=True, check=True, capture_output=True)
    git("symbolic-ref", "HEAD", "refs/heads/master", cwd=repo)
    count = subprocess.run(["git", "rev-list", "--count", "HEAD"], cwd=repo, capture_output=True, text=True)
    events = commit_events(repo)
    assert len(events) == int(count.stdout) == 1000
    assert len({e.actor for e in events}) == 7
