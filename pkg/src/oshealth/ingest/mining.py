"""Fetch activity events for one repository: commits from a local clone, the rest from the REST API.

Every API response body is cached on disk under ``cache_dir/http`` keyed by a hash
of the request, so a second run with the same cache needs neither network nor token.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import re
import subprocess
from pathlib import Path
from typing import Any, Iterator
from urllib.parse import urlencode

from .events import Event, EventStream
from .filters import RepoMeta

log = logging.getLogger(__name__)

API_URL = "https://api.github.com"
TOKEN_ENV = "HEALTH_TOKEN"
PER_PAGE = 100

_LINK_NEXT = re.compile(r'<([^>]+)>;\s*rel="next"')
_LINK_LAST_PAGE = re.compile(r'[?&]page=(\d+)[^>]*>;\s*rel="last"')


class MiningError(RuntimeError):
    pass


class CredentialError(MiningError):
    pass


class RateLimitError(MiningError):
    def __init__(self, reset_at: dt.datetime | None, message: str = ""):
        self.reset_at = reset_at
        super().__init__(message or f"API rate limit exceeded; resets at {reset_at}")


class FetchError(MiningError):
    pass


class CacheMiss(MiningError):
    pass


def token_from_env(var: str = TOKEN_ENV) -> str | None:
    return os.environ.get(var) or None


def parse_repo(repo_url: str) -> tuple[str, str]:
    """'https://github.com/owner/name(.git)', 'github.com/owner/name' or 'owner/name' -> (owner, name)."""
    text = repo_url.strip().rstrip("/")
    if text.endswith(".git"):
        text = text[:-4]
    parts = [p for p in re.split(r"[/:]", text) if p]
    if len(parts) < 2:
        raise ValueError(f"cannot parse repository from {repo_url!r}")
    return parts[-2], parts[-1]


def _request_key(url: str, params: dict | None, accept: str | None) -> str:
    blob = json.dumps([url, sorted((params or {}).items()), accept or ""], separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class GitHubClient:
    """Minimal paginating REST client with an on-disk response cache.

    ``session`` needs only a ``get(url, params=..., headers=..., timeout=...)``
    method returning an object with ``status_code``, ``headers`` and ``text``.
    """

    def __init__(self, token: str | None, cache_dir, session=None, api_url: str = API_URL,
                 offline: bool = False):
        self.token = token
        self.cache_dir = Path(cache_dir) / "http"
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.api_url = api_url.rstrip("/")
        self.offline = offline
        self._session = session
        self.requests_made = 0

    @property
    def session(self):
        if self._session is None:
            import requests
            self._session = requests.Session()
        return self._session

    def _cached(self, key: str) -> tuple[str, dict] | None:
        body = self.cache_dir / f"{key}.body"
        meta = self.cache_dir / f"{key}.meta.json"
        if body.exists() and meta.exists():
            return body.read_text(encoding="utf-8"), json.loads(meta.read_text(encoding="utf-8"))
        return None

    def get(self, path_or_url: str, params: dict | None = None, accept: str | None = None) -> tuple[Any, dict]:
        """One request. Returns (decoded JSON body, {"link": ...})."""
        url = path_or_url if path_or_url.startswith("http") else f"{self.api_url}{path_or_url}"
        key = _request_key(url, params, accept)
        hit = self._cached(key)
        if hit is not None:
            return json.loads(hit[0]), hit[1]
        if self.offline:
            raise CacheMiss(f"no cached response for {url}?{urlencode(params or {})}")
        if not self.token:
            raise CredentialError(f"no API token; set {TOKEN_ENV}")
        headers = {"Authorization": f"Bearer {self.token}", "Accept": accept or "application/vnd.github+json"}
        try:
            resp = self.session.get(url, params=params, headers=headers, timeout=60)
        except Exception as exc:  # network layer failures
            raise FetchError(f"GET {url} failed: {exc}") from exc
        self.requests_made += 1
        status = resp.status_code
        if status in (403, 429) and (resp.headers.get("X-RateLimit-Remaining") == "0" or status == 429):
            reset = resp.headers.get("X-RateLimit-Reset")
            reset_at = dt.datetime.fromtimestamp(int(reset), dt.timezone.utc) if reset else None
            raise RateLimitError(reset_at)
        if status == 401:
            raise CredentialError(f"API rejected the token ({status})")
        if status >= 400:
            raise FetchError(f"GET {url} returned HTTP {status}")
        meta = {"link": resp.headers.get("Link", "")}
        (self.cache_dir / f"{key}.body").write_text(resp.text, encoding="utf-8")
        (self.cache_dir / f"{key}.meta.json").write_text(json.dumps(meta), encoding="utf-8")
        return json.loads(resp.text), meta

    def paginate(self, path: str, params: dict | None = None, accept: str | None = None) -> Iterator[dict]:
        params = {**(params or {}), "per_page": PER_PAGE}
        url: str | None = path
        while url:
            body, meta = self.get(url, params, accept)
            items = body["items"] if isinstance(body, dict) and "items" in body else body
            yield from items
            m = _LINK_NEXT.search(meta.get("link", ""))
            # the next-link carries its own query string
            url, params = (m.group(1), None) if m else (None, None)

    def count(self, path: str, params: dict | None = None) -> int:
        """Item count of a paginated listing, read from the last-page link with per_page=1."""
        body, meta = self.get(path, {**(params or {}), "per_page": 1})
        m = _LINK_LAST_PAGE.search(meta.get("link", ""))
        if m:
            return int(m.group(1))
        return len(body)


# --- local clone --------------------------------------------------------

def _git(*args: str, cwd: Path | None = None) -> str:
    proc = subprocess.run(["git", *args], cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise FetchError(f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc.stdout


def clone_source(repo_url: str) -> str:
    if os.path.exists(repo_url) or repo_url.startswith(("file://", "https://", "http://", "git@")):
        return repo_url
    owner, name = parse_repo(repo_url)
    return f"https://github.com/{owner}/{name}.git"


def ensure_clone(repo_url: str, cache_dir) -> Path:
    owner, name = parse_repo(repo_url)
    target = Path(cache_dir) / "clones" / f"{owner}__{name}.git"
    if not target.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
        _git("clone", "--bare", "--quiet", clone_source(repo_url), str(target))
    return target


def commit_events(clone: Path) -> list[Event]:
    out = _git("log", "--format=%aI%x09%ae", "HEAD", cwd=clone)
    events = []
    for line in out.splitlines():
        if not line.strip():
            continue
        stamp, author = line.split("\t", 1)
        events.append(Event(stamp, "commit", author.strip().lower() or None))
    return events


# --- API events ---------------------------------------------------------

def _issue_number(url: str | None) -> int | None:
    if not url:
        return None
    tail = url.rstrip("/").rsplit("/", 1)[-1]
    return int(tail) if tail.isdigit() else None


def api_events(client: GitHubClient, owner: str, name: str) -> list[Event]:
    base = f"/repos/{owner}/{name}"
    events: list[Event] = []

    pr_numbers = set()
    merged_prs = {}
    for pr in client.paginate(f"{base}/pulls", {"state": "all"}):
        pr_numbers.add(pr["number"])
        events.append(Event(pr["created_at"], "pr_open", (pr.get("user") or {}).get("login")))
        if pr.get("closed_at"):
            events.append(Event(pr["closed_at"], "pr_close"))
        if pr.get("merged_at"):
            merged_prs[pr["number"]] = pr["merged_at"]

    # merger identity comes from the "merged" issue events
    mergers = {}
    for ev in client.paginate(f"{base}/issues/events"):
        if ev.get("event") == "merged" and ev.get("issue"):
            mergers[ev["issue"]["number"]] = (ev.get("actor") or {}).get("login")
    for number, merged_at in sorted(merged_prs.items()):
        events.append(Event(merged_at, "pr_merge", mergers.get(number)))

    for issue in client.paginate(f"{base}/issues", {"state": "all"}):
        if "pull_request" in issue:
            continue
        events.append(Event(issue["created_at"], "issue_open", (issue.get("user") or {}).get("login")))
        if issue.get("closed_at"):
            events.append(Event(issue["closed_at"], "issue_close"))

    for c in client.paginate(f"{base}/issues/comments"):
        kind = "pr_comment" if _issue_number(c.get("issue_url")) in pr_numbers else "issue_comment"
        events.append(Event(c["created_at"], kind, (c.get("user") or {}).get("login")))
    for c in client.paginate(f"{base}/pulls/comments"):
        events.append(Event(c["created_at"], "pr_comment", (c.get("user") or {}).get("login")))

    for s in client.paginate(f"{base}/stargazers", accept="application/vnd.github.star+json"):
        events.append(Event(s["starred_at"], "star", (s.get("user") or {}).get("login")))
    for f in client.paginate(f"{base}/forks"):
        events.append(Event(f["created_at"], "fork", (f.get("owner") or {}).get("login")))
    return events


def mine(repo_url: str, credentials: str | None, cache_dir, session=None, api_url: str = API_URL,
         offline: bool = False) -> EventStream:
    """Complete event stream for one repository; nothing is returned on any failure."""
    owner, name = parse_repo(repo_url)
    client = GitHubClient(credentials, cache_dir, session=session, api_url=api_url, offline=offline)
    events = api_events(client, owner, name)
    events.extend(commit_events(ensure_clone(repo_url, cache_dir)))
    log.info("%s/%s: %d events (%d API requests)", owner, name, len(events), client.requests_made)
    return EventStream(f"{owner}/{name}", events)


def fetch_repo_meta(client: GitHubClient, repo_url: str, reference_date: dt.date) -> RepoMeta:
    """Selection metadata for one repository, as of ``reference_date``."""
    owner, name = parse_repo(repo_url)
    base = f"/repos/{owner}/{name}"
    repo, _ = client.get(base)
    since = (reference_date - dt.timedelta(days=30)).isoformat()

    def search_total(q: str) -> int:
        body, _ = client.get("/search/issues", {"q": f"repo:{owner}/{name} {q}", "per_page": 1})
        return int(body["total_count"])

    return RepoMeta(
        url=repo.get("html_url") or f"https://github.com/{owner}/{name}",
        is_public=not repo.get("private", False),
        is_archived=bool(repo.get("archived", False)),
        is_mirror=bool(repo.get("mirror_url")),
        stars=int(repo.get("stargazers_count", 0)),
        size_kb=int(repo.get("size", 0)),
        forks=int(repo.get("forks_count", 0)),
        created_date=dt.date.fromisoformat(repo["created_at"][:10]),
        contributor_count=client.count(f"{base}/contributors", {"anon": "1"}),
        total_commits=client.count(f"{base}/commits"),
        total_issues_closed=search_total("type:issue state:closed"),
        total_prs_closed=search_total("type:pr state:closed"),
        recent_prs_30d=search_total(f"type:pr created:>={since}"),
        recent_commits_30d=client.count(f"{base}/commits", {"since": f"{since}T00:00:00Z"}),
    )
