from .events import Event, EventStream, NoDataError, aggregate_monthly
from .filters import (
    DEFAULT_DICTIONARY,
    IRRELEVANT_WORDS,
    KeywordDictionary,
    RepoMeta,
    is_relevant_url,
    passes_filters,
    select_repositories,
)
from .mining import (
    CacheMiss,
    CredentialError,
    FetchError,
    GitHubClient,
    MiningError,
    RateLimitError,
    fetch_repo_meta,
    mine,
)

__all__ = [
    "Event", "EventStream", "NoDataError", "aggregate_monthly",
    "DEFAULT_DICTIONARY", "IRRELEVANT_WORDS", "KeywordDictionary", "RepoMeta",
    "is_relevant_url", "passes_filters", "select_repositories",
    "CacheMiss", "CredentialError", "FetchError", "GitHubClient", "MiningError", "RateLimitError",
    "fetch_repo_meta", "mine",
]
