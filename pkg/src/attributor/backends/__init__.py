"""External service contracts, offline mocks and the replay cache."""

from attributor.backends.base import (
    Backends,
    ChatBackend,
    ChatRequest,
    EmbeddingBackend,
    FetchedPage,
    Fetcher,
    NliBackend,
    NliLabel,
    NliVerdict,
    SearchBackend,
    SearchHit,
)
from attributor.backends.cache import (
    CacheMode,
    CachedChat,
    CachedEmbedder,
    CachedFetcher,
    CachedNli,
    CachedSearch,
    ResponseCache,
    cache_key,
)

__all__ = [
    "Backends", "ChatBackend", "ChatRequest", "EmbeddingBackend", "FetchedPage", "Fetcher",
    "NliBackend", "NliLabel", "NliVerdict", "SearchBackend", "SearchHit",
    "CacheMode", "CachedChat", "CachedEmbedder", "CachedFetcher", "CachedNli", "CachedSearch",
    "ResponseCache", "cache_key",
]
