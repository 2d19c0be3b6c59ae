"""Request/response types and the abstract backend surfaces.

Every external service (chat model, embedder, NLI encoder, web search, page
fetcher) is reached through one of the base classes here. Subclasses only
implement the ``*_raw`` hook; validation and output post-processing live in
the base class so mocks, HTTP clients and the replay cache behave alike.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Sequence
from urllib.parse import urlparse

from attributor.errors import BudgetExceeded, EmptyInput, InvalidInput


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ChatRequest:
    user_prompt: str
    system_prompt: str = ""
    temperature: float = 0.0
    max_output: int = 512
    backend_id: str = ""
    # Part of the cache key but never sent upstream; lets a retry after a
    # malformed reply bypass the cached first attempt.
    attempt: int = 0

    def __post_init__(self):
        if not self.user_prompt.strip():
            raise InvalidInput("user_prompt must be nonempty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidInput(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output < 1:
            raise InvalidInput("max_output must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class NliLabel(str, Enum):
    ENTAILMENT = "entailment"
    CONTRADICTION = "contradiction"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class NliVerdict:
    label: NliLabel
    confidence: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", NliLabel(self.label))
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise InvalidInput(f"confidence {self.confidence} outside [0, 1]")


def is_valid_url(url: str) -> bool:
    parts = urlparse(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


@dataclass(frozen=True)
class SearchHit:
    url: str
    title: str
    snippet: str
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidInput(f"rank must be >= 1, got {self.rank}")
        if not is_valid_url(self.url):
            raise InvalidInput(f"not a valid URL: {self.url!r}")


@dataclass(frozen=True)
class FetchedPage:
    """Raw outcome of one page fetch; failures are data so they can be replayed."""

    url: str
    status: int = 0
    content_type: str = ""
    body: str = ""
    timed_out: bool = False
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> FetchedPage:
        return cls(**d)


class _CallBudget:
    def __init__(self, budget: int | None):
        self.budget = budget
        self.calls = 0
        self._lock = threading.Lock()

    def charge(self, backend_id: str) -> None:
        with self._lock:
            if self.budget is not None and self.calls >= self.budget:
                raise BudgetExceeded(f"{backend_id}: call budget of {self.budget} exhausted")
            self.calls += 1


class ChatBackend:
    backend_id = "chat"

    def __init__(self, budget: int | None = None):
        self._budget = _CallBudget(budget)

    @property
    def calls(self) -> int:
        return self._budget.calls

    def chat_complete(self, req: ChatRequest) -> str:
        if not req.backend_id:
            req = replace(req, backend_id=self.backend_id)
        self._budget.charge(self.backend_id)
        return self.chat_raw(req)

    def chat_raw(self, req: ChatRequest) -> str:
        raise NotImplementedError


class EmbeddingBackend:
    backend_id = "embed"

    def embed(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        """One unit vector per input; normalization happens here whatever the backend returns."""
        texts = list(texts)
        if not texts:
            raise EmptyInput("embed() needs at least one text")
        if any(not t.strip() for t in texts):
            raise EmptyInput("embed() got an empty text")
        raw = self.embed_raw(texts)
        if len(raw) != len(texts):
            raise InvalidInput(f"backend returned {len(raw)} vectors for {len(texts)} texts")
        return [_unit(v) for v in raw]

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


def _unit(vec: Sequence[float]) -> tuple[float, ...]:
    norm = math.sqrt(math.fsum(x * x for x in vec))
    if norm == 0.0:
        raise InvalidInput("backend returned a zero vector")
    return tuple(x / norm for x in vec)


class NliBackend:
    backend_id = "nli"

    def nli_classify(self, premise: str, hypothesis: str) -> NliVerdict:
        if not premise.strip() or not hypothesis.strip():
            raise EmptyInput("premise and hypothesis must be nonempty")
        return self.nli_raw(premise, hypothesis)

    def nli_raw(self, premise: str, hypothesis: str) -> NliVerdict:
        raise NotImplementedError


class SearchBackend:
    backend_id = "search"

    def web_search(self, query: str, k: int = 3) -> list[SearchHit]:
        if not query.strip():
            raise InvalidInput("search query must be nonempty")
        if k < 1:
            raise InvalidInput("k must be >= 1")
        hits = sorted(self.search_raw(query, k), key=lambda h: h.rank)
        return hits[:k]

    def search_raw(self, query: str, k: int) -> list[SearchHit]:
        raise NotImplementedError


class Fetcher:
    backend_id = "fetch"

    def fetch(self, url: str) -> FetchedPage:
        return self.fetch_raw(url)

    def fetch_raw(self, url: str) -> FetchedPage:
        raise NotImplementedError


@dataclass
class Backends:
    """The bundle of services one pipeline run talks to."""

    chat: ChatBackend | None = None
    embedder: EmbeddingBackend | None = None
    nli: NliBackend | None = None
    search: SearchBackend | None = None
    fetcher: Fetcher | None = None
    extras: dict[str, Any] = field(default_factory=dict)
