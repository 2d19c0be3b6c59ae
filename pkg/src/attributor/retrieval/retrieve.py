"""Claim -> web search -> page text -> chunks -> embeddings -> top-k evidence."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Sequence

from attributor.backends.base import Backends
from attributor.concurrency import ordered_map
from attributor.core import Claim, EvidenceChunk, RelevanceClass, StageError
from attributor.errors import BackendError, ConfigError, FetchError, InvalidInput
from attributor.retrieval.chunking import chunk_fixed, chunk_recursive
from attributor.retrieval.extract import fetch_and_extract
from attributor.retrieval.index import ScoredChunk, VectorIndex

logger = logging.getLogger(__name__)

EMBED_BATCH = 64


class Splitter(str, Enum):
    FIXED = "fixed"
    RECURSIVE = "recursive"


@dataclass(frozen=True)
class RetrievalConfig:
    hits_per_claim: int = 3
    window_chars: int = 512
    splitter: Splitter = Splitter.FIXED
    overlap_chars: int = 64
    top_k: int = 5
    max_page_bytes: int = 2_000_000
    fetch_timeout: float = 15.0
    fetch_workers: int = 3

    def __post_init__(self):
        try:
            object.__setattr__(self, "splitter", Splitter(self.splitter))
        except ValueError:
            raise ConfigError(f"unknown splitter {self.splitter!r}") from None
        if self.window_chars <= 0:
            raise ConfigError("window_chars must be positive")
        if not 0 <= self.overlap_chars < self.window_chars:
            raise ConfigError("overlap_chars must satisfy 0 <= overlap < window")
        if self.top_k < 1 or self.hits_per_claim < 1:
            raise ConfigError("top_k and hits_per_claim must be >= 1")
        if self.max_page_bytes <= 0 or self.fetch_timeout <= 0:
            raise ConfigError("max_page_bytes and fetch_timeout must be positive")

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["splitter"] = self.splitter.value
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RetrievalConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown retrieval settings: {sorted(unknown)}")
        return cls(**d)


def split_text(text: str, config: RetrievalConfig) -> list[str]:
    if config.splitter is Splitter.RECURSIVE:
        return chunk_recursive(text, config.window_chars, config.overlap_chars)
    return chunk_fixed(text, config.window_chars)


def chunk_id(url: str, window: int, index: int) -> str:
    return f"{hashlib.blake2b(url.encode('utf-8'), digest_size=5).hexdigest()}-w{window}-{index}"


@dataclass
class QuestionEvidence:
    """Evidence for all factual claims of one question, drawn from one shared chunk pool."""

    results: dict[str, list[ScoredChunk]] = field(default_factory=dict)
    errors: list[StageError] = field(default_factory=list)
    urls: list[str] = field(default_factory=list)
    n_chunks: int = 0
    searches: int = 0
    search_failures: int = 0


def _embed_chunks(pending: list[tuple[str, int, str]], config: RetrievalConfig, embedder) -> list[EvidenceChunk]:
    vectors: list[tuple[float, ...]] = []
    texts = [t for _, _, t in pending]
    for i in range(0, len(texts), EMBED_BATCH):
        vectors.extend(embedder.embed(texts[i:i + EMBED_BATCH]))
    return [
        EvidenceChunk(id=chunk_id(url, config.window_chars, idx), url=url, chunk_index=idx, text=text,
                      window_size=config.window_chars, embedding=vec)
        for (url, idx, text), vec in zip(pending, vectors)
    ]


def retrieve_for_question(claims: Sequence[Claim], config: RetrievalConfig, backends: Backends,
                          record_id: str = "", strict_search: bool = False) -> QuestionEvidence:
    """Search every claim, pool the pages of all hits into one index, then query each claim.

    Search failures are logged per claim unless ``strict_search``; fetch
    failures are always logged per URL and never abort.
    """
    out = QuestionEvidence()
    if not claims:
        return out
    for c in claims:
        if c.relevance is not None and c.relevance is not RelevanceClass.FACTUAL_CLAIM:
            raise InvalidInput(f"claim {c.id} is not a factual claim")

    seen: set[str] = set()
    for c in claims:
        out.searches += 1
        try:
            hits = backends.search.web_search(c.text, config.hits_per_claim)
        except BackendError as exc:
            if strict_search:
                raise
            out.search_failures += 1
            out.errors.append(StageError.from_exc("search", record_id or c.record_id, c.id, exc))
            continue
        for h in hits:
            if h.url not in seen:
                seen.add(h.url)
                out.urls.append(h.url)

    def fetch(url: str):
        try:
            return fetch_and_extract(url, backends.fetcher, config.max_page_bytes), None
        except (FetchError, BackendError) as exc:
            return None, exc

    pending: list[tuple[str, int, str]] = []
    for url, (text, exc) in zip(out.urls, ordered_map(fetch, out.urls, config.fetch_workers)):
        if exc is not None:
            logger.info("fetch failed: %s", exc)
            out.errors.append(StageError.from_exc("fetch", record_id or claims[0].record_id, url, exc))
            continue
        for idx, piece in enumerate(split_text(text, config)):
            if piece.strip():
                pending.append((url, idx, piece))

    chunks = _embed_chunks(pending, config, backends.embedder) if pending else []
    out.n_chunks = len(chunks)
    index = VectorIndex(chunks)
    if index.empty:
        out.results = {c.id: [] for c in claims}
        return out
    vectors = []
    texts = [c.text for c in claims]
    for i in range(0, len(texts), EMBED_BATCH):
        vectors.extend(backends.embedder.embed(texts[i:i + EMBED_BATCH]))
    out.results = {c.id: index.search(v, config.top_k) for c, v in zip(claims, vectors)}
    return out


def retrieve_evidence(claim: Claim, config: RetrievalConfig, backends: Backends,
                      errors: list[StageError] | None = None) -> list[ScoredChunk]:
    """Single-claim retrieval; search errors raise, fetch errors are appended to ``errors``."""
    if claim.relevance is not RelevanceClass.FACTUAL_CLAIM:
        raise InvalidInput(f"claim {claim.id} must be classified as a factual claim")
    ev = retrieve_for_question([claim], config, backends, strict_search=True)
    if errors is not None:
        errors.extend(ev.errors)
    return ev.results[claim.id]
