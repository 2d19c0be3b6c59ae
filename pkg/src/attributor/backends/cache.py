"""Persistent response cache that makes every backend call replayable offline.

One file per entry under the cache root; the filename is the hex key, the
key is a hash of (kind, backend id, canonicalized request). Entries are
write-once.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from attributor.backends.base import (
    ChatBackend,
    ChatRequest,
    EmbeddingBackend,
    FetchedPage,
    Fetcher,
    NliBackend,
    NliVerdict,
    SearchBackend,
    SearchHit,
    canonical_json,
)
from attributor.errors import OfflineCacheMiss

CACHE_ENV = "ATTRIBUTOR_CACHE_DIR"


class CacheMode(str, Enum):
    LIVE = "live"        # no cache at all
    RECORD = "record"    # read-through, misses go upstream and are written
    OFFLINE = "offline"  # read-only, misses are errors


def cache_key(kind: str, backend_id: str, request: Any) -> str:
    blob = canonical_json({"kind": kind, "backend_id": backend_id, "request": request})
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    payload: bytes
    created_at: float


class ResponseCache:
    def __init__(self, root: str | os.PathLike | None = None, clock: Callable[[], float] = time.time):
        root = root or os.environ.get(CACHE_ENV) or ".attributor-cache"
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._clock = clock
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key

    def lock_for(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[key]

    def get(self, key: str) -> CacheEntry | None:
        path = self._path(key)
        try:
            raw = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        doc = json.loads(raw)
        return CacheEntry(doc["key"], doc["payload"].encode("utf-8"), doc["created_at"])

    def put(self, key: str, payload: bytes) -> CacheEntry:
        """Write an entry unless one exists already; the stored entry is returned."""
        existing = self.get(key)
        if existing is not None:
            return existing
        entry = CacheEntry(key, payload, self._clock())
        doc = {"key": key, "created_at": entry.created_at, "payload": payload.decode("utf-8")}
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False)
        os.replace(tmp, self._path(key))
        return entry

    def __len__(self) -> int:
        return sum(1 for p in self.root.iterdir() if not p.name.startswith("."))

    def through(self, mode: CacheMode, key: str, compute: Callable[[], str]) -> str:
        if mode is CacheMode.LIVE:
            return compute()
        # held across the upstream call so concurrent identical requests go upstream once
        with self.lock_for(key):
            hit = self.get(key)
            if hit is not None:
                return hit.payload.decode("utf-8")
            if mode is CacheMode.OFFLINE:
                raise OfflineCacheMiss(f"offline mode: no cached response for key {key[:12]}")
            value = compute()
            self.put(key, value.encode("utf-8"))
            return value


class _Cached:
    def __init__(self, upstream, cache: ResponseCache | None, mode: CacheMode):
        mode = CacheMode(mode)
        if mode is not CacheMode.LIVE and cache is None:
            raise ValueError(f"cache mode {mode.value} needs a cache")
        if mode is not CacheMode.OFFLINE and upstream is None:
            raise ValueError(f"cache mode {mode.value} needs an upstream backend")
        self.upstream = upstream
        self.cache = cache
        self.mode = mode
        self.backend_id = getattr(upstream, "backend_id", None) or self.default_id

    default_id = "cached"

    def _through(self, kind: str, request: Any, compute: Callable[[], str]) -> str:
        if self.mode is CacheMode.LIVE:
            return compute()
        return self.cache.through(self.mode, cache_key(kind, self.backend_id, request), compute)


class CachedChat(_Cached, ChatBackend):
    default_id = "chat"

    def __init__(self, upstream: ChatBackend | None, cache: ResponseCache | None, mode: CacheMode,
                 backend_id: str | None = None):
        ChatBackend.__init__(self)
        _Cached.__init__(self, upstream, cache, mode)
        if backend_id:
            self.backend_id = backend_id

    def chat_raw(self, req: ChatRequest) -> str:
        req = replace(req, backend_id=self.backend_id)
        return self._through("chat", req.to_dict(), lambda: self.upstream.chat_complete(req))


class CachedEmbedder(_Cached, EmbeddingBackend):
    default_id = "embed"

    def __init__(self, upstream: EmbeddingBackend | None, cache: ResponseCache | None, mode: CacheMode,
                 backend_id: str | None = None):
        _Cached.__init__(self, upstream, cache, mode)
        if backend_id:
            self.backend_id = backend_id

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        if self.mode is CacheMode.LIVE:
            return [list(v) for v in self.upstream.embed(texts)]
        out: list[list[float] | None] = [None] * len(texts)
        missing: list[int] = []
        for i, text in enumerate(texts):
            hit = self.cache.get(cache_key("embed", self.backend_id, text))
            if hit is not None:
                out[i] = json.loads(hit.payload)
            else:
                missing.append(i)
        if missing:
            if self.mode is CacheMode.OFFLINE:
                raise OfflineCacheMiss(f"offline mode: {len(missing)} embeddings not cached")
            fresh = self.upstream.embed([texts[i] for i in missing])
            for i, vec in zip(missing, fresh):
                key = cache_key("embed", self.backend_id, texts[i])
                stored = self.cache.put(key, json.dumps(list(vec)).encode("utf-8"))
                out[i] = json.loads(stored.payload)
        return out  # type: ignore[return-value]


class CachedNli(_Cached, NliBackend):
    default_id = "nli"

    def __init__(self, upstream: NliBackend | None, cache: ResponseCache | None, mode: CacheMode,
                 backend_id: str | None = None):
        _Cached.__init__(self, upstream, cache, mode)
        if backend_id:
            self.backend_id = backend_id

    def nli_raw(self, premise: str, hypothesis: str) -> NliVerdict:
        def compute() -> str:
            v = self.upstream.nli_classify(premise, hypothesis)
            return canonical_json({"label": v.label.value, "confidence": v.confidence})

        doc = json.loads(self._through("nli", {"premise": premise, "hypothesis": hypothesis}, compute))
        return NliVerdict(doc["label"], doc["confidence"])


class CachedSearch(_Cached, SearchBackend):
    default_id = "search"

    def __init__(self, upstream: SearchBackend | None, cache: ResponseCache | None, mode: CacheMode,
                 backend_id: str | None = None):
        _Cached.__init__(self, upstream, cache, mode)
        if backend_id:
            self.backend_id = backend_id

    def search_raw(self, query: str, k: int) -> list[SearchHit]:
        def compute() -> str:
            hits = self.upstream.web_search(query, k)
            return canonical_json([h.__dict__ for h in hits])

        return [SearchHit(**h) for h in json.loads(self._through("search", {"q": query, "num": k}, compute))]


class CachedFetcher(_Cached, Fetcher):
    default_id = "fetch"

    def __init__(self, upstream: Fetcher | None, cache: ResponseCache | None, mode: CacheMode,
                 backend_id: str | None = None):
        _Cached.__init__(self, upstream, cache, mode)
        if backend_id:
            self.backend_id = backend_id

    def fetch_raw(self, url: str) -> FetchedPage:
        def compute() -> str:
            return canonical_json(self.upstream.fetch(url).to_dict())

        return FetchedPage.from_dict(json.loads(self._through("fetch", {"url": url}, compute)))
