"""HTTP clients for the chat, embedding, NLI, search and page-fetch services.

Transport errors are retried up to three times with exponential backoff;
any HTTP-level or payload problem is reported immediately.
"""

from __future__ import annotations

import logging
import time
from typing import Any, Callable, TypeVar

import httpx

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
    is_valid_url,
)
from attributor.errors import BackendError, BackendUnreachable, QuotaExceeded

logger = logging.getLogger(__name__)

T = TypeVar("T")

USER_AGENT = "attributor/0.1 (+post-hoc answer attribution)"
MAX_RETRIES = 3


def with_retries(fn: Callable[[], T], what: str, retries: int = MAX_RETRIES, base_delay: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep) -> T:
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            return fn()
        except httpx.TransportError as exc:
            last = exc
            if attempt == retries:
                break
            delay = base_delay * 2**attempt
            logger.warning("%s: transport error (%s), retry %d/%d in %.1fs", what, exc, attempt + 1, retries, delay)
            sleep(delay)
    raise BackendUnreachable(f"{what}: unreachable after {retries} retries: {last}") from last


def _check(resp: httpx.Response, what: str) -> Any:
    if resp.status_code >= 400:
        raise BackendError(f"{what}: HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise BackendError(f"{what}: response is not JSON") from exc


class _HttpMixin:
    def _init_http(self, base_url: str, api_key: str | None, timeout: float,
                   client: httpx.Client | None, sleep: Callable[[float], None]):
        self.base_url = base_url.rstrip("/")
        headers = {"User-Agent": USER_AGENT}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self.client = client or httpx.Client(timeout=timeout)
        self.headers = headers
        self.sleep = sleep


class OpenAIChat(_HttpMixin, ChatBackend):
    """``/v1/chat/completions``-compatible endpoint."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 60.0,
                 client: httpx.Client | None = None, budget: int | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        ChatBackend.__init__(self, budget)
        self._init_http(base_url, api_key, timeout, client, sleep)
        self.model = model
        self.backend_id = f"openai:{model}"

    def chat_raw(self, req: ChatRequest) -> str:
        messages = []
        if req.system_prompt:
            messages.append({"role": "system", "content": req.system_prompt})
        messages.append({"role": "user", "content": req.user_prompt})
        body = {"model": self.model, "messages": messages, "temperature": req.temperature,
                "max_tokens": req.max_output}
        resp = with_retries(
            lambda: self.client.post(f"{self.base_url}/chat/completions", json=body, headers=self.headers),
            self.backend_id, sleep=self.sleep,
        )
        doc = _check(resp, self.backend_id)
        try:
            return doc["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.backend_id}: unexpected response shape") from exc


class HttpEmbedder(_HttpMixin, EmbeddingBackend):
    """POST a text array; accepts OpenAI-style ``data[].embedding`` or a bare ``embeddings`` list."""

    def __init__(self, url: str, model: str = "", api_key: str | None = None, timeout: float = 60.0,
                 client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep):
        self._init_http(url, api_key, timeout, client, sleep)
        self.model = model
        self.backend_id = f"embed:{model or url}"

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        body: dict[str, Any] = {"input": texts}
        if self.model:
            body["model"] = self.model
        resp = with_retries(lambda: self.client.post(self.base_url, json=body, headers=self.headers),
                            self.backend_id, sleep=self.sleep)
        doc = _check(resp, self.backend_id)
        if isinstance(doc, dict) and "data" in doc:
            rows = sorted(doc["data"], key=lambda r: r.get("index", 0))
            return [list(map(float, r["embedding"])) for r in rows]
        if isinstance(doc, dict) and "embeddings" in doc:
            return [list(map(float, v)) for v in doc["embeddings"]]
        if isinstance(doc, list):
            return [list(map(float, v)) for v in doc]
        raise BackendError(f"{self.backend_id}: unexpected response shape")


class HttpNli(_HttpMixin, NliBackend):
    """POST ``{premise, hypothesis}`` -> ``{label, confidence}``."""

    def __init__(self, url: str, api_key: str | None = None, timeout: float = 60.0,
                 client: httpx.Client | None = None, backend_id: str | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self._init_http(url, api_key, timeout, client, sleep)
        self.backend_id = backend_id or f"nli:{url}"

    def nli_raw(self, premise: str, hypothesis: str) -> NliVerdict:
        body = {"premise": premise, "hypothesis": hypothesis}
        resp = with_retries(lambda: self.client.post(self.base_url, json=body, headers=self.headers),
                            self.backend_id, sleep=self.sleep)
        doc = _check(resp, self.backend_id)
        try:
            return NliVerdict(str(doc["label"]).lower(), doc.get("confidence"))
        except (KeyError, ValueError, TypeError) as exc:
            raise BackendError(f"{self.backend_id}: bad NLI payload {doc!r}") from exc


class GoogleSearch(_HttpMixin, SearchBackend):
    """Google Custom Search compatible: GET ``q``/``num``, read ``items[].link/title/snippet``."""

    def __init__(self, url: str = "https://www.googleapis.com/customsearch/v1", api_key: str | None = None,
                 engine_id: str | None = None, timeout: float = 30.0, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self._init_http(url, None, timeout, client, sleep)
        self.key = api_key
        self.engine_id = engine_id
        self.backend_id = f"search:{url}"

    def search_raw(self, query: str, k: int) -> list[SearchHit]:
        params: dict[str, Any] = {"q": query, "num": min(k, 10)}
        if self.key:
            params["key"] = self.key
        if self.engine_id:
            params["cx"] = self.engine_id
        resp = with_retries(lambda: self.client.get(self.base_url, params=params, headers=self.headers),
                            self.backend_id, sleep=self.sleep)
        if resp.status_code == 429:
            raise QuotaExceeded(f"{self.backend_id}: quota exceeded")
        doc = _check(resp, self.backend_id)
        items = doc.get("items") or []
        hits = []
        for item in items:
            link = item.get("link", "")
            if not is_valid_url(link):
                continue
            hits.append(SearchHit(url=link, title=item.get("title", ""), snippet=item.get("snippet", ""),
                                  rank=len(hits) + 1))
        return hits


class HttpFetcher(Fetcher):
    """Polite page fetcher: static user agent, bounded redirects, byte cap, timeout."""

    backend_id = "http-fetch"

    def __init__(self, timeout: float = 15.0, max_bytes: int = 2_000_000, max_redirects: int = 5,
                 client: httpx.Client | None = None):
        self.max_bytes = max_bytes
        self.client = client or httpx.Client(
            timeout=timeout, follow_redirects=True, max_redirects=max_redirects,
            headers={"User-Agent": USER_AGENT},
        )

    def fetch_raw(self, url: str) -> FetchedPage:
        try:
            with self.client.stream("GET", url) as resp:
                ctype = resp.headers.get("content-type", "")
                if resp.status_code >= 400 or not ctype.lower().startswith(("text/html", "application/xhtml")):
                    return FetchedPage(url, status=resp.status_code, content_type=ctype)
                buf = bytearray()
                for chunk in resp.iter_bytes():
                    buf.extend(chunk)
                    if len(buf) >= self.max_bytes:
                        del buf[self.max_bytes:]
                        break
                encoding = resp.encoding or "utf-8"
                body = bytes(buf).decode(encoding, errors="replace")
                return FetchedPage(url, status=resp.status_code, content_type=ctype, body=body)
        except httpx.TimeoutException:
            return FetchedPage(url, timed_out=True)
        except httpx.TooManyRedirects:
            return FetchedPage(url, error="too many redirects")
        except httpx.HTTPError as exc:
            return FetchedPage(url, error=f"{type(exc).__name__}: {exc}")
