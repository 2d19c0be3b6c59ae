"""Run configuration and backend construction.

A config file is one JSON or TOML document. Relative paths inside it are
resolved against the file's directory. Secrets never live in the file: HTTP
backends name the environment variables holding their URL and key.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from attributor.attribution import Method
from attributor.backends import mock
from attributor.backends.base import Backends, canonical_json
from attributor.backends.cache import (
    CACHE_ENV,
    CacheMode,
    CachedChat,
    CachedEmbedder,
    CachedFetcher,
    CachedNli,
    CachedSearch,
    ResponseCache,
)
from attributor.backends.http import GoogleSearch, HttpEmbedder, HttpFetcher, HttpNli, OpenAIChat
from attributor.core import ClaimOrigin
from attributor.errors import ConfigError
from attributor.retrieval.retrieve import RetrievalConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SERVICES = ("chat", "embed", "nli", "search", "fetch")
SETTINGS = ("phr", "rtr")

# default env var names for HTTP backends, per service
URL_ENV = {
    "chat": "ATTRIBUTOR_CHAT_URL",
    "embed": "ATTRIBUTOR_EMBED_URL",
    "nli": "ATTRIBUTOR_NLI_URL",
    "search": "ATTRIBUTOR_SEARCH_URL",
}
KEY_ENV = {
    "chat": "ATTRIBUTOR_CHAT_KEY",
    "embed": "ATTRIBUTOR_EMBED_KEY",
    "nli": "ATTRIBUTOR_NLI_KEY",
    "search": "ATTRIBUTOR_SEARCH_KEY",
}


@dataclass(frozen=True)
class RunConfig:
    corpus: str
    segmentation: ClaimOrigin = ClaimOrigin.PROMPT_FACTSCORE
    enrichment: bool = False
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    attribution_method: Method = Method.ENCODER_NLI
    backends: dict[str, dict[str, Any]] = field(default_factory=dict)
    cache_mode: CacheMode = CacheMode.RECORD
    cache_dir: str | None = None
    max_records: int | None = None
    max_claims: int | None = None
    seed: int = 0
    workers: int = 4
    setting: str = "phr"

    def __post_init__(self):
        try:
            object.__setattr__(self, "segmentation", ClaimOrigin(self.segmentation))
            object.__setattr__(self, "attribution_method", Method(self.attribution_method))
            object.__setattr__(self, "cache_mode", CacheMode(self.cache_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.segmentation is ClaimOrigin.ENRICHED:
            raise ConfigError("'enriched' is not a segmentation strategy")
        if isinstance(self.retrieval, dict):
            object.__setattr__(self, "retrieval", RetrievalConfig.from_dict(self.retrieval))
        for name, limit in (("max_records", self.max_records), ("max_claims", self.max_claims)):
            if limit is not None and limit < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}")
        unknown = set(self.backends) - set(SERVICES)
        if unknown:
            raise ConfigError(f"unknown backend services: {sorted(unknown)}")

    def snapshot(self) -> dict[str, Any]:
        """Everything that determines the run's results; excludes how the cache is used."""
        return {
            "corpus": self.corpus,
            "segmentation": self.segmentation.value,
            "enrichment": self.enrichment,
            "retrieval": self.retrieval.to_dict(),
            "attribution_method": self.attribution_method.value,
            "backends": {k: public_spec(self.backends[k]) for k in sorted(self.backends)},
            "max_records": self.max_records,
            "max_claims": self.max_claims,
            "seed": self.seed,
            "setting": self.setting,
        }

    def with_overrides(self, **changes: Any) -> RunConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def public_spec(spec: dict[str, Any]) -> dict[str, Any]:
    """Backend spec without inline secrets."""
    return {k: v for k, v in spec.items() if k != "api_key"}


def _resolve_paths(spec: dict[str, Any], base: Path) -> dict[str, Any]:
    out = dict(spec)
    for key in ("sites", "mapping", "hits"):
        if isinstance(out.get(key), str):
            out[key] = str((base / out[key]).resolve()) if not os.path.isabs(out[key]) else out[key]
    return out


def config_from_dict(doc: dict[str, Any], base_dir: str | os.PathLike = ".") -> RunConfig:
    base = Path(base_dir)
    doc = dict(doc)
    if "corpus" not in doc:
        raise ConfigError("config needs a 'corpus' path")
    cache = doc.pop("cache", {}) or {}
    if not isinstance(cache, dict):
        raise ConfigError("'cache' must be a table")
    corpus = doc.pop("corpus")
    if not os.path.isabs(corpus):
        corpus = str((base / corpus).resolve())
    backends = {k: _resolve_paths(v, base) for k, v in (doc.pop("backends", {}) or {}).items()}
    cache_dir = cache.get("root")
    if cache_dir and not os.path.isabs(cache_dir):
        cache_dir = str((base / cache_dir).resolve())
    known = {"segmentation", "enrichment", "retrieval", "attribution_method", "max_records", "max_claims",
             "seed", "workers", "setting"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(corpus=corpus, backends=backends, cache_dir=cache_dir,
                         cache_mode=cache.get("mode", CacheMode.RECORD), **doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(raw.decode("utf-8"))
        else:
            doc = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object / TOML table")
    return config_from_dict(doc, path.parent)


def backend_id(service: str, spec: dict[str, Any]) -> str:
    """Stable identity of a configured backend, used in cache keys.

    Derived from the backend settings alone so offline replays never need to build the
    upstream client.
    """
    if spec.get("id"):
        return str(spec["id"])
    kind = spec.get("kind", "?")
    detail = spec.get("model") or spec.get("enrich") or spec.get("dim") or ""
    # fixture files count by content, not location, so cassettes survive a move
    ident = public_spec(spec)
    for key in ("sites", "mapping", "hits"):
        if isinstance(ident.get(key), str):
            try:
                ident[key] = hashlib.sha256(Path(ident[key]).read_bytes()).hexdigest()
            except OSError:
                pass
    digest = hashlib.sha256(canonical_json(ident).encode("utf-8")).hexdigest()[:8]
    return f"{service}:{kind}:{detail}:{digest}" if detail else f"{service}:{kind}:{digest}"


def _env(spec: dict[str, Any], field_name: str, env_field: str, default_env: str | None) -> str | None:
    if spec.get(field_name):
        return str(spec[field_name])
    env_name = spec.get(env_field) or default_env
    return os.environ.get(env_name) if env_name else None


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load {path}: {exc}") from exc


def _sites(spec: dict[str, Any]) -> dict[str, Any]:
    if "sites" not in spec:
        raise ConfigError("corpus search/fetch backends need a 'sites' file")
    doc = _read_json(spec["sites"])
    if not isinstance(doc, dict) or not isinstance(doc.get("pages"), dict):
        raise ConfigError(f"{spec['sites']}: expected an object with a 'pages' map")
    return doc


def build_upstream(service: str, spec: dict[str, Any], retrieval: RetrievalConfig):
    kind = spec.get("kind")
    if service == "chat":
        if kind == "openai":
            url = _env(spec, "url", "url_env", URL_ENV["chat"]) or "https://api.openai.com/v1"
            if not spec.get("model"):
                raise ConfigError("openai chat backend needs a 'model'")
            return OpenAIChat(url, spec["model"], _env(spec, "api_key", "api_key_env", KEY_ENV["chat"]),
                              budget=spec.get("max_calls"))
        if kind == "rule":
            return mock.RuleChat(enrich=spec.get("enrich", "antecedent"), budget=spec.get("max_calls"))
        if kind == "mock":
            return mock.MockChat(_read_json(spec["mapping"]), budget=spec.get("max_calls"))
    elif service == "embed":
        if kind == "http":
            url = _env(spec, "url", "url_env", URL_ENV["embed"])
            if not url:
                raise ConfigError("http embedder needs a URL (config 'url' or env)")
            return HttpEmbedder(url, spec.get("model", ""), _env(spec, "api_key", "api_key_env", KEY_ENV["embed"]))
        if kind == "hashing":
            return mock.HashingEmbedder(int(spec.get("dim", 256)))
    elif service == "nli":
        if kind == "http":
            url = _env(spec, "url", "url_env", URL_ENV["nli"])
            if not url:
                raise ConfigError("http NLI backend needs a URL (config 'url' or env)")
            return HttpNli(url, _env(spec, "api_key", "api_key_env", KEY_ENV["nli"]))
        if kind == "rule":
            return mock.RuleNli()
    elif service == "search":
        if kind == "google":
            url = _env(spec, "url", "url_env", URL_ENV["search"]) or "https://www.googleapis.com/customsearch/v1"
            return GoogleSearch(url, _env(spec, "api_key", "api_key_env", KEY_ENV["search"]),
                                _env(spec, "engine_id", "engine_id_env", "ATTRIBUTOR_SEARCH_CX"))
        if kind == "corpus":
            return mock.CorpusSearch(_sites(spec)["pages"])
        if kind == "fixture":
            return mock.FixtureSearch(_read_json(spec["hits"]))
    elif service == "fetch":
        if kind == "http":
            return HttpFetcher(timeout=retrieval.fetch_timeout, max_bytes=retrieval.max_page_bytes)
        if kind == "corpus":
            doc = _sites(spec)
            return mock.CorpusFetcher(doc["pages"], doc.get("failures"), doc.get("content_types"))
    raise ConfigError(f"unknown {service} backend kind {kind!r}")


_WRAPPERS = {"chat": CachedChat, "embed": CachedEmbedder, "nli": CachedNli, "search": CachedSearch,
             "fetch": CachedFetcher}
_SLOTS = {"chat": "chat", "embed": "embedder", "nli": "nli", "search": "search", "fetch": "fetcher"}


def build_backends(config: RunConfig) -> Backends:
    """Instantiate every configured service behind the cache layer.

    Offline mode never constructs an upstream client, so it cannot reach the network.
    """
    mode = config.cache_mode
    cache = None
    if mode is not CacheMode.LIVE:
        cache = ResponseCache(config.cache_dir or os.environ.get(CACHE_ENV) or ".attributor-cache")
    out = Backends()
    for service, spec in config.backends.items():
        upstream = None if mode is CacheMode.OFFLINE else build_upstream(service, spec, config.retrieval)
        wrapped = _WRAPPERS[service](upstream, cache, mode, backend_id=backend_id(service, spec))
        setattr(out, _SLOTS[service], wrapped)
    out.extras["cache"] = cache
    return out
