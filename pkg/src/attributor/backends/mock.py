"""Deterministic offline backends.

All of these are pure functions of their inputs: no hidden state, no clock,
no randomness. They exist for tests, fixtures and recording cassettes.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, Mapping

from attributor import prompts
from attributor.backends.base import (
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
from attributor.errors import BackendMiss

_WORD = re.compile(r"\w+")

PRONOUNS = frozenset({"they", "it", "this", "these", "those", "he", "she", "them", "their", "its"})
_SUBJECT_PRONOUN = re.compile(r"\b(they|it|these|those|this|he|she)\b", re.I)
_SUBJECT_SPLIT = re.compile(r"^(.+?)\s+(?:are|is|was|were|can|could|have|has|will|may|do|does)\b", re.I)


def tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def token_substring(needle: str, haystack: str) -> bool:
    """Word-aligned containment after lowercasing and dropping punctuation."""
    n = " ".join(tokens(needle))
    return bool(n) and f" {n} " in f" {' '.join(tokens(haystack))} "


class MockChat(ChatBackend):
    """Exact-prompt lookup table; anything unmapped is a BackendMiss."""

    backend_id = "mock-chat"

    def __init__(self, mapping: Mapping[str, str], budget: int | None = None):
        super().__init__(budget)
        self.mapping = dict(mapping)

    def chat_raw(self, req: ChatRequest) -> str:
        try:
            return self.mapping[req.user_prompt]
        except KeyError:
            raise BackendMiss(f"mock chat has no mapping for prompt {req.user_prompt[:60]!r}") from None


def antecedent_of(answer: str) -> str | None:
    """Subject phrase of the answer's first sentence ("Heat pumps are ..." -> "Heat pumps")."""
    first = re.split(r"(?<=[.!?])\s+", answer.strip(), maxsplit=1)[0]
    m = _SUBJECT_SPLIT.match(first)
    if not m:
        return None
    subject = m.group(1).strip()
    return None if subject.lower() in PRONOUNS else subject


def _split_facts(sentence: str) -> list[str]:
    body = sentence.strip()
    end = body[-1] if body[-1:] in "?!" else "."
    body = body.rstrip(".!?")
    parts = [p.strip() for p in re.split(r",\s*and\s+|;\s*|\s+and\s+", body) if p.strip()]
    return [p[0].upper() + p[1:] + end for p in parts]


class RuleChat(ChatBackend):
    """Answers every known prompt template with a fixed, inspectable rule.

    ``enrich`` selects the enrichment rule: "antecedent" swaps the first
    subject pronoun for the subject of the answer's first sentence, "echo"
    returns the claim unchanged.
    """

    backend_id = "rule-chat"

    def __init__(self, enrich: str = "antecedent", budget: int | None = None):
        super().__init__(budget)
        if enrich not in ("antecedent", "echo"):
            raise ValueError(f"unknown enrich rule {enrich!r}")
        self.enrich = enrich
        self.backend_id = f"rule-chat:{enrich}"

    def chat_raw(self, req: ChatRequest) -> str:
        name = prompts.identify(req.user_prompt)
        slots = prompts.parse(name, req.user_prompt) if name else None
        if slots is None:
            raise BackendMiss(f"rule chat does not recognise prompt {req.user_prompt[:60]!r}")
        return getattr(self, f"_{name}")(**slots)

    def _factscore(self, sentence):
        return "\n".join(f'{i}. "{f}"' for i, f in enumerate(_split_facts(sentence), 1))

    def _direct_segmentation(self, question, answer):
        from attributor.segmentation import split_sentences

        return "\n".join(f"{i}. {s.text}" for i, s in enumerate(split_sentences(answer), 1))

    def _checkworthiness(self, input):
        text = input.strip()
        lowered = text.lower()
        if text.endswith("?"):
            return "3"
        if lowered.startswith(("i think", "i believe", "in my opinion")):
            return "2"
        if lowered.startswith(("as a language model", "as an ai")):
            return "4"
        return "1"

    def _independence(self, claim):
        return "not independent" if PRONOUNS & set(tokens(claim)) else "independent"

    def _enrichment(self, question, answer, claim):
        if self.enrich == "echo":
            return claim
        subject = antecedent_of(answer)
        if subject is None:
            return claim
        return _SUBJECT_PRONOUN.sub(lambda m: subject, claim, count=1)

    def _nli(self, question, claim, document):
        verdict = RuleNli().nli_classify(document, claim).label
        return '"{}"'.format({
            NliLabel.ENTAILMENT: "entailed",
            NliLabel.CONTRADICTION: "contradicted",
            NliLabel.NEUTRAL: "no_relation",
        }[verdict])


class RuleNli(NliBackend):
    """Substring NLI.

    entailment: the hypothesis occurs word-aligned in the premise.
    contradiction: the premise contains "not" followed by the hypothesis head
    (its first two words), or deleting negations from the premise exposes the
    hypothesis.
    neutral otherwise.
    """

    backend_id = "rule-nli"

    def nli_raw(self, premise: str, hypothesis: str) -> NliVerdict:
        if token_substring(hypothesis, premise):
            return NliVerdict(NliLabel.ENTAILMENT, 1.0)
        hyp = tokens(hypothesis)
        head = " ".join(hyp[:2])
        prem = tokens(premise)
        if f" not {head} " in f" {' '.join(prem)} ":
            return NliVerdict(NliLabel.CONTRADICTION, 1.0)
        if "not" in prem:
            stripped = [t for t in prem if t not in ("not", "do", "does", "did")]
            if token_substring(hypothesis, " ".join(stripped)):
                return NliVerdict(NliLabel.CONTRADICTION, 1.0)
        return NliVerdict(NliLabel.NEUTRAL, 1.0)


def _hash_int(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class HashingEmbedder(EmbeddingBackend):
    """Signed feature hashing over word unigrams and bigrams."""

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.backend_id = f"hashing-{dim}"

    def embed_raw(self, texts: list[str]) -> list[list[float]]:
        return [self._one(t) for t in texts]

    def _one(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        toks = tokens(text)
        feats = [(t, 1.0) for t in toks] + [(f"{a} {b}", 0.5) for a, b in zip(toks, toks[1:])]
        if not feats:
            feats = [(text, 1.0)]
        for feat, weight in feats:
            h = _hash_int(feat)
            vec[h % self.dim] += weight if (h >> 32) & 1 else -weight
        if not any(vec):
            vec[_hash_int(text) % self.dim] = 1.0
        return vec


class FixtureSearch(SearchBackend):
    """Replays recorded hit lists keyed by exact query string."""

    backend_id = "fixture-search"

    def __init__(self, recorded: Mapping[str, list[dict]]):
        self.recorded = {q: [SearchHit(**h) for h in hits] for q, hits in recorded.items()}

    def search_raw(self, query: str, k: int) -> list[SearchHit]:
        try:
            return list(self.recorded[query])
        except KeyError:
            raise BackendMiss(f"no recorded hits for query {query!r}") from None


class CorpusSearch(SearchBackend):
    """Ranks a fixed site set by word overlap with the query."""

    backend_id = "corpus-search"

    def __init__(self, pages: Mapping[str, str]):
        from attributor.retrieval.extract import extract_text, page_title

        self._docs = []
        for url, html in pages.items():
            text = extract_text(html)
            self._docs.append((url, page_title(html) or url, text[:160], set(tokens(text))))

    def search_raw(self, query: str, k: int) -> list[SearchHit]:
        q = set(tokens(query))
        scored = [(len(q & words), i) for i, (_, _, _, words) in enumerate(self._docs)]
        ranked = sorted((s for s in scored if s[0] > 0), key=lambda s: (-s[0], s[1]))[:k]
        return [
            SearchHit(url=self._docs[i][0], title=self._docs[i][1], snippet=self._docs[i][2], rank=r)
            for r, (_, i) in enumerate(ranked, 1)
        ]


class CorpusFetcher(Fetcher):
    """Serves pages from a dict; ``failures`` maps a URL to an HTTP status or "timeout"."""

    backend_id = "corpus-fetch"

    def __init__(self, pages: Mapping[str, str], failures: Mapping[str, int | str] | None = None,
                 content_types: Mapping[str, str] | None = None):
        self.pages = dict(pages)
        self.failures = dict(failures or {})
        self.content_types = dict(content_types or {})

    def fetch_raw(self, url: str) -> FetchedPage:
        failure = self.failures.get(url)
        if failure == "timeout":
            return FetchedPage(url, timed_out=True)
        if failure is not None:
            return FetchedPage(url, status=int(failure))
        if url not in self.pages:
            return FetchedPage(url, status=404)
        return FetchedPage(url, status=200, content_type=self.content_types.get(url, "text/html"),
                           body=self.pages[url])


class CallableChat(ChatBackend):
    """Wraps a plain function; handy for one-off test doubles."""

    backend_id = "callable-chat"

    def __init__(self, fn: Callable[[ChatRequest], str], budget: int | None = None):
        super().__init__(budget)
        self.fn = fn

    def chat_raw(self, req: ChatRequest) -> str:
        return self.fn(req)
