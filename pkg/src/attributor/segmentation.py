"""Answer segmentation: sentences, per-sentence fact prompts, and direct segmentation with context."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from attributor import prompts
from attributor.backends.base import ChatBackend, ChatRequest
from attributor.concurrency import ordered_map
from attributor.core import Claim, ClaimOrigin, QARecord, StageError
from attributor.errors import BackendError, MalformedListReply, ZeroSentences

logger = logging.getLogger(__name__)

ABBREVIATIONS = frozenset({
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "e.g.", "i.e.", "cf.",
    "inc.", "ltd.", "co.", "corp.", "fig.", "approx.", "dept.", "est.", "gen.", "gov.", "mt.",
    "al.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.",
    "nov.", "dec.", "u.s.", "u.k.", "a.m.", "p.m.", "ph.d.", "no.", "vol.", "pp.", "ca.",
})

# terminal punctuation, optional closing quotes/brackets, whitespace, then something sentence-like
_BOUNDARY = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s+[\"'“‘(\[]?[A-Z0-9])")
_INITIAL_TOKEN = re.compile(r"^[A-Z]\.$")
_ENUMERATOR = re.compile(r"^\s*\d+\.$")


@dataclass(frozen=True)
class Sentence:
    text: str
    index: int


def _is_initial(prev: str, word: str, nxt: str) -> bool:
    """"J. K. Rowling", "John F. Kennedy" -- but not "A is B. C is D."."""
    if not _INITIAL_TOKEN.match(word):
        return False
    if _INITIAL_TOKEN.match(prev) or _INITIAL_TOKEN.match(nxt):
        return True
    return prev[:1].isupper() and prev[1:].islower() and nxt[:1].isupper() and nxt[1:].isalpha()


def _is_false_boundary(line: str, end: int) -> bool:
    """``end`` is the index just past the terminal punctuation run."""
    head = line[:end]
    if not head.endswith("."):
        return False
    before = head.split()
    word = before[-1].lstrip("(\"'")
    if word.lower() in ABBREVIATIONS:
        return True
    prev = before[-2] if len(before) > 1 else ""
    after = line[end:].split(None, 1)
    if _is_initial(prev, word, after[0] if after else ""):
        return True
    return bool(_ENUMERATOR.match(head))


def split_sentences(answer: str) -> list[Sentence]:
    """Rule-based sentence splitter; every line break is also a boundary."""
    out: list[str] = []
    for line in answer.splitlines():
        start = 0
        for m in _BOUNDARY.finditer(line):
            if _is_false_boundary(line, m.end()):
                continue
            piece = line[start:m.end()].strip()
            if piece:
                out.append(piece)
            start = m.end()
        tail = line[start:].strip()
        if tail:
            out.append(tail)
    return [Sentence(text, i) for i, text in enumerate(out)]


_NUMBERED = re.compile(r"^\s*\d+\s*[.)]\s*(.*?)\s*$")
_QUOTES = {'"': '"', "'": "'", "“": "”", "‘": "’"}
_PLACEHOLDERS = frozenset({"...", "…"})


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] in _QUOTES and text[-1] == _QUOTES[text[0]]:
        text = text[1:-1].strip()
    return text


def parse_numbered_list(reply: str) -> tuple[list[str], int]:
    """Items of a ``1. "text"`` / ``1. text`` list, plus the count of lines that were skipped.

    Blank lines are ignored; any other non-item line (commentary, placeholders,
    empty items) counts as skipped.
    """
    items: list[str] = []
    skipped = 0
    for line in reply.splitlines():
        if not line.strip():
            continue
        m = _NUMBERED.match(line)
        text = _unquote(m.group(1)) if m else ""
        if not text or text in _PLACEHOLDERS:
            skipped += 1
            continue
        items.append(text)
    return items, skipped


@dataclass
class SegmentationResult:
    claims: list[Claim] = field(default_factory=list)
    errors: list[StageError] = field(default_factory=list)
    skipped_lines: int = 0
    backend_calls: int = 0


def segment_sentences(record: QARecord) -> SegmentationResult:
    claims = [
        Claim(id=f"{record.id}/s{s.index + 1}", record_id=record.id, text=s.text, origin=ClaimOrigin.SENTENCE)
        for s in split_sentences(record.answer)
    ]
    return SegmentationResult(claims=claims)


def _ask_list(backend: ChatBackend, prompt: str) -> tuple[list[str], int]:
    reply = backend.chat_complete(ChatRequest(user_prompt=prompt))
    items, skipped = parse_numbered_list(reply)
    if not items:
        raise MalformedListReply(f"no numbered items in reply ({skipped} unparseable lines)")
    return items, skipped


def segment_factscore(record: QARecord, backend: ChatBackend, workers: int = 1) -> SegmentationResult:
    """One fact-breakdown prompt per sentence; a failed sentence is logged and skipped."""
    sentences = split_sentences(record.answer)

    def run(sentence: Sentence):
        try:
            return _ask_list(backend, prompts.render("factscore", sentence=sentence.text)), None
        except (BackendError, MalformedListReply) as exc:
            return None, StageError.from_exc("segment", record.id, f"sentence {sentence.index}", exc)

    result = SegmentationResult(backend_calls=len(sentences))
    n = 0
    for outcome, error in ordered_map(run, sentences, workers):
        if error is not None:
            logger.warning("%s", error.message)
            result.errors.append(error)
            continue
        items, skipped = outcome
        result.skipped_lines += skipped
        for text in items:
            n += 1
            result.claims.append(
                Claim(id=f"{record.id}/f{n}", record_id=record.id, text=text, origin=ClaimOrigin.PROMPT_FACTSCORE)
            )
    return result


def segment_direct(record: QARecord, backend: ChatBackend) -> SegmentationResult:
    """Whole answer plus question in one prompt, yielding context-complete claims."""
    result = SegmentationResult(backend_calls=1)
    prompt = prompts.render("direct_segmentation", question=record.question, answer=record.answer)
    try:
        items, result.skipped_lines = _ask_list(backend, prompt)
    except (BackendError, MalformedListReply) as exc:
        result.errors.append(StageError.from_exc("segment", record.id, "answer", exc))
        return result
    result.claims = [
        Claim(id=f"{record.id}/d{i}", record_id=record.id, text=text, origin=ClaimOrigin.DIRECT_WITH_CONTEXT)
        for i, text in enumerate(items, 1)
    ]
    return result


def segment(record: QARecord, strategy: ClaimOrigin | str, backend: ChatBackend | None = None,
            workers: int = 1) -> SegmentationResult:
    strategy = ClaimOrigin(strategy)
    if strategy is ClaimOrigin.SENTENCE:
        return segment_sentences(record)
    if backend is None:
        raise ValueError(f"strategy {strategy.value} needs a chat backend")
    if strategy is ClaimOrigin.PROMPT_FACTSCORE:
        return segment_factscore(record, backend, workers)
    if strategy is ClaimOrigin.DIRECT_WITH_CONTEXT:
        return segment_direct(record, backend)
    raise ValueError(f"{strategy.value} is not a segmentation strategy")


def dedupe_claims(claims: Iterable[Claim]) -> list[Claim]:
    """Keep the first claim per fingerprint, preserving order."""
    seen: set[str] = set()
    out = []
    for c in claims:
        if c.fingerprint not in seen:
            seen.add(c.fingerprint)
            out.append(c)
    return out


@dataclass(frozen=True)
class SegStats:
    total_claims: int
    unique_claims: int
    avg_len_chars: float
    claims_per_sentence: float

    def to_dict(self) -> dict:
        return {"total_claims": self.total_claims, "unique_claims": self.unique_claims,
                "avg_len_chars": self.avg_len_chars, "claims_per_sentence": self.claims_per_sentence}


def segmentation_stats(claims: Sequence[Claim], answer: str) -> SegStats:
    """Count/unique/length/per-sentence figures for one answer (lengths taken before dedup)."""
    n_sent = len(split_sentences(answer))
    if n_sent == 0:
        raise ZeroSentences("answer has no sentences")
    return _stats(claims, n_sent, len({c.fingerprint for c in claims}))


def corpus_segmentation_stats(per_answer: Iterable[tuple[Sequence[Claim], str]]) -> SegStats:
    """Pooled statistics over many answers; uniqueness is judged within each answer."""
    claims: list[Claim] = []
    unique = 0
    n_sent = 0
    for answer_claims, answer in per_answer:
        claims.extend(answer_claims)
        unique += len({c.fingerprint for c in answer_claims})
        n_sent += len(split_sentences(answer))
    if n_sent == 0:
        return SegStats(0, 0, 0.0, 0.0)
    return _stats(claims, n_sent, unique)


def _stats(claims: Sequence[Claim], n_sent: int, unique: int) -> SegStats:
    total = len(claims)
    avg = sum(len(c.text) for c in claims) / total if total else 0.0
    return SegStats(total, unique, avg, total / n_sent)
