"""Shared domain types and the small deterministic helpers everything else leans on.

All types are frozen dataclasses; "updating" a claim means ``dataclasses.replace``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Sequence

from attributor.errors import InvalidInput

_WS = re.compile(r"\s+")


def normalize_text(t: str) -> str:
    """Lowercase, trim, collapse whitespace runs and drop one terminal period."""
    t = _WS.sub(" ", t.strip().lower())
    if t.endswith("."):
        t = t[:-1].rstrip()
    return t


def fingerprint(t: str) -> str:
    """64-bit content hash of the normalized text, as 16 hex digits.

    Uses blake2b rather than ``hash()`` so values are stable across processes.
    """
    digest = hashlib.blake2b(normalize_text(t).encode("utf-8"), digest_size=8)
    return digest.hexdigest()


class ClaimOrigin(str, Enum):
    SENTENCE = "sentence"
    PROMPT_FACTSCORE = "prompt_factscore"
    DIRECT_WITH_CONTEXT = "direct_with_context"
    ENRICHED = "enriched"


class RelevanceClass(int, Enum):
    FACTUAL_CLAIM = 1
    OPINION = 2
    NOT_A_CLAIM = 3
    OTHER = 4

    @property
    def label(self) -> str:
        return self.name.lower()


class Independence(str, Enum):
    INDEPENDENT = "independent"
    NOT_INDEPENDENT = "not_independent"


class Relation(str, Enum):
    ENTAILED = "entailed"
    CONTRADICTED = "contradicted"
    NO_RELATION = "no_relation"
    MISSING = "missing"


@dataclass(frozen=True)
class QARecord:
    id: str
    question: str
    answer: str
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("record id must be nonempty")
        if not self.question.strip():
            raise InvalidInput(f"record {self.id}: empty question")
        if not self.answer.strip():
            raise InvalidInput(f"record {self.id}: empty answer")

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "question": self.question, "answer": self.answer, "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> QARecord:
        return cls(id=d["id"], question=d["question"], answer=d["answer"], meta=dict(d.get("meta") or {}))


@dataclass(frozen=True)
class Claim:
    id: str
    record_id: str
    text: str
    origin: ClaimOrigin
    parent_claim_id: str | None = None
    relevance: RelevanceClass | None = None
    independence: Independence | None = None
    fingerprint: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidInput(f"claim {self.id}: empty text")
        origin = ClaimOrigin(self.origin)
        object.__setattr__(self, "origin", origin)
        if (origin is ClaimOrigin.ENRICHED) != (self.parent_claim_id is not None):
            raise InvalidInput(f"claim {self.id}: parent_claim_id must be set iff origin is enriched")
        if self.relevance is not None:
            object.__setattr__(self, "relevance", RelevanceClass(self.relevance))
        if self.independence is not None:
            object.__setattr__(self, "independence", Independence(self.independence))
        fp = fingerprint(self.text)
        if self.fingerprint and self.fingerprint != fp:
            raise InvalidInput(f"claim {self.id}: fingerprint does not match text")
        object.__setattr__(self, "fingerprint", fp)

    def with_labels(self, **changes: Any) -> Claim:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "record_id": self.record_id,
            "text": self.text,
            "origin": self.origin.value,
            "parent_claim_id": self.parent_claim_id,
            "relevance": self.relevance.label if self.relevance else None,
            "independence": self.independence.value if self.independence else None,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Claim:
        rel = d.get("relevance")
        return cls(
            id=d["id"],
            record_id=d["record_id"],
            text=d["text"],
            origin=ClaimOrigin(d["origin"]),
            parent_claim_id=d.get("parent_claim_id"),
            relevance=RelevanceClass[rel.upper()] if rel else None,
            independence=Independence(d["independence"]) if d.get("independence") else None,
        )


@dataclass(frozen=True)
class EvidenceChunk:
    id: str
    url: str
    chunk_index: int
    text: str
    window_size: int
    embedding: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0 < len(self.text) <= self.window_size:
            raise InvalidInput(
                f"chunk {self.id}: length {len(self.text)} outside (0, {self.window_size}]"
            )
        if self.embedding:
            norm = sum(x * x for x in self.embedding) ** 0.5
            if abs(norm - 1.0) > 1e-6:
                raise InvalidInput(f"chunk {self.id}: embedding norm {norm} is not 1")


@dataclass(frozen=True)
class PRFResult:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_prf(gold: Sequence[bool], predicted: Sequence[bool]) -> PRFResult:
    """Precision/recall/F1 with the positive class meaning "not independent".

    0/0 is taken as 0 for every ratio.
    """
    if len(gold) != len(predicted):
        raise InvalidInput(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
    if not gold:
        raise InvalidInput("compute_prf needs at least one item")
    tp = sum(1 for g, p in zip(gold, predicted) if g and p)
    fp = sum(1 for g, p in zip(gold, predicted) if not g and p)
    fn = sum(1 for g, p in zip(gold, predicted) if g and not p)
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return PRFResult(precision, recall, f1, tp, fp, fn)


@dataclass(frozen=True)
class StageError:
    """One non-fatal failure, kept in the run's error log."""

    stage: str
    record_id: str
    subject: str
    kind: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"stage": self.stage, "record_id": self.record_id, "subject": self.subject,
                "kind": self.kind, "message": self.message}

    @classmethod
    def from_exc(cls, stage: str, record_id: str, subject: str, exc: BaseException) -> StageError:
        return cls(stage, record_id, subject, type(exc).__name__, str(exc))
