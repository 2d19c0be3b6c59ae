"""Check-worthiness, independence detection and context enrichment of claims."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

from attributor import prompts
from attributor.backends.base import ChatBackend, ChatRequest
from attributor.core import Claim, ClaimOrigin, Independence, RelevanceClass, StageError
from attributor.errors import EmptyInput, InvalidInput, UnparseableVerdict

logger = logging.getLogger(__name__)

_LABEL = re.compile(r"""^[\s"'`]*([1-4])[\s"'`.]*$""")
_REVISED_PREFIX = re.compile(r"^\s*revised claim\s*:\s*", re.I)


def _strip_reply(reply: str) -> str:
    return reply.strip().strip("\"'`").strip().rstrip(".").strip().lower()


def parse_relevance(reply: str) -> RelevanceClass | None:
    m = _LABEL.match(reply)
    return RelevanceClass(int(m.group(1))) if m else None


def parse_independence(reply: str) -> Independence | None:
    text = " ".join(_strip_reply(reply).replace("_", " ").split())
    if text == "independent":
        return Independence.INDEPENDENT
    if text in ("not independent", "non independent", "non-independent"):
        return Independence.NOT_INDEPENDENT
    return None


def classify_checkworthiness(claim: Claim, backend: ChatBackend,
                             errors: list[StageError] | None = None) -> RelevanceClass:
    """Four-way check-worthiness label; two unparseable replies fall back to OTHER."""
    prompt = prompts.render("checkworthiness", input=claim.text)
    reply = ""
    for attempt in range(2):
        reply = backend.chat_complete(ChatRequest(user_prompt=prompt, attempt=attempt))
        label = parse_relevance(reply)
        if label is not None:
            return label
    if errors is not None:
        errors.append(StageError("classify", claim.record_id, claim.id, "UnparseableVerdict",
                                 f"check-worthiness reply {reply[:80]!r}; classified as other"))
    return RelevanceClass.OTHER


def detect_independence(claim: Claim | str, backend: ChatBackend) -> Independence:
    text = claim.text if isinstance(claim, Claim) else claim
    prompt = prompts.render("independence", claim=text)
    reply = ""
    for attempt in range(2):
        reply = backend.chat_complete(ChatRequest(user_prompt=prompt, attempt=attempt))
        verdict = parse_independence(reply)
        if verdict is not None:
            return verdict
    raise UnparseableVerdict(reply, '"independent" or "not independent"')


@dataclass(frozen=True)
class EnrichmentOutcome:
    original_claim_id: str
    enriched_claim_id: str
    resolved: bool
    before_len: int
    after_len: int
    enriched: Claim

    def to_dict(self) -> dict:
        return {
            "original_claim_id": self.original_claim_id,
            "enriched_claim_id": self.enriched_claim_id,
            "resolved": self.resolved,
            "before_len": self.before_len,
            "after_len": self.after_len,
            "enriched_text": self.enriched.text,
        }


def clean_revised_claim(reply: str) -> str:
    text = _REVISED_PREFIX.sub("", reply.strip())
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1].strip()
    return text


def enrich_claim(question: str, answer: str, claim: Claim, backend: ChatBackend) -> EnrichmentOutcome:
    """Rewrite a context-dependent claim with details from the question and answer, then re-check it."""
    if claim.origin is ClaimOrigin.ENRICHED:
        raise InvalidInput(f"claim {claim.id} is already an enrichment")
    if claim.independence is not Independence.NOT_INDEPENDENT:
        raise InvalidInput(f"claim {claim.id} is not labelled not_independent")
    prompt = prompts.render("enrichment", question=question, answer=answer, claim=claim.text)
    reply = backend.chat_complete(ChatRequest(user_prompt=prompt))
    text = clean_revised_claim(reply)
    if not text:
        raise UnparseableVerdict(reply, "a revised claim")
    verdict = detect_independence(text, backend)
    enriched = Claim(
        id=f"{claim.id}+e",
        record_id=claim.record_id,
        text=text,
        origin=ClaimOrigin.ENRICHED,
        parent_claim_id=claim.id,
        relevance=claim.relevance,
        independence=verdict,
    )
    return EnrichmentOutcome(
        original_claim_id=claim.id,
        enriched_claim_id=enriched.id,
        resolved=verdict is Independence.INDEPENDENT,
        before_len=len(claim.text),
        after_len=len(text),
        enriched=enriched,
    )


@dataclass(frozen=True)
class EnrichmentEffect:
    total: int
    resolved: int
    rate: float
    mean_before_len: float
    mean_after_len: float

    def to_dict(self) -> dict:
        return {"total": self.total, "resolved": self.resolved, "rate": self.rate,
                "mean_before_len": self.mean_before_len, "mean_after_len": self.mean_after_len}


def enrichment_effect(outcomes: Sequence[EnrichmentOutcome]) -> EnrichmentEffect:
    if not outcomes:
        raise EmptyInput("enrichment_effect needs at least one outcome")
    n = len(outcomes)
    resolved = sum(o.resolved for o in outcomes)
    return EnrichmentEffect(
        total=n,
        resolved=resolved,
        rate=resolved / n,
        mean_before_len=sum(o.before_len for o in outcomes) / n,
        mean_after_len=sum(o.after_len for o in outcomes) / n,
    )
