"""Claim/evidence relation labelling, claim-level aggregation and relation distributions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

from attributor import prompts
from attributor.backends.base import ChatBackend, ChatRequest, NliBackend, NliLabel
from attributor.core import Claim, EvidenceChunk, Relation
from attributor.errors import EmptyInput, GranularityMismatch, InvalidInput, MixedClaimIds, UnparseableVerdict
from attributor.retrieval.index import ScoredChunk


class Method(str, Enum):
    PROMPT_LLM = "prompt_llm"
    ENCODER_NLI = "encoder_nli"


class Granularity(str, Enum):
    PAIR = "pair"
    CLAIM = "claim"


NLI_TO_RELATION = {
    NliLabel.ENTAILMENT: Relation.ENTAILED,
    NliLabel.CONTRADICTION: Relation.CONTRADICTED,
    NliLabel.NEUTRAL: Relation.NO_RELATION,
}

_REPLY_TO_RELATION = {
    "entailed": Relation.ENTAILED,
    "contradicted": Relation.CONTRADICTED,
    "no_relation": Relation.NO_RELATION,
    "no relation": Relation.NO_RELATION,
}

# fixed column order for counts and tables
RELATION_ORDER = (Relation.CONTRADICTED, Relation.ENTAILED, Relation.MISSING, Relation.NO_RELATION)


@dataclass(frozen=True)
class PairVerdict:
    claim_id: str
    chunk_id: str
    relation: Relation
    method: Method
    score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "relation", Relation(self.relation))
        object.__setattr__(self, "method", Method(self.method))
        if self.relation is Relation.MISSING:
            raise InvalidInput("pair verdicts cannot be 'missing'")

    def to_dict(self) -> dict:
        return {"claim_id": self.claim_id, "chunk_id": self.chunk_id, "relation": self.relation.value,
                "method": self.method.value, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> PairVerdict:
        return cls(d["claim_id"], d["chunk_id"], Relation(d["relation"]), Method(d["method"]), d.get("score"))


def parse_relation_reply(reply: str) -> Relation | None:
    text = reply.strip().strip("\"'`").strip().rstrip(".").strip().strip("\"'`").lower()
    return _REPLY_TO_RELATION.get(text)


def relate_pair(claim: Claim, chunk: EvidenceChunk | ScoredChunk, question: str,
                method: Method | str = Method.ENCODER_NLI,
                backend: ChatBackend | NliBackend | None = None) -> PairVerdict:
    """Label one (claim, evidence chunk) pair.

    The encoder route uses the chunk as premise and the claim as hypothesis.
    """
    method = Method(method)
    score = None
    if isinstance(chunk, ScoredChunk):
        score, chunk = chunk.score, chunk.chunk
    if not claim.text.strip() or not chunk.text.strip():
        raise EmptyInput("claim and chunk text must be nonempty")
    if backend is None:
        raise ValueError(f"method {method.value} needs a backend")
    if method is Method.ENCODER_NLI:
        verdict = backend.nli_classify(premise=chunk.text, hypothesis=claim.text)
        relation = NLI_TO_RELATION[verdict.label]
    else:
        prompt = prompts.render("nli", question=question, claim=claim.text, document=chunk.text)
        reply = ""
        relation = None
        for attempt in range(2):
            reply = backend.chat_complete(ChatRequest(user_prompt=prompt, attempt=attempt))
            relation = parse_relation_reply(reply)
            if relation is not None:
                break
        if relation is None:
            raise UnparseableVerdict(reply, '"entailed", "contradicted" or "no_relation"')
    return PairVerdict(claim.id, chunk.id, relation, method, score)


@dataclass(frozen=True)
class ClaimAttribution:
    claim_id: str
    verdict: Relation
    supporting_chunk_ids: tuple[str, ...] = ()
    pair_verdicts: tuple[PairVerdict, ...] = ()

    def to_dict(self) -> dict:
        return {"claim_id": self.claim_id, "verdict": self.verdict.value,
                "supporting_chunk_ids": list(self.supporting_chunk_ids),
                "pair_verdicts": [p.to_dict() for p in self.pair_verdicts]}

    @classmethod
    def from_dict(cls, d: dict) -> ClaimAttribution:
        return cls(d["claim_id"], Relation(d["verdict"]), tuple(d["supporting_chunk_ids"]),
                   tuple(PairVerdict.from_dict(p) for p in d["pair_verdicts"]))


def aggregate_claim(claim_id: str, verdicts: Sequence[PairVerdict]) -> ClaimAttribution:
    """No pairs -> missing; any entailed -> entailed; any contradicted -> contradicted; else no_relation."""
    stray = {v.claim_id for v in verdicts} - {claim_id}
    if stray:
        raise MixedClaimIds(f"verdicts for {sorted(stray)} passed to claim {claim_id}")
    relations = {v.relation for v in verdicts}
    if not verdicts:
        verdict = Relation.MISSING
    elif Relation.ENTAILED in relations:
        verdict = Relation.ENTAILED
    elif Relation.CONTRADICTED in relations:
        verdict = Relation.CONTRADICTED
    else:
        verdict = Relation.NO_RELATION
    supporting = tuple(sorted({v.chunk_id for v in verdicts if v.relation is Relation.ENTAILED}))
    return ClaimAttribution(claim_id, verdict, supporting, tuple(verdicts))


@dataclass(frozen=True)
class RelationDistribution:
    granularity: Granularity
    counts: dict[Relation, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        full = {r: int(self.counts.get(r, 0)) for r in RELATION_ORDER}
        object.__setattr__(self, "counts", full)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def shares(self) -> dict[Relation, float]:
        total = self.total
        return {r: (n / total if total else 0.0) for r, n in self.counts.items()}

    def share(self, relation: Relation) -> float:
        return self.shares[Relation(relation)]

    def to_dict(self) -> dict:
        shares = self.shares
        return {
            "granularity": self.granularity.value,
            "total": self.total,
            "counts": {r.value: self.counts[r] for r in RELATION_ORDER},
            "shares": {r.value: shares[r] for r in RELATION_ORDER},
        }

    @classmethod
    def from_dict(cls, d: dict) -> RelationDistribution:
        return cls(Granularity(d["granularity"]), {Relation(k): v for k, v in d["counts"].items()})


Attributable = Union[PairVerdict, ClaimAttribution]


def relation_distribution(items: Iterable[Attributable]) -> RelationDistribution:
    items = list(items)
    if not items:
        raise EmptyInput("relation_distribution needs at least one item")
    if all(isinstance(i, PairVerdict) for i in items):
        granularity = Granularity.PAIR
        relations = [i.relation for i in items]
    elif all(isinstance(i, ClaimAttribution) for i in items):
        granularity = Granularity.CLAIM
        relations = [i.verdict for i in items]
    else:
        raise InvalidInput("cannot mix pair verdicts and claim attributions")
    counts: dict[Relation, int] = {}
    for r in relations:
        counts[r] = counts.get(r, 0) + 1
    return RelationDistribution(granularity, counts)


def no_relation_reduction(before: RelationDistribution | float, after: RelationDistribution | float) -> float:
    """Drop in the no_relation share, in percentage points (positive = fewer unrelated)."""
    if isinstance(before, RelationDistribution) and isinstance(after, RelationDistribution):
        if before.granularity is not after.granularity:
            raise GranularityMismatch(f"{before.granularity.value} vs {after.granularity.value}")
    elif isinstance(before, RelationDistribution) or isinstance(after, RelationDistribution):
        raise GranularityMismatch("compare two distributions or two raw shares")
    b = before.share(Relation.NO_RELATION) if isinstance(before, RelationDistribution) else float(before)
    a = after.share(Relation.NO_RELATION) if isinstance(after, RelationDistribution) else float(after)
    # rounded so decimal inputs give decimal answers (0.699 -> 0.537 is 16.2, not 16.199999...)
    return round((b - a) * 100, 9)
