import pytest
from hypothesis import given
from hypothesis import strategies as st

from attributor import prompts
from attributor.attribution import (
    ClaimAttribution,
    Granularity,
    Method,
    PairVerdict,
    RelationDistribution,
    aggregate_claim,
    no_relation_reduction,
    parse_relation_reply,
    relate_pair,
    relation_distribution,
)
from attributor.backends import mock
from attributor.core import Claim, ClaimOrigin, EvidenceChunk, Relation
from attributor.errors import EmptyInput, GranularityMismatch, InvalidInput, MixedClaimIds, UnparseableVerdict
from attributor.retrieval.index import ScoredChunk

PATROL_Q = ("You are patrolling the local city center when you are informed by the public about a young girl "
            "behaving erratically near traffic. What are your initial thoughts and actions?")
PATROL_CLAIM = "Trained professionals should handle situations like this."
FOOTBALL_DOC = ("Every trained professional football player should be adept at managing high-stress situations on "
                "the field.")
POLICE_DOC = "Standard police officer training includes procedures for managing public disturbances and emergencies."


def claim(text, cid="r/f1"):
    return Claim(cid, "r", text, ClaimOrigin.PROMPT_FACTSCORE)


def chunk(text, cid="k0"):
    return EvidenceChunk(cid, "https://x.example", 0, text, 512)


def pv(relation, cid="c", k="k"):
    return PairVerdict(cid, k, relation, Method.ENCODER_NLI)


@pytest.mark.parametrize("reply, relation", [
    ('"entailed"', Relation.ENTAILED), ("contradicted.", Relation.CONTRADICTED), ("no_relation", Relation.NO_RELATION),
    ("'no relation'", Relation.NO_RELATION), ("missing", None), ("entailed because", None),
])
def test_parse_relation_reply(reply, relation):
    assert parse_relation_reply(reply) is relation


@pytest.mark.parametrize("document, reply, relation", [
    (FOOTBALL_DOC, '"no_relation"', Relation.NO_RELATION),
    (POLICE_DOC, '"entailed"', Relation.ENTAILED),
])
def test_prompt_route_patrol_examples(document, reply, relation):
    chat = mock.MockChat({prompts.render("nli", question=PATROL_Q, claim=PATROL_CLAIM, document=document): reply})
    v = relate_pair(claim(PATROL_CLAIM), chunk(document), PATROL_Q, Method.PROMPT_LLM, chat)
    assert v.relation is relation and v.method is Method.PROMPT_LLM


def test_encoder_route_verbatim_chunk():
    v = relate_pair(claim("Heat pumps save money."), ScoredChunk(chunk("Yes. Heat pumps save money. Really."), 0.7),
                    "q", Method.ENCODER_NLI, mock.RuleNli())
    assert v.relation is Relation.ENTAILED and v.score == 0.7 and v.chunk_id == "k0"


def test_encoder_uses_chunk_as_premise():
    seen = {}

    class Spy(mock.RuleNli):
        def nli_raw(self, premise, hypothesis):
            seen.update(premise=premise, hypothesis=hypothesis)
            return super().nli_raw(premise, hypothesis)

    relate_pair(claim("C."), chunk("D."), "q", Method.ENCODER_NLI, Spy())
    assert seen == {"premise": "D.", "hypothesis": "C."}


def test_prompt_route_retry_then_fail():
    replies = []
    chat = mock.CallableChat(lambda req: replies.append(req.attempt) or "unsure")
    with pytest.raises(UnparseableVerdict):
        relate_pair(claim("c"), chunk("d"), "q", Method.PROMPT_LLM, chat)
    assert replies == [0, 1]


def test_rule_chat_prompt_route_agrees_with_encoder():
    c, k = claim("Heat pumps save money."), chunk("Heat pumps save money in winter.")
    assert relate_pair(c, k, "q", Method.PROMPT_LLM, mock.RuleChat()).relation is \
        relate_pair(c, k, "q", Method.ENCODER_NLI, mock.RuleNli()).relation


def test_pair_verdict_cannot_be_missing():
    with pytest.raises(InvalidInput):
        pv(Relation.MISSING)


@pytest.mark.parametrize("relations, verdict", [
    ([], Relation.MISSING),
    ([Relation.ENTAILED] + [Relation.NO_RELATION] * 4, Relation.ENTAILED),
    ([Relation.CONTRADICTED] + [Relation.NO_RELATION] * 4, Relation.CONTRADICTED),
    ([Relation.CONTRADICTED, Relation.ENTAILED], Relation.ENTAILED),
    ([Relation.NO_RELATION] * 3, Relation.NO_RELATION),
])
def test_aggregate_claim(relations, verdict):
    verdicts = [pv(r, k=f"k{i}") for i, r in enumerate(relations)]
    result = aggregate_claim("c", verdicts)
    assert result.verdict is verdict
    assert result.supporting_chunk_ids == tuple(sorted(v.chunk_id for v in verdicts if v.relation is Relation.ENTAILED))
    assert ClaimAttribution.from_dict(result.to_dict()) == result


def test_aggregate_rejects_foreign_verdicts():
    with pytest.raises(MixedClaimIds):
        aggregate_claim("c", [pv(Relation.ENTAILED, cid="other")])


def test_distribution_examples():
    d = relation_distribution([pv(Relation.ENTAILED)] * 4 + [pv(Relation.NO_RELATION)] * 6)
    assert d.granularity is Granularity.PAIR
    assert d.share(Relation.ENTAILED) == 0.4 and d.share(Relation.NO_RELATION) == 0.6
    assert sum(d.shares.values()) == pytest.approx(1.0, abs=1e-9)
    single = relation_distribution([aggregate_claim("c", [])])
    assert single.granularity is Granularity.CLAIM and single.share(Relation.MISSING) == 1.0
    with pytest.raises(EmptyInput):
        relation_distribution([])
    with pytest.raises(InvalidInput):
        relation_distribution([pv(Relation.ENTAILED), aggregate_claim("c", [])])


def test_distribution_row_schema():
    # 1000 pairs in the shape of a reported row: 5.6 / 42.2 / 52.2
    d = RelationDistribution(Granularity.PAIR, {Relation.CONTRADICTED: 56, Relation.ENTAILED: 422,
                                                Relation.NO_RELATION: 522})
    assert [round(100 * d.share(r), 1) for r in (Relation.CONTRADICTED, Relation.ENTAILED, Relation.NO_RELATION)] \
        == [5.6, 42.2, 52.2]
    assert RelationDistribution.from_dict(d.to_dict()) == d


@given(st.lists(st.sampled_from([Relation.ENTAILED, Relation.CONTRADICTED, Relation.NO_RELATION]), min_size=1))
def test_shares_sum_to_one(relations):
    d = relation_distribution([pv(r) for r in relations])
    assert abs(sum(d.shares.values()) - 1.0) <= 1e-9


@pytest.mark.parametrize("before, after, pp", [(0.699, 0.537, 16.2), (0.5, 0.25, 25.0), (0.4, 0.4, 0.0)])
def test_no_relation_reduction_shares(before, after, pp):
    assert no_relation_reduction(before, after) == pp


def test_no_relation_reduction_distributions():
    before = RelationDistribution(Granularity.PAIR, {Relation.NO_RELATION: 699, Relation.ENTAILED: 301})
    after = RelationDistribution(Granularity.PAIR, {Relation.NO_RELATION: 537, Relation.ENTAILED: 463})
    assert no_relation_reduction(before, after) == 16.2
    assert no_relation_reduction(before, before) == 0.0
    claim_level = RelationDistribution(Granularity.CLAIM, {Relation.NO_RELATION: 1})
    with pytest.raises(GranularityMismatch):
        no_relation_reduction(before, claim_level)
    with pytest.raises(GranularityMismatch):
        no_relation_reduction(before, 0.5)
