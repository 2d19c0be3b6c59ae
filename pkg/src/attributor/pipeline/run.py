"""End-to-end post-hoc attribution run, split into restartable stages.

segment -> dedup -> check-worthiness -> (independence + enrichment) -> retrieve -> relate -> aggregate

Each stage reads and writes a :class:`RunState`; ``write_artifacts`` and
``read_artifacts`` persist it as the line-delimited files in a run directory
so later stages can be re-run without repeating expensive earlier ones.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from attributor.attribution import (
    ClaimAttribution,
    Granularity,
    Method,
    PairVerdict,
    RelationDistribution,
    aggregate_claim,
    relate_pair,
    relation_distribution,
)
from attributor.backends.base import Backends, canonical_json
from attributor.claim_analysis import (
    EnrichmentOutcome,
    classify_checkworthiness,
    detect_independence,
    enrich_claim,
    enrichment_effect,
)
from attributor.concurrency import ordered_map
from attributor.core import Claim, ClaimOrigin, EvidenceChunk, Independence, QARecord, RelevanceClass, StageError
from attributor.errors import AttributorError, BackendError, ConfigError, ReplyFormatError
from attributor.pipeline.config import RunConfig, build_backends
from attributor.pipeline.corpus import corpus_digest, load_corpus
from attributor.pipeline.report import RELEVANCE_ORDER, RunReport
from attributor.retrieval.index import ScoredChunk
from attributor.retrieval.retrieve import retrieve_for_question
from attributor.segmentation import corpus_segmentation_stats, segment, split_sentences

logger = logging.getLogger(__name__)

STAGES = ("segment", "classify", "retrieve", "relate")


@dataclass
class RunState:
    records: list[QARecord]
    corpus_sha256: str = ""
    corpus_size: int = 0
    claims: dict[str, list[Claim]] = field(default_factory=dict)
    duplicate_of: dict[str, str] = field(default_factory=dict)
    enriched: dict[str, list[Claim]] = field(default_factory=dict)
    enrichment: list[EnrichmentOutcome] = field(default_factory=list)
    attributed: dict[str, list[str]] = field(default_factory=dict)
    evidence: dict[str, list[ScoredChunk]] = field(default_factory=dict)
    pairs: dict[str, list[PairVerdict]] = field(default_factory=dict)
    errors: list[StageError] = field(default_factory=list)
    done: list[str] = field(default_factory=list)

    def claim_index(self) -> dict[str, Claim]:
        out = {}
        for rid in self.claims:
            for c in self.claims[rid] + self.enriched.get(rid, []):
                out[c.id] = c
        return out

    def unique_claims(self, record_id: str) -> list[Claim]:
        return [c for c in self.claims.get(record_id, []) if c.id not in self.duplicate_of]


def sample_records(records: list[QARecord], max_records: int | None, seed: int) -> list[QARecord]:
    if max_records is None or max_records >= len(records):
        return list(records)
    keep = sorted(random.Random(f"records:{seed}").sample(range(len(records)), max_records))
    return [records[i] for i in keep]


def init_state(config: RunConfig) -> RunState:
    if config.setting == "rtr":
        raise ConfigError("the retrieve-then-read setting is not implemented; only post-hoc retrieval (phr) is")
    corpus = load_corpus(config.corpus)
    return RunState(
        records=sample_records(corpus, config.max_records, config.seed),
        corpus_sha256=corpus_digest(corpus),
        corpus_size=len(corpus),
    )


# -- stages -------------------------------------------------------------------


def stage_segment(state: RunState, config: RunConfig, backends: Backends) -> None:
    if config.segmentation is not ClaimOrigin.SENTENCE and backends.chat is None:
        raise ConfigError(f"segmentation {config.segmentation.value} needs a chat backend")
    results = ordered_map(lambda r: segment(r, config.segmentation, backends.chat), state.records, config.workers)
    for record, res in zip(state.records, results):
        state.claims[record.id] = res.claims
        state.errors.extend(res.errors)
        first: dict[str, str] = {}
        for c in res.claims:
            if c.fingerprint in first:
                state.duplicate_of[c.id] = first[c.fingerprint]
            else:
                first[c.fingerprint] = c.id
    state.done.append("segment")


def _classify(claim: Claim, backends: Backends) -> tuple[Claim, list[StageError]]:
    errors: list[StageError] = []
    try:
        label = classify_checkworthiness(claim, backends.chat, errors)
    except BackendError as exc:
        errors.append(StageError.from_exc("classify", claim.record_id, claim.id, exc))
        label = RelevanceClass.OTHER
    return claim.with_labels(relevance=label), errors


def _independence_and_enrichment(claim: Claim, question: str, answer: str, backends: Backends):
    errors: list[StageError] = []
    try:
        labelled = claim.with_labels(independence=detect_independence(claim, backends.chat))
    except (BackendError, ReplyFormatError) as exc:
        errors.append(StageError.from_exc("independence", claim.record_id, claim.id, exc))
        return claim, None, errors
    if labelled.independence is Independence.INDEPENDENT:
        return labelled, None, errors
    try:
        outcome = enrich_claim(question, answer, labelled, backends.chat)
    except (BackendError, ReplyFormatError) as exc:
        errors.append(StageError.from_exc("enrich", claim.record_id, claim.id, exc))
        return labelled, None, errors
    return labelled, outcome, errors


def stage_classify(state: RunState, config: RunConfig, backends: Backends) -> None:
    """Check-worthiness for unique claims, seeded claim sampling, optional enrichment."""
    if backends.chat is None:
        raise ConfigError("classification needs a chat backend")
    todo = [c for r in state.records for c in state.unique_claims(r.id)]
    labelled: dict[str, Claim] = {}
    for claim, errs in ordered_map(lambda c: _classify(c, backends), todo, config.workers):
        labelled[claim.id] = claim
        state.errors.extend(errs)
    for rid in state.claims:
        state.claims[rid] = [labelled.get(c.id, c) for c in state.claims[rid]]

    factual = [c for c in (labelled[x.id] for x in todo) if c.relevance is RelevanceClass.FACTUAL_CLAIM]
    if config.max_claims is not None and config.max_claims < len(factual):
        keep = set(random.Random(f"claims:{config.seed}").sample(range(len(factual)), config.max_claims))
        factual = [c for i, c in enumerate(factual) if i in keep]

    selected: dict[str, list[str]] = {r.id: [] for r in state.records}
    if not config.enrichment:
        for c in factual:
            selected[c.record_id].append(c.id)
    else:
        by_id = {r.id: r for r in state.records}
        results = ordered_map(
            lambda c: _independence_and_enrichment(c, by_id[c.record_id].question, by_id[c.record_id].answer,
                                                   backends),
            factual, config.workers,
        )
        relabelled: dict[str, Claim] = {}
        for labelled_claim, outcome, errs in results:
            state.errors.extend(errs)
            relabelled[labelled_claim.id] = labelled_claim
            if outcome is not None:
                state.enrichment.append(outcome)
                state.enriched.setdefault(labelled_claim.record_id, []).append(outcome.enriched)
                selected[labelled_claim.record_id].append(outcome.enriched_claim_id)
            else:
                selected[labelled_claim.record_id].append(labelled_claim.id)
        for rid in state.claims:
            state.claims[rid] = [relabelled.get(c.id, c) for c in state.claims[rid]]
    state.attributed = selected
    state.done.append("classify")


def stage_retrieve(state: RunState, config: RunConfig, backends: Backends) -> None:
    if backends.search is None or backends.fetcher is None or backends.embedder is None:
        raise ConfigError("retrieval needs search, fetch and embed backends")
    index = state.claim_index()
    jobs = [(r, [index[cid] for cid in state.attributed.get(r.id, [])]) for r in state.records]
    jobs = [(r, claims) for r, claims in jobs if claims]

    def run(job):
        record, claims = job
        try:
            return retrieve_for_question(claims, config.retrieval, backends, record_id=record.id), None
        except (BackendError, AttributorError) as exc:
            return None, StageError.from_exc("retrieve", record.id, record.id, exc)

    searches = failures = 0
    for (record, claims), (ev, err) in zip(jobs, ordered_map(run, jobs, config.workers)):
        if err is not None:
            state.errors.append(err)
            for c in claims:
                state.evidence[c.id] = []
            continue
        searches += ev.searches
        failures += ev.search_failures
        state.errors.extend(ev.errors)
        for c in claims:
            state.evidence[c.id] = ev.results.get(c.id, [])
    if searches and failures == searches:
        raise BackendError(f"search failed for all {searches} claims")
    state.done.append("retrieve")


def stage_relate(state: RunState, config: RunConfig, backends: Backends) -> None:
    method = config.attribution_method
    backend = backends.nli if method is Method.ENCODER_NLI else backends.chat
    if backend is None:
        raise ConfigError(f"attribution method {method.value} needs a {'nli' if method is Method.ENCODER_NLI else 'chat'} backend")
    index = state.claim_index()
    questions = {r.id: r.question for r in state.records}
    claim_ids = [cid for r in state.records for cid in state.attributed.get(r.id, []) if cid in state.evidence]

    def run(cid: str):
        claim = index[cid]
        try:
            return [relate_pair(claim, sc, questions[claim.record_id], method, backend)
                    for sc in state.evidence[cid]], None
        except (BackendError, ReplyFormatError) as exc:
            return None, StageError.from_exc("relate", claim.record_id, cid, exc)

    for cid, (verdicts, err) in zip(claim_ids, ordered_map(run, claim_ids, config.workers)):
        if err is not None:
            state.errors.append(err)
            continue
        state.pairs[cid] = verdicts
    state.done.append("relate")


STAGE_FUNCS = {"segment": stage_segment, "classify": stage_classify, "retrieve": stage_retrieve,
               "relate": stage_relate}


# -- report -------------------------------------------------------------------


def _group(claim: Claim, index: dict[str, Claim]) -> str | None:
    if claim.independence is None:
        return None
    ind = "independent" if claim.independence is Independence.INDEPENDENT else "not_independent"
    return f"{'enriched' if claim.origin is ClaimOrigin.ENRICHED else 'original'}_{ind}"


def _distributions(attributions: list[ClaimAttribution]) -> dict[str, RelationDistribution]:
    pairs = [p for a in attributions for p in a.pair_verdicts]
    return {
        Granularity.PAIR.value: relation_distribution(pairs) if pairs else RelationDistribution(Granularity.PAIR),
        Granularity.CLAIM.value: (relation_distribution(attributions) if attributions
                                  else RelationDistribution(Granularity.CLAIM)),
    }


def _evidence_rows(claim_id: str, chunks: list[ScoredChunk]) -> list[dict[str, Any]]:
    return [
        {"claim_id": claim_id, "chunk_id": sc.chunk.id, "url": sc.chunk.url, "chunk_index": sc.chunk.chunk_index,
         "window": sc.chunk.window_size, "text": sc.chunk.text, "score": sc.score}
        for sc in chunks
    ]


def build_report(state: RunState, config: RunConfig) -> RunReport:
    snapshot = config.snapshot()
    run_id = hashlib.sha256(canonical_json({"config": snapshot, "corpus": state.corpus_sha256}).encode()).hexdigest()[:16]
    index = state.claim_index()

    claims: list[Claim] = []
    records = []
    for r in state.records:
        segmented = state.claims.get(r.id, [])
        claims.extend(segmented)
        claims.extend(state.enriched.get(r.id, []))
        records.append({
            "id": r.id,
            "question": r.question,
            "answer": r.answer,
            "sentences": len(split_sentences(r.answer)),
            "segmented_claim_ids": [c.id for c in segmented],
            "duplicates": {c.id: state.duplicate_of[c.id] for c in segmented if c.id in state.duplicate_of},
            "attributed_claim_ids": list(state.attributed.get(r.id, [])),
        })

    attributions: list[ClaimAttribution] = []
    evidence: dict[str, list[dict[str, Any]]] = {}
    for r in state.records:
        for cid in state.attributed.get(r.id, []):
            if cid not in state.evidence:
                continue
            evidence[cid] = _evidence_rows(cid, state.evidence[cid])
            if not state.evidence[cid]:
                attributions.append(aggregate_claim(cid, []))
            elif cid in state.pairs:
                attributions.append(aggregate_claim(cid, state.pairs[cid]))

    relations = {"all": _distributions(attributions)}
    grouped: dict[str, list[ClaimAttribution]] = {}
    for a in attributions:
        g = _group(index[a.claim_id], index)
        if g is not None:
            grouped.setdefault(g, []).append(a)
    for g in sorted(grouped):
        relations[g] = _distributions(grouped[g])

    unique = [c for r in state.records for c in state.unique_claims(r.id)]
    relevance = {"unique": len(unique)}
    for cls in RELEVANCE_ORDER:
        relevance[cls.label] = sum(1 for c in unique if c.relevance is cls)
    relevance["unlabelled"] = sum(1 for c in unique if c.relevance is None)

    segmented_total = sum(len(v) for v in state.claims.values())
    counts = {
        "records": len(state.records),
        "segmented": segmented_total,
        "unique": len(unique),
        "duplicates": len(state.duplicate_of),
        "factual": relevance[RelevanceClass.FACTUAL_CLAIM.label],
        "enriched": len(state.enrichment),
        "attributed": sum(len(v) for v in state.attributed.values()),
        "with_evidence": sum(1 for v in state.evidence.values() if v),
        "pairs": sum(len(a.pair_verdicts) for a in attributions),
    }
    seg_stats = {}
    if "segment" in state.done:
        seg_stats[config.segmentation.value] = corpus_segmentation_stats(
            (state.claims.get(r.id, []), r.answer) for r in state.records
        )

    stage_order = {s: i for i, s in enumerate(("segment", "classify", "independence", "enrich", "search",
                                                "fetch", "retrieve", "relate"))}
    record_order = {r.id: i for i, r in enumerate(state.records)}
    errors = sorted(set(state.errors), key=lambda e: (record_order.get(e.record_id, -1), stage_order.get(e.stage, 99),
                                                      e.subject, e.kind, e.message))
    return RunReport(
        run_id=run_id,
        config=snapshot,
        corpus={"path": config.corpus, "sha256": state.corpus_sha256, "records_total": state.corpus_size,
                "records_used": len(state.records)},
        records=records,
        claims=claims,
        evidence=evidence,
        attributions=attributions,
        seg_stats=seg_stats,
        counts=counts,
        relevance=relevance,
        enrichment=[o.to_dict() for o in state.enrichment],
        enrichment_effect=enrichment_effect(state.enrichment) if state.enrichment else None,
        relations=relations,
        errors=errors,
    )


# -- artifacts ------------------------------------------------------------------

ARTIFACTS = ("claims.jsonl", "enrichment.jsonl", "evidence.jsonl", "attribution.jsonl", "errors.jsonl")


def _write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict[str, Any]]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def write_artifacts(state: RunState, out_dir: str | os.PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    attributed = {cid for ids in state.attributed.values() for cid in ids}
    claim_rows = []
    for r in state.records:
        for c in state.claims.get(r.id, []) + state.enriched.get(r.id, []):
            row = c.to_dict()
            row["duplicate_of"] = state.duplicate_of.get(c.id)
            row["attributed"] = c.id in attributed
            claim_rows.append(row)
    _write_jsonl(out / "claims.jsonl", claim_rows)
    _write_jsonl(out / "enrichment.jsonl", (o.to_dict() for o in state.enrichment))
    _write_jsonl(out / "evidence.jsonl", (row for r in state.records for cid in state.attributed.get(r.id, [])
                                          if cid in state.evidence
                                          for row in _evidence_rows(cid, state.evidence[cid])))
    # claims with retrieved-but-empty evidence need a marker to survive a reload
    _write_jsonl(out / "attribution.jsonl", (
        {**p.to_dict()} for r in state.records for cid in state.attributed.get(r.id, [])
        for p in state.pairs.get(cid, [])
    ))
    _write_jsonl(out / "errors.jsonl", (e.to_dict() for e in state.errors))
    meta = {"done": state.done, "corpus_sha256": state.corpus_sha256, "corpus_size": state.corpus_size,
            "record_ids": [r.id for r in state.records],
            "retrieved": sorted(cid for cid in state.evidence),
            "related": sorted(state.pairs)}
    (out / "state.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_artifacts(config: RunConfig, out_dir: str | os.PathLike) -> RunState:
    """Rebuild a run state from a run directory written by ``write_artifacts``."""
    out = Path(out_dir)
    meta_path = out / "state.json"
    if not meta_path.exists():
        raise ConfigError(f"{out} holds no run state; run an earlier stage first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    corpus = load_corpus(config.corpus)
    by_id = {r.id: r for r in corpus}
    state = RunState(records=[by_id[rid] for rid in meta["record_ids"]], corpus_sha256=meta["corpus_sha256"],
                     corpus_size=meta["corpus_size"], done=list(meta["done"]))
    for row in _read_jsonl(out / "claims.jsonl"):
        claim = Claim.from_dict(row)
        if claim.origin is ClaimOrigin.ENRICHED:
            state.enriched.setdefault(claim.record_id, []).append(claim)
        else:
            state.claims.setdefault(claim.record_id, []).append(claim)
        if row.get("duplicate_of"):
            state.duplicate_of[claim.id] = row["duplicate_of"]
        if row.get("attributed"):
            state.attributed.setdefault(claim.record_id, []).append(claim.id)
    # attributed ids keep claims.jsonl order, which is segmentation order with enrichments last;
    # restore the original selection order (enriched claim in its parent's slot)
    index = state.claim_index()
    for rid, ids in state.attributed.items():
        order = {c.id: i for i, c in enumerate(state.claims.get(rid, []))}
        state.attributed[rid] = sorted(ids, key=lambda cid: order.get(index[cid].parent_claim_id or cid, 0))
    for rid in [r.id for r in state.records]:
        state.claims.setdefault(rid, [])
    enriched = {c.id: c for cs in state.enriched.values() for c in cs}
    for row in _read_jsonl(out / "enrichment.jsonl"):
        state.enrichment.append(EnrichmentOutcome(
            original_claim_id=row["original_claim_id"], enriched_claim_id=row["enriched_claim_id"],
            resolved=row["resolved"], before_len=row["before_len"], after_len=row["after_len"],
            enriched=enriched[row["enriched_claim_id"]],
        ))
    for cid in meta.get("retrieved", []):
        state.evidence[cid] = []
    for row in _read_jsonl(out / "evidence.jsonl"):
        chunk = EvidenceChunk(id=row["chunk_id"], url=row["url"], chunk_index=row["chunk_index"], text=row["text"],
                              window_size=row["window"])
        state.evidence.setdefault(row["claim_id"], []).append(ScoredChunk(chunk, row["score"]))
    for cid in meta.get("related", []):
        state.pairs[cid] = []
    for row in _read_jsonl(out / "attribution.jsonl"):
        state.pairs.setdefault(row["claim_id"], []).append(PairVerdict.from_dict(row))
    state.errors = [StageError(**e) for e in _read_jsonl(out / "errors.jsonl")]
    return state


def run_stage(stage: str, config: RunConfig, out_dir: str | os.PathLike, backends: Backends | None = None) -> RunState:
    """Run one stage against a run directory, reusing the artifacts of earlier stages."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    backends = backends or build_backends(config)
    position = STAGES.index(stage)
    if position == 0:
        state = init_state(config)
    else:
        state = read_artifacts(config, out_dir)
        missing = [s for s in STAGES[:position] if s not in state.done]
        if missing:
            raise ConfigError(f"stage {stage} needs {', '.join(missing)} to have run first")
        state.done = list(STAGES[:position])
        _reset_after(state, stage)
    STAGE_FUNCS[stage](state, config, backends)
    write_artifacts(state, out_dir)
    return state


def _reset_after(state: RunState, stage: str) -> None:
    """Drop outputs of ``stage`` and everything downstream before re-running it."""
    later = STAGES[STAGES.index(stage):]
    if "classify" in later:
        state.enriched.clear()
        state.enrichment.clear()
        state.attributed.clear()
        state.claims = {rid: [replace(c, relevance=None, independence=None) for c in cs]
                        for rid, cs in state.claims.items()}
    if "retrieve" in later:
        state.evidence.clear()
    if "relate" in later:
        state.pairs.clear()
    # error stages that belong strictly upstream of ``stage``
    allowed = {"segment": set(), "classify": {"segment"}, "retrieve": {"segment", "classify", "independence", "enrich"},
               "relate": {"segment", "classify", "independence", "enrich", "search", "fetch", "retrieve"}}[stage]
    state.errors = [e for e in state.errors if e.stage in allowed]


def run_phr(config: RunConfig, backends: Backends | None = None) -> RunReport:
    """Full post-hoc retrieval attribution over the configured corpus."""
    backends = backends or build_backends(config)
    state = init_state(config)
    for stage in STAGES:
        STAGE_FUNCS[stage](state, config, backends)
    return build_report(state, config)


def run_to_dir(config: RunConfig, out_dir: str | os.PathLike, backends: Backends | None = None) -> RunReport:
    backends = backends or build_backends(config)
    state = init_state(config)
    for stage in STAGES:
        STAGE_FUNCS[stage](state, config, backends)
    report = build_report(state, config)
    write_artifacts(state, out_dir)
    (Path(out_dir) / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report
