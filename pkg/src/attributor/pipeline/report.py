"""Run reports: the canonical JSON document, run comparison, and table rendering."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from attributor.attribution import ClaimAttribution, Granularity, RelationDistribution, no_relation_reduction
from attributor.claim_analysis import EnrichmentEffect
from attributor.core import Claim, Relation, RelevanceClass, StageError
from attributor.errors import CorpusMismatch
from attributor.segmentation import SegStats

REPORT_VERSION = 1

RELEVANCE_ORDER = (RelevanceClass.FACTUAL_CLAIM, RelevanceClass.NOT_A_CLAIM, RelevanceClass.OPINION,
                   RelevanceClass.OTHER)

GROUP_LABELS = {
    "all": "All claims",
    "original_independent": "Original Independent",
    "original_not_independent": "Original Non-Ind.",
    "enriched_independent": "Enriched Independent",
    "enriched_not_independent": "Enriched Non-Ind.",
}


@dataclass
class RunReport:
    run_id: str
    config: dict[str, Any]
    corpus: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)
    claims: list[Claim] = field(default_factory=list)
    evidence: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    attributions: list[ClaimAttribution] = field(default_factory=list)
    seg_stats: dict[str, SegStats] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    relevance: dict[str, int] = field(default_factory=dict)
    enrichment: list[dict[str, Any]] = field(default_factory=list)
    enrichment_effect: EnrichmentEffect | None = None
    relations: dict[str, dict[str, RelationDistribution]] = field(default_factory=dict)
    errors: list[StageError] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": REPORT_VERSION,
            "run_id": self.run_id,
            "config": self.config,
            "corpus": self.corpus,
            "records": self.records,
            "claims": [c.to_dict() for c in self.claims],
            "evidence": self.evidence,
            "attributions": [a.to_dict() for a in self.attributions],
            "seg_stats": {k: v.to_dict() for k, v in self.seg_stats.items()},
            "counts": self.counts,
            "relevance": self.relevance,
            "enrichment": self.enrichment,
            "enrichment_effect": self.enrichment_effect.to_dict() if self.enrichment_effect else None,
            "relations": {g: {gran: d.to_dict() for gran, d in v.items()} for g, v in self.relations.items()},
            "errors": [e.to_dict() for e in self.errors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunReport:
        eff = d.get("enrichment_effect")
        return cls(
            run_id=d["run_id"],
            config=d["config"],
            corpus=d["corpus"],
            records=d["records"],
            claims=[Claim.from_dict(c) for c in d["claims"]],
            evidence=d["evidence"],
            attributions=[ClaimAttribution.from_dict(a) for a in d["attributions"]],
            seg_stats={k: SegStats(**v) for k, v in d["seg_stats"].items()},
            counts=d["counts"],
            relevance=d["relevance"],
            enrichment=d["enrichment"],
            enrichment_effect=EnrichmentEffect(**eff) if eff else None,
            relations={g: {gran: RelationDistribution.from_dict(x) for gran, x in v.items()}
                       for g, v in d["relations"].items()},
            errors=[StageError(**e) for e in d["errors"]],
        )

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | os.PathLike) -> RunReport:
        path = Path(path)
        if path.is_dir():
            path = path / "report.json"
        return cls.from_json(path.read_text(encoding="utf-8"))

    def claim_ids(self) -> set[str]:
        return {c.id for c in self.claims}


# -- comparison ---------------------------------------------------------------


def _delta_map(a: dict[str, float], b: dict[str, float]) -> dict[str, dict[str, float]]:
    keys = sorted(set(a) | set(b))
    return {k: {"a": a.get(k, 0), "b": b.get(k, 0), "delta": b.get(k, 0) - a.get(k, 0)} for k in keys}


def compare_runs(a: RunReport, b: RunReport) -> dict[str, Any]:
    """Side-by-side tables of two runs over the same corpus; deltas are b - a.

    ``no_relation_reduction_pp`` is positive when run b has fewer unrelated
    claim/evidence pairs than run a.
    """
    if a.corpus.get("sha256") != b.corpus.get("sha256"):
        raise CorpusMismatch("runs were made on different corpora")
    seg = {}
    for strategy in sorted(set(a.seg_stats) | set(b.seg_stats)):
        sa = a.seg_stats.get(strategy)
        sb = b.seg_stats.get(strategy)
        seg[strategy] = _delta_map(sa.to_dict() if sa else {}, sb.to_dict() if sb else {})
    relations: dict[str, Any] = {}
    for group in sorted(set(a.relations) | set(b.relations)):
        for gran in (Granularity.PAIR.value, Granularity.CLAIM.value):
            da = a.relations.get(group, {}).get(gran)
            db = b.relations.get(group, {}).get(gran)
            if da is None or db is None:
                continue
            shares_a = {r.value: s for r, s in da.shares.items()}
            shares_b = {r.value: s for r, s in db.shares.items()}
            entry: dict[str, Any] = {"shares": _delta_map(shares_a, shares_b)}
            if da.total and db.total:
                entry["no_relation_reduction_pp"] = no_relation_reduction(da, db)
            relations.setdefault(group, {})[gran] = entry
    return {
        "a": a.run_id,
        "b": b.run_id,
        "corpus_sha256": a.corpus.get("sha256"),
        "seg_stats": seg,
        "counts": _delta_map(a.counts, b.counts),
        "relevance": _delta_map(a.relevance, b.relevance),
        "relations": relations,
    }


# -- rendering ----------------------------------------------------------------

SEG_HEADER = ("Segmentation System", "Number of c", "Unique #c", "avg. len(c)", "c / Sentence")
RELEVANCE_HEADER = ("Segmentation System", "Unique #c", "# factual", "# not a claim", "# opinion", "# other")
PAIR_HEADER = ("Model", "Contr.", "Entail.", "No Rel.")
CLAIM_HEADER = ("Model", "Contradiction", "Entailment", "Missing", "No Relation")


def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def report_tables(report: RunReport) -> dict[str, tuple[tuple[str, ...], list[tuple[str, ...]]]]:
    """Table name -> (header, rows). Rows are omitted for empty sections."""
    seg_rows = [
        (name, str(s.total_claims), str(s.unique_claims), f"{s.avg_len_chars:.1f}", f"{s.claims_per_sentence:.2f}")
        for name, s in sorted(report.seg_stats.items())
        if report.records
    ]
    strategy = report.config.get("segmentation", "")
    rel_rows = []
    if report.relevance.get("unique"):
        rel_rows.append((strategy, str(report.relevance["unique"]),
                         *(str(report.relevance.get(c.label, 0)) for c in RELEVANCE_ORDER)))
    pair_rows, claim_rows = [], []
    for group, label in GROUP_LABELS.items():
        dists = report.relations.get(group, {})
        pair = dists.get(Granularity.PAIR.value)
        if pair is not None and pair.total:
            s = pair.shares
            pair_rows.append((label, _pct(s[Relation.CONTRADICTED]), _pct(s[Relation.ENTAILED]),
                              _pct(s[Relation.NO_RELATION])))
        claim = dists.get(Granularity.CLAIM.value)
        if claim is not None and claim.total:
            s = claim.shares
            claim_rows.append((label, _pct(s[Relation.CONTRADICTED]), _pct(s[Relation.ENTAILED]),
                               _pct(s[Relation.MISSING]), _pct(s[Relation.NO_RELATION])))
    return {
        "segmentation": (SEG_HEADER, seg_rows),
        "relevance": (RELEVANCE_HEADER, rel_rows),
        "relations_pair": (PAIR_HEADER, pair_rows),
        "relations_claim": (CLAIM_HEADER, claim_rows),
    }


TABLE_TITLES = {
    "segmentation": "Answer segmentation",
    "relevance": "Claim relevance distribution",
    "relations_pair": "Claim/evidence relations (pairs)",
    "relations_claim": "Claim-level attribution",
}


def _md_table(header: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def render_markdown(report: RunReport) -> str:
    parts = [f"# Attribution run {report.run_id}", ""]
    for name, (header, rows) in report_tables(report).items():
        parts += [f"## {TABLE_TITLES[name]}", "", _md_table(header, rows), ""]
    if report.enrichment_effect:
        e = report.enrichment_effect
        parts += ["## Enrichment", "",
                  f"{e.resolved}/{e.total} enriched claims became independent ({_pct(e.rate)}); "
                  f"mean length {e.mean_before_len:.1f} -> {e.mean_after_len:.1f} characters.", ""]
    parts += [f"Errors logged: {len(report.errors)}", ""]
    return "\n".join(parts)


def render_report(report: RunReport, fmt: str, out_dir: str | os.PathLike) -> list[Path]:
    """Write the report as ``json`` (lossless), ``csv`` (one file per table) or ``markdown``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = {"md": "markdown"}.get(fmt, fmt)
    if fmt == "json":
        path = out / "report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        return [path]
    if fmt == "markdown":
        path = out / "report.md"
        path.write_text(render_markdown(report), encoding="utf-8")
        return [path]
    if fmt == "csv":
        paths = []
        for name, (header, rows) in report_tables(report).items():
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
            path = out / f"{name}.csv"
            path.write_text(buf.getvalue(), encoding="utf-8")
            paths.append(path)
        return paths
    raise ValueError(f"unknown report format {fmt!r}")

