"""Acceptance criteria. Each test prints one PASS/FAIL line and then asserts it."""

import json
import os
import random
import time

import pytest
from click.testing import CliRunner

from attributor import prompts
from attributor.attribution import no_relation_reduction
from attributor.cli import main
from attributor.core import EvidenceChunk, Relation, compute_prf
from attributor.pipeline import RunReport, config_from_dict, load_config, render_markdown, run_phr
from attributor.retrieval import build_index, chunk_fixed, chunk_recursive, query_index
from conftest import ACCEPTANCE_LINES, GOLDEN


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------------


def test_1_replay_is_byte_identical(fixture_dir, tmp_path):
    runner = CliRunner()
    cfg = str(fixture_dir / "config.toml")
    started = time.perf_counter()
    outputs = []
    for name in ("first", "second"):
        res = runner.invoke(main, ["run", "--config", cfg, "--replay", "--out", str(tmp_path / name)])
        assert res.exit_code == 0, res.output
        outputs.append((tmp_path / name / "report.json").read_bytes())
    elapsed = time.perf_counter() - started
    records = len(json.loads(outputs[0])["records"])
    ok = outputs[0] == outputs[1] and elapsed < 10 and records == 5
    verdict(1, ok, f"{records} records, identical={outputs[0] == outputs[1]}, {elapsed:.2f}s (< 10s)")


# 2 ---------------------------------------------------------------------------------


class TableEmbedder:
    """Looks query vectors up by their text."""

    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return [self.table[t] for t in texts]


def _unit(rng, dim):
    v = [rng.gauss(0, 1) for _ in range(dim)]
    n = sum(x * x for x in v) ** 0.5
    return tuple(x / n for x in v)


def test_2_index_matches_brute_force():
    rng = random.Random(2)
    dim = 32
    chunks = [EvidenceChunk(f"c{i:03d}", "https://x.example", i, "t", 512, _unit(rng, dim)) for i in range(200)]
    queries = {f"q{i}": _unit(rng, dim) for i in range(20)}
    embedder = TableEmbedder(queries)
    started = time.perf_counter()
    index = build_index(chunks)
    mismatches = 0
    for text, q in queries.items():
        got = [h.chunk.id for h in query_index(index, text, 5, embedder)]
        scored = sorted(range(len(chunks)), key=lambda i: (-sum(a * b for a, b in zip(chunks[i].embedding, q)), i))
        mismatches += got != [chunks[i].id for i in scored[:5]]
    elapsed = time.perf_counter() - started
    verdict(2, mismatches == 0 and elapsed < 1, f"{mismatches}/20 top-5 mismatches, {elapsed:.3f}s (< 1s)")


# 3 ---------------------------------------------------------------------------------


def _random_text(rng):
    n = rng.randint(0, 5000)
    pools = [" ", "\n", "\n\n", ". ", "a", "Z", "é", "ß", "中", "😀", "​", "\t"]
    out = []
    while len(out) < n:
        if rng.random() < 0.3:
            out.append(rng.choice(pools))
        else:
            cp = rng.randint(0x20, 0x2FFF)
            out.append(chr(cp))
    return "".join(out)[:n]


def test_3_chunker_losslessness():
    rng = random.Random(3)
    bad_fixed = bad_recursive = 0
    for _ in range(1000):
        text = _random_text(rng)
        window = rng.choice([16, 64, 128, 512])
        fixed = chunk_fixed(text, window)
        if "".join(fixed) != text or any(len(c) > window for c in fixed):
            bad_fixed += 1
        overlap = rng.randint(0, window // 2)
        if any(len(c) > window for c in chunk_recursive(text, window, overlap)):
            bad_recursive += 1
    ok = bad_fixed == 0 and bad_recursive == 0
    verdict(3, ok, f"1000 strings, fixed failures={bad_fixed}, recursive oversize={bad_recursive}")


# 4 ---------------------------------------------------------------------------------


def test_4_metric_arithmetic():
    # 888 true positives, 37 false positives, 312 false negatives: P = 0.96, R = 0.74
    gold = [True] * 888 + [False] * 37 + [True] * 312
    pred = [True] * 888 + [True] * 37 + [False] * 312
    r = compute_prf(gold, pred)
    reduction = no_relation_reduction(0.699, 0.537)
    ok = abs(r.f1 - 0.8358) <= 0.005 and round(r.f1, 2) == 0.84 and reduction == 16.2
    verdict(4, ok, f"P={r.precision:.4f} R={r.recall:.4f} F1={r.f1:.4f} (0.8358 +- 0.005), reduction={reduction} pp")


# 5 ---------------------------------------------------------------------------------


def test_5_prompt_fidelity():
    from test_prompts import SUFFIX, VALUES

    diffs = []
    for name in sorted(prompts.SLOTS):
        values = {k: VALUES[k] for k in prompts.SLOTS[name]}
        expected = (GOLDEN / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n") + SUFFIX[name]
        for slot, value in values.items():
            expected = expected.replace("{" + slot + "}", value)
        if prompts.render(name, **values) != expected:
            diffs.append(name)
    ok = not diffs and len(prompts.SLOTS) >= 5
    verdict(5, ok, f"{len(prompts.SLOTS)} templates, golden diffs: {diffs or 'none'}")


# 6 ---------------------------------------------------------------------------------


def test_6_distribution_sanity(fixture_dir):
    reports = [run_phr(load_config(fixture_dir / "config.toml"))]
    # a variant where half the pages are gone, so some claims end with no chunks
    sites = json.loads((fixture_dir / "pronoun_sites.json").read_text(encoding="utf-8"))
    sites["failures"] = {url: 404 for url in sorted(sites["pages"])[::2]}
    (fixture_dir / "partial.json").write_text(json.dumps(sites), encoding="utf-8")
    reports.append(run_phr(config_from_dict({
        "corpus": "pronoun_corpus.jsonl", "cache": {"mode": "live"}, "retrieval": {"hits_per_claim": 1},
        "backends": {"chat": {"kind": "rule"}, "embed": {"kind": "hashing"}, "nli": {"kind": "rule"},
                     "search": {"kind": "corpus", "sites": "pronoun_sites.json"},
                     "fetch": {"kind": "corpus", "sites": "partial.json"}},
    }, fixture_dir)))
    worst = 0.0
    dists = 0
    iff_broken = 0
    missing = 0
    for report in reports:
        for group in report.relations.values():
            for dist in group.values():
                if dist.total:
                    dists += 1
                    worst = max(worst, abs(sum(dist.shares.values()) - 1))
        for a in report.attributions:
            is_missing = a.verdict is Relation.MISSING
            missing += is_missing
            iff_broken += is_missing != (len(report.evidence[a.claim_id]) == 0)
    ok = worst <= 1e-9 and iff_broken == 0 and missing > 0
    verdict(6, ok, f"{dists} distributions, max |sum-1|={worst:.1e}, {missing} missing claims, iff violations={iff_broken}")


# 7 ---------------------------------------------------------------------------------


def test_7_enrichment_direction(fixture_dir):
    def share(enrichment):
        cfg = config_from_dict({
            "corpus": "pronoun_corpus.jsonl", "enrichment": enrichment, "cache": {"mode": "live"},
            "backends": {"chat": {"kind": "rule", "enrich": "antecedent"}, "embed": {"kind": "hashing"},
                         "nli": {"kind": "rule"}, "search": {"kind": "corpus", "sites": "pronoun_sites.json"},
                         "fetch": {"kind": "corpus", "sites": "pronoun_sites.json"}},
        }, fixture_dir)
        return run_phr(cfg).relations["all"]["claim"].share(Relation.NO_RELATION)

    off, on = share(False), share(True)
    verdict(7, on < off, f"claim-level no_relation share: {off:.3f} without enrichment, {on:.3f} with it")


# 8 ---------------------------------------------------------------------------------


def test_8_table_schemas(fixture_dir):
    text = render_markdown(RunReport.from_json(run_phr(load_config(fixture_dir / "config.toml")).to_json()))
    table1 = "| Segmentation System | Number of c | Unique #c | avg. len(c) | c / Sentence |"
    table3 = "| Segmentation System | Unique #c | # factual | # not a claim | # opinion | # other |"
    ok = table1 in text and table3 in text
    verdict(8, ok, f"segmentation header present={table1 in text}, relevance header present={table3 in text}")


# 9 ---------------------------------------------------------------------------------

LIVE_ENV = ("ATTRIBUTOR_CHAT_URL", "ATTRIBUTOR_CHAT_KEY", "ATTRIBUTOR_CHAT_MODEL", "ATTRIBUTOR_EMBED_URL",
            "ATTRIBUTOR_NLI_URL", "ATTRIBUTOR_SEARCH_KEY", "ATTRIBUTOR_SEARCH_CX")

LIVE_RECORDS = [
    {"id": "e1", "question": "What is the boiling point of water at sea level?",
     "answer": "Water boils at 100 degrees Celsius at sea level. The boiling point drops at higher altitudes."},
    {"id": "e2", "question": "Who wrote Pride and Prejudice?",
     "answer": "Pride and Prejudice was written by Jane Austen. It was published in 1813."},
    {"id": "e3", "question": "How tall is the Eiffel Tower?",
     "answer": "The Eiffel Tower is about 330 metres tall. It is located in Paris."},
]


@pytest.mark.live
def test_9_live_smoke(tmp_path):
    missing = [name for name in LIVE_ENV if not os.environ.get(name)]
    if missing:
        ACCEPTANCE_LINES.append("SKIP criterion 9: live endpoints not configured (manual check)")
        pytest.skip(f"live endpoints not configured: {', '.join(missing)}")
    corpus = tmp_path / "live.jsonl"
    corpus.write_text("".join(json.dumps(r) + "\n" for r in LIVE_RECORDS), encoding="utf-8")
    config = tmp_path / "live.json"
    config.write_text(json.dumps({
        "corpus": str(corpus), "cache": {"mode": "record", "root": str(tmp_path / "cache")},
        "backends": {"chat": {"kind": "openai", "model": os.environ["ATTRIBUTOR_CHAT_MODEL"]},
                     "embed": {"kind": "http"}, "nli": {"kind": "http"}, "search": {"kind": "google"},
                     "fetch": {"kind": "http"}},
    }), encoding="utf-8")
    out = tmp_path / "run"
    res = CliRunner().invoke(main, ["run", "--config", str(config), "--record", "--out", str(out)])
    assert res.exit_code == 0, res.output
    report = RunReport.load(out)
    artifacts = ["report.json", "claims.jsonl", "enrichment.jsonl", "evidence.jsonl", "attribution.jsonl"]
    present = all((out / name).exists() for name in artifacts)
    evidence = sum(len(v) for v in report.evidence.values())
    entailed = sum(a.verdict is Relation.ENTAILED for a in report.attributions)
    ok = present and evidence > 0 and entailed >= 1
    verdict(9, ok, f"artifacts present={present}, {evidence} evidence chunks, {entailed} entailed claims")
