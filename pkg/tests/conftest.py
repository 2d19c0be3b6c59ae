from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from attributor.backends import mock
from attributor.backends.base import Backends
from attributor.core import Claim, ClaimOrigin, RelevanceClass

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def load_sites(name: str = "sites.json") -> dict:
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))


def rule_backends(sites: str = "sites.json", enrich: str = "antecedent") -> Backends:
    doc = load_sites(sites)
    return Backends(
        chat=mock.RuleChat(enrich=enrich),
        embedder=mock.HashingEmbedder(256),
        nli=mock.RuleNli(),
        search=mock.CorpusSearch(doc["pages"]),
        fetcher=mock.CorpusFetcher(doc["pages"], doc.get("failures"), doc.get("content_types")),
    )


def factual(text: str, cid: str = "r1/f1", record_id: str = "r1") -> Claim:
    return Claim(id=cid, record_id=record_id, text=text, origin=ClaimOrigin.PROMPT_FACTSCORE,
                 relevance=RelevanceClass.FACTUAL_CLAIM)


@pytest.fixture
def fixture_dir(tmp_path) -> Path:
    """A private copy of the fixture directory so runs can write next to it."""
    dest = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, dest)
    return dest


# acceptance verdicts, echoed after the run so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
