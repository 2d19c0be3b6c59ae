import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attributor.backends import mock
from attributor.backends.base import Backends, FetchedPage
from attributor.core import EvidenceChunk
from attributor.errors import (
    ConfigError,
    DimensionMismatch,
    DuplicateId,
    FetchError,
    FetchTimeout,
    HttpError,
    InvalidInput,
    NonHtmlContent,
)
from attributor.retrieval import (
    RetrievalConfig,
    build_index,
    chunk_fixed,
    chunk_recursive,
    extract_text,
    fetch_and_extract,
    query_index,
    retrieve_evidence,
    retrieve_for_question,
)
from attributor.retrieval.extract import page_title
from conftest import factual, rule_backends

# -- extraction -------------------------------------------------------------------


@pytest.mark.parametrize("html, text", [
    ("<p>Hi</p>", "Hi"),
    ("<script>x()</script><p>A</p>", "A"),
    ("<html><head><title>T</title><style>p{}</style></head><body><nav>menu</nav><p>A  b</p><p>C</p></body></html>",
     "A b\nC"),
    ("<p>caf&eacute; &amp; bar</p>", "café & bar"),
    ("<div>one<br>two</div>", "one\ntwo"),
])
def test_extract_text(html, text):
    assert extract_text(html) == text


def test_page_title():
    assert page_title("<title> Heat \n pumps </title><p>x</p>") == "Heat pumps"


def test_extract_byte_cap():
    html = "<p>" + ("é" * 5_000_000) + "</p>"  # 10 MB of UTF-8
    cap = 1_000_000
    text = extract_text(html, max_bytes=cap)
    assert len(text.encode("utf-8")) <= cap
    assert len(text) == cap // 2


class _OnePage:
    def __init__(self, page):
        self.page = page

    def fetch(self, url):
        return self.page


@pytest.mark.parametrize("page, error", [
    (FetchedPage("https://x.example", timed_out=True), FetchTimeout),
    (FetchedPage("https://x.example", status=500), HttpError),
    (FetchedPage("https://x.example", status=200, content_type="application/pdf", body="%PDF"), NonHtmlContent),
    (FetchedPage("https://x.example", error="too many redirects"), FetchError),
])
def test_fetch_and_extract_failures(page, error):
    with pytest.raises(error):
        fetch_and_extract("https://x.example", _OnePage(page))


def test_fetch_and_extract_ok():
    page = FetchedPage("https://x.example", 200, "text/html; charset=utf-8", "<p>Hello</p>")
    assert fetch_and_extract("https://x.example", _OnePage(page)) == "Hello"


# -- chunking ---------------------------------------------------------------------


def test_chunk_fixed_examples():
    assert [len(c) for c in chunk_fixed("x" * 1000, 512)] == [512, 488]
    assert chunk_fixed("x" * 100, 512) == ["x" * 100]
    assert chunk_fixed("", 512) == []
    with pytest.raises(ValueError):
        chunk_fixed("x", 0)


def test_chunk_recursive_examples():
    assert chunk_recursive("short text", 512) == ["short text"]
    p1, p2 = "a" * 299 + ".", "b" * 299 + "."
    assert chunk_recursive(p1 + "\n\n" + p2, 512, overlap_chars=64) == [p1, p2]


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=3000), st.integers(min_value=1, max_value=700))
def test_chunk_fixed_lossless(text, window):
    chunks = chunk_fixed(text, window)
    assert "".join(chunks) == text
    assert all(0 < len(c) <= window for c in chunks)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=3000),
       st.integers(min_value=2, max_value=700), st.data())
def test_chunk_recursive_bounded(text, window, data):
    overlap = data.draw(st.integers(min_value=0, max_value=window - 1))
    chunks = chunk_recursive(text, window, overlap)
    assert all(0 < len(c) <= window for c in chunks)
    # nothing but whitespace goes missing
    assert set("".join(text.split())) <= set("".join(chunks))


# -- vector index ---------------------------------------------------------------


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return tuple(float(x) for x in v / np.linalg.norm(v))


def _chunk(i, vec, text="t"):
    return EvidenceChunk(f"c{i}", "https://x.example", i, text, 512, _unit(vec))


class _FixedEmbedder:
    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return [self.table[t] for t in texts]


def test_empty_index():
    index = build_index([])
    assert len(index) == 0 and index.empty
    assert query_index(index, "anything", 5, _FixedEmbedder({})) == []


def test_index_errors():
    a = _chunk(0, [1, 0])
    with pytest.raises(DuplicateId):
        build_index([a, a])
    with pytest.raises(DimensionMismatch):
        build_index([a, _chunk(1, [1, 0, 0])])
    with pytest.raises(DimensionMismatch):
        build_index([a]).search([1, 0, 0], 1)
    with pytest.raises(InvalidInput):
        build_index([a]).search([1, 0], 0)


def test_self_similarity_and_small_index():
    chunks = [_chunk(i, v) for i, v in enumerate([[1, 0, 0], [0, 1, 0], [1, 1, 0]])]
    index = build_index(chunks)
    assert len(index) == 3
    hits = query_index(index, "q", 5, _FixedEmbedder({"q": chunks[1].embedding}))
    assert len(hits) == 3
    assert hits[0].chunk.id == "c1" and hits[0].score == pytest.approx(1.0, abs=1e-6)


def test_ties_keep_insertion_order():
    chunks = [_chunk(i, [1, 1]) for i in range(5)]
    hits = build_index(chunks).search(_unit([1, 1]), 3)
    assert [h.chunk.id for h in hits] == ["c0", "c1", "c2"]


def brute_force(chunks, q, k):
    scored = [(sum(a * b for a, b in zip(c.embedding, q)), i) for i, c in enumerate(chunks)]
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [chunks[i].id for _, i in scored[:k]]


def test_index_matches_brute_force():
    rng = random.Random(11)
    chunks = [_chunk(i, [rng.gauss(0, 1) for _ in range(16)]) for i in range(200)]
    # exact duplicates force ties
    chunks += [EvidenceChunk(f"dup{i}", "https://x.example", 0, "t", 512, chunks[i].embedding) for i in range(10)]
    index = build_index(chunks)
    for _ in range(20):
        q = _unit([rng.gauss(0, 1) for _ in range(16)])
        assert [h.chunk.id for h in index.search(q, 5)] == brute_force(chunks, q, 5)
    for i in range(10):
        assert [h.chunk.id for h in index.search(chunks[i].embedding, 2)] == [f"c{i}", f"dup{i}"]


# -- retrieval --------------------------------------------------------------------


def test_retrieval_config_validation():
    with pytest.raises(ConfigError):
        RetrievalConfig(window_chars=0)
    with pytest.raises(ConfigError):
        RetrievalConfig(window_chars=64, overlap_chars=64)
    with pytest.raises(ConfigError):
        RetrievalConfig(splitter="sentences")
    with pytest.raises(ConfigError):
        RetrievalConfig.from_dict({"top_n": 3})
    cfg = RetrievalConfig(splitter="recursive")
    assert RetrievalConfig.from_dict(cfg.to_dict()) == cfg


def test_all_fetches_fail():
    urls = [f"https://down{i}.example/page" for i in range(3)]
    pages = {u: "<p>heat pumps reduce bills</p>" for u in urls}
    backends = Backends(
        embedder=mock.HashingEmbedder(),
        search=mock.CorpusSearch(pages),
        fetcher=mock.CorpusFetcher(pages, {urls[0]: "timeout", urls[1]: 500, urls[2]: 404}),
    )
    errors = []
    result = retrieve_evidence(factual("Heat pumps reduce bills."), RetrievalConfig(), backends, errors)
    assert result == []
    assert sorted(e.subject for e in errors) == urls
    assert {e.stage for e in errors} == {"fetch"}


def test_verbatim_page_ranks_first():
    text = "The boiling point is lower at high altitude."
    pages = {
        "https://a.example/altitude": f"<p>Cooking at altitude. {text} Pasta takes longer.</p>",
        "https://b.example/boil": "<p>The boiling point of water at sea level is 100 degrees.</p>",
        "https://c.example/high": "<p>High altitude hiking needs lower pace and point planning.</p>",
    }
    backends = Backends(embedder=mock.HashingEmbedder(), search=mock.CorpusSearch(pages),
                        fetcher=mock.CorpusFetcher(pages))
    result = retrieve_evidence(factual(text), RetrievalConfig(), backends)
    assert result[0].chunk.url == "https://a.example/altitude"
    assert len(result) <= 5


def test_top_k_caps_results():
    pages = {f"https://s{i}.example": "<p>" + " ".join(["heat pumps save energy"] * 200) + "</p>" for i in range(3)}
    backends = Backends(embedder=mock.HashingEmbedder(), search=mock.CorpusSearch(pages),
                        fetcher=mock.CorpusFetcher(pages))
    cfg = RetrievalConfig(window_chars=128, top_k=5)
    result = retrieve_evidence(factual("Heat pumps save energy."), cfg, backends)
    assert len(result) == 5
    assert all(len(sc.chunk.text) <= 128 for sc in result)


def test_retrieval_needs_factual_claim():
    from attributor.core import Claim, ClaimOrigin

    c = Claim("r/f1", "r", "x", ClaimOrigin.PROMPT_FACTSCORE)
    with pytest.raises(InvalidInput):
        retrieve_evidence(c, RetrievalConfig(), rule_backends())


def test_question_pool_shares_pages():
    backends = rule_backends()
    claims = [factual("Heat pumps are efficient heating devices.", "q1/f1", "q1"),
              factual("Water boils at 100 degrees Celsius at sea level.", "q1/f2", "q1")]
    ev = retrieve_for_question(claims, RetrievalConfig(), backends, record_id="q1")
    assert set(ev.results) == {"q1/f1", "q1/f2"}
    assert ev.searches == 2 and ev.search_failures == 0
    assert len(ev.urls) == len(set(ev.urls))
    assert ev.results["q1/f1"][0].chunk.url == "https://energy.example.org/heat-pumps"
    assert ev.results["q1/f2"][0].chunk.url == "https://physics.example.org/water"
