"""Evidence retrieval: search, page extraction, chunking and exact vector search."""

from attributor.retrieval.chunking import chunk_fixed, chunk_recursive
from attributor.retrieval.extract import extract_text, fetch_and_extract
from attributor.retrieval.index import ScoredChunk, VectorIndex, build_index, query_index
from attributor.retrieval.retrieve import (
    QuestionEvidence,
    RetrievalConfig,
    Splitter,
    retrieve_evidence,
    retrieve_for_question,
)

__all__ = [
    "chunk_fixed", "chunk_recursive", "extract_text", "fetch_and_extract", "ScoredChunk", "VectorIndex",
    "build_index", "query_index", "QuestionEvidence", "RetrievalConfig", "Splitter", "retrieve_evidence",
    "retrieve_for_question",
]
