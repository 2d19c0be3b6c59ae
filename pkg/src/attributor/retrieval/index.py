"""Exact cosine-similarity index over unit vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from attributor.core import EvidenceChunk
from attributor.errors import DimensionMismatch, DuplicateId, InvalidInput


@dataclass(frozen=True)
class ScoredChunk:
    chunk: EvidenceChunk
    score: float


class VectorIndex:
    """Brute-force search; immutable once built."""

    def __init__(self, chunks: Sequence[EvidenceChunk]):
        self._chunks = tuple(chunks)
        seen: set[str] = set()
        for c in self._chunks:
            if c.id in seen:
                raise DuplicateId(c.id)
            seen.add(c.id)
            if not c.embedding:
                raise InvalidInput(f"chunk {c.id} has no embedding")
        dims = {len(c.embedding) for c in self._chunks}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed embedding dimensions {sorted(dims)}")
        self.dimension = dims.pop() if dims else 0
        matrix = np.array([c.embedding for c in self._chunks], dtype=np.float64)
        self._matrix = matrix.reshape(len(self._chunks), self.dimension)
        self._matrix.setflags(write=False)

    @property
    def empty(self) -> bool:
        return not self._chunks

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def entries(self) -> list[tuple[str, tuple[float, ...]]]:
        return [(c.id, c.embedding) for c in self._chunks]

    def search(self, query_vec: Sequence[float], top_k: int) -> list[ScoredChunk]:
        if top_k < 1:
            raise InvalidInput("top_k must be >= 1")
        if self.empty:
            return []
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(f"query has dimension {q.shape}, index has {self.dimension}")
        # row-wise dot: identical embeddings always get bit-identical scores
        scores = np.fromiter((np.dot(row, q) for row in self._matrix), dtype=np.float64, count=len(self))
        # stable sort on the negated score keeps insertion order among ties
        order = np.argsort(-scores, kind="stable")[:top_k]
        return [ScoredChunk(self._chunks[i], float(scores[i])) for i in order]


def build_index(chunks: Sequence[EvidenceChunk]) -> VectorIndex:
    return VectorIndex(chunks)


def query_index(index: VectorIndex, claim_text: str, top_k: int, embedder) -> list[ScoredChunk]:
    if index.empty:
        return []
    (vec,) = embedder.embed([claim_text])
    return index.search(vec, top_k)
