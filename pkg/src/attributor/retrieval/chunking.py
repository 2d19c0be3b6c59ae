"""Character-window chunkers. Lengths count code points, never bytes."""

from __future__ import annotations

import re

# coarsest first; each pattern matches the separator that ends a piece
_SEPARATORS = (
    re.compile(r"\n\s*\n\s*"),
    re.compile(r"(?<=[.!?])\s+"),
    re.compile(r"\s+"),
)


def chunk_fixed(text: str, window_chars: int) -> list[str]:
    """Consecutive non-overlapping windows; ``"".join(result) == text``."""
    if window_chars <= 0:
        raise ValueError("window_chars must be positive")
    return [text[i:i + window_chars] for i in range(0, len(text), window_chars)]


def _pieces(text: str, window: int, level: int = 0) -> list[str]:
    """Split into pieces no longer than ``window`` at the coarsest separator that helps.

    Separators stay attached to the piece they end, so the pieces concatenate
    back to ``text``.
    """
    if len(text) <= window:
        return [text] if text else []
    if level == len(_SEPARATORS):
        return chunk_fixed(text, window)
    cuts = [m.end() for m in _SEPARATORS[level].finditer(text) if 0 < m.end() < len(text)]
    if not cuts:
        return _pieces(text, window, level + 1)
    out: list[str] = []
    start = 0
    for end in cuts + [len(text)]:
        out.extend(_pieces(text[start:end], window, level + 1))
        start = end
    return out


def chunk_recursive(text: str, window_chars: int, overlap_chars: int = 64) -> list[str]:
    """Boundary-aware chunks of at most ``window_chars`` with up to ``overlap_chars`` carried over.

    Pieces from the coarsest useful separator (paragraph, sentence, word, hard
    cut) are packed greedily; a new chunk starts with the trailing pieces of the
    previous one when they fit inside the overlap budget.
    """
    if window_chars <= 0:
        raise ValueError("window_chars must be positive")
    if not 0 <= overlap_chars < window_chars:
        raise ValueError("need 0 <= overlap_chars < window_chars")
    if len(text) <= window_chars:
        return [text] if text.strip() else []
    pieces = _pieces(text, window_chars)
    chunks: list[str] = []
    current: list[str] = []
    size = 0
    for piece in pieces:
        if current and size + len(piece) > window_chars:
            chunks.append("".join(current))
            # keep the longest suffix of whole pieces that fits the overlap and leaves room
            carried: list[str] = []
            carried_size = 0
            for prev in reversed(current):
                if carried_size + len(prev) > overlap_chars or carried_size + len(prev) + len(piece) > window_chars:
                    break
                carried.insert(0, prev)
                carried_size += len(prev)
            current, size = carried, carried_size
        current.append(piece)
        size += len(piece)
    if current:
        chunks.append("".join(current))
    out = [c.strip() for c in chunks]
    return [c for c in out if c]
