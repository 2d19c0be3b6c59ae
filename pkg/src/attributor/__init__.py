"""Post-hoc answer attribution for LLM answers.

Segments an answer into claims, keeps the check-worthy ones, optionally
enriches context-dependent claims, retrieves web evidence for each claim and
labels every claim/evidence pair as entailed, contradicted or unrelated.
"""

from attributor.core import (
    Claim,
    ClaimOrigin,
    EvidenceChunk,
    Independence,
    PRFResult,
    QARecord,
    Relation,
    RelevanceClass,
    compute_prf,
    fingerprint,
    normalize_text,
)

__version__ = "0.1.0"

__all__ = [
    "Claim", "ClaimOrigin", "EvidenceChunk", "Independence", "PRFResult", "QARecord", "Relation",
    "RelevanceClass", "compute_prf", "fingerprint", "normalize_text",
]
