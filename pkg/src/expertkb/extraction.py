"""Processing layer: turn chunks into typed artifacts, score confidence by
corroboration, and run the expert validation workflow.

The canonical test backend is a marker grammar: a line beginning ``CLAIM:``,
``HEURISTIC:``, ``ANOMALY:`` or ``PRACTICE:`` yields one artifact of the
corresponding type. Real LLM backends must emit the same
(type, statement, span) shape.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Protocol

from .errors import MissingEditText, NotIndexed
from .model import (
    ArtifactState,
    ArtifactType,
    KnowledgeArtifact,
    ProvenanceLink,
    SourceDocument,
    TranscriptChunk,
)

VALIDATION_CONFIDENCE_FLOOR = 0.90

MARKER_TYPES = {
    "CLAIM": ArtifactType.FACTUAL_CLAIM,
    "HEURISTIC": ArtifactType.DECISION_HEURISTIC,
    "ANOMALY": ArtifactType.ANOMALY_PATTERN,
    "PRACTICE": ArtifactType.BEST_PRACTICE,
}

_MARKER_RE = re.compile(r"^(CLAIM|HEURISTIC|ANOMALY|PRACTICE):\s*(\S.*)$", re.MULTILINE)
_FINGERPRINT_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ExtractionBackend(Protocol):
    def extract(self, chunk_text: str) -> list[tuple[ArtifactType, str, tuple[int, int]]]: ...


class MarkerExtractionBackend:
    """Deterministic marker-grammar extractor; a pure function of chunk text."""

    def extract(self, chunk_text: str) -> list[tuple[ArtifactType, str, tuple[int, int]]]:
        hits = []
        for m in _MARKER_RE.finditer(chunk_text):
            statement = m.group(2).rstrip()
            start = m.start(2)
            hits.append((MARKER_TYPES[m.group(1)], statement, (start, start + len(statement))))
        return hits


def statement_fingerprint(statement: str) -> str:
    """Order- and case-insensitive fingerprint over the token multiset.

    Hashing keeps the corroboration index free of statement content, which
    erasure scans rely on.
    """
    tokens = sorted(_FINGERPRINT_TOKEN_RE.findall(statement.lower()))
    return hashlib.sha256("\x1f".join(tokens).encode("utf-8")).hexdigest()


class CorroborationIndex:
    """statement fingerprint -> set of doc_ids containing a matching statement."""

    def __init__(self):
        self._docs_by_fingerprint: dict[str, set[str]] = {}

    def add(self, statement: str, doc_id: str) -> None:
        self._docs_by_fingerprint.setdefault(statement_fingerprint(statement), set()).add(doc_id)

    def corroborating_docs(self, statement: str) -> Optional[set[str]]:
        return self._docs_by_fingerprint.get(statement_fingerprint(statement))

    def forget_docs(self, doc_ids: set[str]) -> None:
        """Drop erased documents from every corroboration set."""
        empty = []
        for fp, docs in self._docs_by_fingerprint.items():
            docs -= doc_ids
            if not docs:
                empty.append(fp)
        for fp in empty:
            del self._docs_by_fingerprint[fp]

    def to_dict(self) -> dict:
        return {fp: sorted(docs) for fp, docs in self._docs_by_fingerprint.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "CorroborationIndex":
        index = cls()
        index._docs_by_fingerprint = {fp: set(docs) for fp, docs in d.items()}
        return index


def raw_confidence(k: int) -> float:
    """Corroboration count -> score; strictly increasing, bounded in [0.5, 1)."""
    if k < 1:
        raise ValueError("corroboration count must be >= 1")
    return k / (k + 1)


def confidence_score(artifact: KnowledgeArtifact, index: CorroborationIndex) -> float:
    """Score from the number of distinct corroborating documents. After the
    artifact reaches Validated the effective confidence is floored at 0.90."""
    docs = index.corroborating_docs(artifact.statement)
    if not docs:
        raise NotIndexed(f"statement of {artifact.artifact_id} missing from corroboration index")
    return raw_confidence(len(docs))


def extract_artifacts(
    doc: SourceDocument,
    chunks: list[TranscriptChunk],
    backend: ExtractionBackend,
    new_id,
    expert_id: str,
    domain_tag: str,
    at: datetime,
) -> list[KnowledgeArtifact]:
    """One artifact per backend hit, with provenance filled in.

    Chunks overlap, so the same marker line can surface in two neighbouring
    chunks (possibly truncated at a chunk boundary); hits are deduplicated by
    absolute document offset, keeping the longest statement.
    """
    from .ingestion import tokenize

    token_spans = tokenize(doc.raw_text)
    best: dict[tuple[ArtifactType, int], tuple[str, TranscriptChunk, tuple[int, int]]] = {}
    for c in sorted(chunks, key=lambda c: c.seq):
        chunk_char_offset = token_spans[c.token_span[0]][0] if token_spans else 0
        for artifact_type, statement, span in backend.extract(c.text):
            abs_start = chunk_char_offset + span[0]
            key = (artifact_type, abs_start)
            if key not in best or len(statement) > len(best[key][0]):
                best[key] = (statement, c, span)

    artifacts = []
    for (artifact_type, _), (statement, c, span) in sorted(
        best.items(), key=lambda item: item[0][1]
    ):
        artifacts.append(
            KnowledgeArtifact(
                artifact_id=new_id(),
                expert_id=expert_id,
                artifact_type=artifact_type,
                statement=statement,
                provenance=(ProvenanceLink(doc_id=doc.doc_id, chunk_id=c.chunk_id, char_span=span),),
                confidence=0.0,
                state=ArtifactState.EXTRACTED,
                domain_tag=domain_tag,
                created_at=at,
            )
        )
    return artifacts


@dataclass(frozen=True)
class ValidationDecision:
    artifact_id: str
    verdict: str  # Approve | Reject | Edit
    reviewer: str
    decided_at: datetime
    edited_statement: Optional[str] = None

    VERDICTS = ("Approve", "Reject", "Edit")

    def __post_init__(self):
        if self.verdict not in self.VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "Edit" and not self.edited_statement:
            raise MissingEditText("Edit verdict requires edited_statement")

    def to_dict(self) -> dict:
        from .runtime import format_timestamp

        return {
            "artifact_id": self.artifact_id,
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "decided_at": format_timestamp(self.decided_at),
            "edited_statement": self.edited_statement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationDecision":
        from .runtime import parse_timestamp

        return cls(
            artifact_id=d["artifact_id"],
            verdict=d["verdict"],
            reviewer=d["reviewer"],
            decided_at=parse_timestamp(d["decided_at"]),
            edited_statement=d.get("edited_statement"),
        )


def export_queue(artifacts: list[KnowledgeArtifact]) -> str:
    """Pending artifacts as line-delimited JSON for offline review."""
    lines = []
    for a in artifacts:
        lines.append(
            json.dumps(
                {
                    "artifact_id": a.artifact_id,
                    "type": a.artifact_type.value,
                    "statement": a.statement,
                    "provenance": [p.to_dict() for p in a.provenance],
                    "raw_confidence": a.confidence,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_queue_records(payload: str) -> list[dict]:
    """Parse exported queue records; reviewed records may add a verdict."""
    records = []
    for line_no, line in enumerate(payload.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad queue record on line {line_no}: {exc}") from exc
    return records
