"""Domain types shared by all layers, plus the artifact lifecycle state machine.

All value types are frozen dataclasses; a state transition returns a new
artifact and appends an entry to the audit log it is given.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from datetime import date, datetime
from enum import Enum
from typing import Optional

from .errors import IllegalTransition, Unauthorized
from .runtime import format_timestamp, parse_timestamp

TAG_RE = re.compile(r"^[a-z0-9_-]+$")


class Modality(str, Enum):
    INTERVIEW = "Interview"
    THINK_ALOUD = "ThinkAloud"
    CORPUS = "Corpus"


class ArtifactType(str, Enum):
    FACTUAL_CLAIM = "FactualClaim"
    DECISION_HEURISTIC = "DecisionHeuristic"
    ANOMALY_PATTERN = "AnomalyPattern"
    BEST_PRACTICE = "BestPractice"


class ArtifactState(str, Enum):
    EXTRACTED = "Extracted"
    PENDING_VALIDATION = "PendingValidation"
    VALIDATED = "Validated"
    REJECTED = "Rejected"
    INDEXED = "Indexed"
    ERASED = "Erased"


# Legal edges of the lifecycle. Erased is reachable from every state.
LEGAL_TRANSITIONS: dict[ArtifactState, frozenset[ArtifactState]] = {
    ArtifactState.EXTRACTED: frozenset({ArtifactState.PENDING_VALIDATION, ArtifactState.ERASED}),
    ArtifactState.PENDING_VALIDATION: frozenset(
        {ArtifactState.VALIDATED, ArtifactState.REJECTED, ArtifactState.ERASED}
    ),
    ArtifactState.VALIDATED: frozenset({ArtifactState.INDEXED, ArtifactState.ERASED}),
    ArtifactState.REJECTED: frozenset({ArtifactState.ERASED}),
    ArtifactState.INDEXED: frozenset({ArtifactState.ERASED}),
    ArtifactState.ERASED: frozenset(),
}

# Transitions that only the originating expert (or a recorded delegate) may make.
_EXPERT_ONLY_TARGETS = {ArtifactState.VALIDATED, ArtifactState.REJECTED}


@dataclass(frozen=True)
class ExpertProfile:
    expert_id: str
    display_name: str
    domain_tags: frozenset[str]
    created_at: datetime

    def __post_init__(self):
        if not self.domain_tags:
            raise ValueError("domain_tags must be non-empty")
        for tag in self.domain_tags:
            if not TAG_RE.match(tag):
                raise ValueError(f"invalid domain tag {tag!r}")

    def to_dict(self) -> dict:
        return {
            "expert_id": self.expert_id,
            "display_name": self.display_name,
            "domain_tags": sorted(self.domain_tags),
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertProfile":
        return cls(
            expert_id=d["expert_id"],
            display_name=d["display_name"],
            domain_tags=frozenset(d["domain_tags"]),
            created_at=parse_timestamp(d["created_at"]),
        )


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    expert_id: str
    modality: Modality
    capture_date: date
    raw_text: str  # scrubbed, normalized
    original_byte_hash: int  # 64-bit hash of the pre-scrub upload bytes
    ingest_time: datetime
    domain_tag: str = ""

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "expert_id": self.expert_id,
            "modality": self.modality.value,
            "capture_date": self.capture_date.isoformat(),
            "raw_text": self.raw_text,
            "original_byte_hash": f"{self.original_byte_hash:016x}",
            "ingest_time": format_timestamp(self.ingest_time),
            "domain_tag": self.domain_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceDocument":
        return cls(
            doc_id=d["doc_id"],
            expert_id=d["expert_id"],
            modality=Modality(d["modality"]),
            capture_date=date.fromisoformat(d["capture_date"]),
            raw_text=d["raw_text"],
            original_byte_hash=int(d["original_byte_hash"], 16),
            ingest_time=parse_timestamp(d["ingest_time"]),
            domain_tag=d.get("domain_tag", ""),
        )


@dataclass(frozen=True)
class TranscriptChunk:
    chunk_id: str
    doc_id: str
    seq: int
    token_span: tuple[int, int]  # half-open, in whitespace tokens
    text: str

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "seq": self.seq,
            "token_span": list(self.token_span),
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptChunk":
        return cls(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            seq=d["seq"],
            token_span=(d["token_span"][0], d["token_span"][1]),
            text=d["text"],
        )


@dataclass(frozen=True)
class ProvenanceLink:
    doc_id: str
    chunk_id: str
    char_span: tuple[int, int]  # half-open, within the chunk text

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_id": self.chunk_id,
            "char_span": list(self.char_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProvenanceLink":
        return cls(
            doc_id=d["doc_id"],
            chunk_id=d["chunk_id"],
            char_span=(d["char_span"][0], d["char_span"][1]),
        )


@dataclass(frozen=True)
class KnowledgeArtifact:
    artifact_id: str
    expert_id: str
    artifact_type: ArtifactType
    statement: str
    provenance: tuple[ProvenanceLink, ...]
    confidence: float
    state: ArtifactState
    domain_tag: str
    created_at: datetime
    validated_at: Optional[datetime] = None
    revision_of: Optional[str] = None

    def __post_init__(self):
        if not self.provenance:
            raise ValueError("provenance must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence out of [0,1]")

    def replace_confidence(self, confidence: float) -> "KnowledgeArtifact":
        return replace(self, confidence=confidence)

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "expert_id": self.expert_id,
            "artifact_type": self.artifact_type.value,
            "statement": self.statement,
            "provenance": [p.to_dict() for p in self.provenance],
            "confidence": self.confidence,
            "state": self.state.value,
            "domain_tag": self.domain_tag,
            "created_at": format_timestamp(self.created_at),
            "validated_at": format_timestamp(self.validated_at) if self.validated_at else None,
            "revision_of": self.revision_of,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeArtifact":
        return cls(
            artifact_id=d["artifact_id"],
            expert_id=d["expert_id"],
            artifact_type=ArtifactType(d["artifact_type"]),
            statement=d["statement"],
            provenance=tuple(ProvenanceLink.from_dict(p) for p in d["provenance"]),
            confidence=d["confidence"],
            state=ArtifactState(d["state"]),
            domain_tag=d["domain_tag"],
            created_at=parse_timestamp(d["created_at"]),
            validated_at=parse_timestamp(d["validated_at"]) if d.get("validated_at") else None,
            revision_of=d.get("revision_of"),
        )


@dataclass(frozen=True)
class AuditEntry:
    """One state transition, retained forever (tombstoned on erasure)."""

    artifact_id: str
    from_state: str
    to_state: str
    actor: str
    at: datetime
    tombstone: bool = False

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "from_state": self.from_state,
            "to_state": self.to_state,
            "actor": self.actor,
            "at": format_timestamp(self.at),
            "tombstone": self.tombstone,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditEntry":
        return cls(
            artifact_id=d["artifact_id"],
            from_state=d["from_state"],
            to_state=d["to_state"],
            actor=d["actor"],
            at=parse_timestamp(d["at"]),
            tombstone=d.get("tombstone", False),
        )


def is_legal_transition(current: ArtifactState, target: ArtifactState) -> bool:
    return target in LEGAL_TRANSITIONS[current]


def transition_state(
    artifact: KnowledgeArtifact,
    target: ArtifactState,
    actor: str,
    audit_log: list[AuditEntry],
    at: datetime,
    delegates: frozenset[str] = frozenset(),
) -> KnowledgeArtifact:
    """Move an artifact along a legal lifecycle edge.

    Validated/Rejected require the originating expert or a recorded delegate.
    A Validated transition stamps validated_at. Every transition is appended
    to the audit log.
    """
    if not is_legal_transition(artifact.state, target):
        raise IllegalTransition(f"{artifact.state.value} -> {target.value}")
    if target in _EXPERT_ONLY_TARGETS:
        if actor != artifact.expert_id and actor not in delegates:
            raise Unauthorized(f"actor {actor} may not set state {target.value}")
    updated = replace(
        artifact,
        state=target,
        validated_at=at if target is ArtifactState.VALIDATED else artifact.validated_at,
    )
    audit_log.append(
        AuditEntry(
            artifact_id=artifact.artifact_id,
            from_state=artifact.state.value,
            to_state=target.value,
            actor=actor,
            at=at,
        )
    )
    return updated


def replay_audit_log(entries: list[AuditEntry]) -> dict[str, list[str]]:
    """Replay per-artifact transition histories and check machine legality.

    Returns artifact_id -> observed state sequence. Raises IllegalTransition
    if any recorded edge is not in the machine.
    """
    histories: dict[str, list[str]] = {}
    for entry in entries:
        if entry.tombstone:
            continue
        seq = histories.setdefault(entry.artifact_id, [])
        if seq and seq[-1] != entry.from_state:
            raise IllegalTransition(
                f"audit gap for {entry.artifact_id}: {seq[-1]} then {entry.from_state}"
            )
        if not is_legal_transition(ArtifactState(entry.from_state), ArtifactState(entry.to_state)):
            raise IllegalTransition(f"{entry.from_state} -> {entry.to_state}")
        if not seq:
            seq.append(entry.from_state)
        seq.append(entry.to_state)
    return histories
