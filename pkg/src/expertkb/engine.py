"""Query layer: embed the question, retrieve under consent, assemble a
budgeted prompt context, generate, and emit a citation-transparent response.

The canonical generation backend is extractive: one cited sentence per
context artifact. Any backend's output passes through the citation
validator; a response with uncited sentences is downgraded to the fixed
no-grounding notice rather than served uncited.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Protocol

from .errors import EmptyQuestion, Forbidden
from .governance import check_access
from .index import MetadataFilter
from .model import ArtifactState
from .runtime import format_timestamp
from .store import KnowledgeStore

DEFAULT_K = 8
DEFAULT_TOKEN_BUDGET = 2048

NO_GROUNDING_NOTICE = "No grounded answer available from the captured knowledge base."

_MARKER_RE = re.compile(r"\[(\d+)\]")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class Query:
    query_id: str
    principal: str
    question: str
    filter: MetadataFilter = field(default_factory=MetadataFilter)
    k: int = DEFAULT_K
    asked_at: Optional[datetime] = None

    def __post_init__(self):
        if not self.question.strip():
            raise EmptyQuestion("question must be non-empty")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class ContextItem:
    artifact_id: str
    statement: str
    confidence: float
    provenance_summary: str


@dataclass(frozen=True)
class PromptContext:
    items: tuple[ContextItem, ...]
    token_budget: int = DEFAULT_TOKEN_BUDGET

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Citation:
    marker: int  # 1-based position in the answer's [n] markers
    artifact_id: str

    def to_dict(self) -> dict:
        return {"marker": self.marker, "artifact_id": self.artifact_id}


@dataclass(frozen=True)
class GroundedResponse:
    query_id: str
    answer: str
    citations: tuple[Citation, ...]
    disclosure: tuple[dict, ...]  # per citation: confidence, capture_date, domain_tag, doc_id
    latency_ms: float
    resolved_flag: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "answer": self.answer,
            "citations": [c.to_dict() for c in self.citations],
            "disclosure": [dict(d) for d in self.disclosure],
            "latency_ms": self.latency_ms,
            "resolved_flag": self.resolved_flag,
        }


class GenerationBackend(Protocol):
    def generate(self, question: str, context: PromptContext) -> str: ...


class ExtractiveGenerationBackend:
    """Pure extractive mock: one sentence per context artifact, in order."""

    def generate(self, question: str, context: PromptContext) -> str:
        return mock_generate(question, context)


def mock_generate(question: str, context: PromptContext) -> str:
    if not context.items:
        return NO_GROUNDING_NOTICE
    return " ".join(
        f"{item.statement} [{i}]." for i, item in enumerate(context.items, start=1)
    )


def assemble_context(
    hits: list[tuple[str, float]],
    store: KnowledgeStore,
    budget: int = DEFAULT_TOKEN_BUDGET,
) -> PromptContext:
    """Greedy packing in retrieval order: an artifact is included iff its
    statement tokens fit the remaining budget; never reorders."""
    items: list[ContextItem] = []
    remaining = budget
    for artifact_id, _sim in hits:
        artifact = store.artifacts.get(artifact_id)
        if artifact is None:
            continue
        cost = len(artifact.statement.split())
        if cost > remaining:
            continue
        remaining -= cost
        items.append(
            ContextItem(
                artifact_id=artifact_id,
                statement=artifact.statement,
                confidence=artifact.confidence,
                provenance_summary="; ".join(
                    f"{p.doc_id}/{p.chunk_id}:{p.char_span[0]}-{p.char_span[1]}"
                    for p in artifact.provenance
                ),
            )
        )
    return PromptContext(items=tuple(items), token_budget=budget)


def validate_citations(answer: str, context_size: int) -> list[str]:
    """Citation-transparency check over any backend's output.

    Returns a list of problems; empty means the answer is servable. Every
    sentence must carry at least one marker, every marker must resolve, and
    an empty context admits only the fixed notice.
    """
    if context_size == 0:
        return [] if answer == NO_GROUNDING_NOTICE else ["expected the no-grounding notice"]
    problems = []
    markers = {int(m) for m in _MARKER_RE.findall(answer)}
    expected = set(range(1, context_size + 1))
    if markers - expected:
        problems.append(f"markers {sorted(markers - expected)} cite nothing in context")
    if expected - markers:
        problems.append(f"context items {sorted(expected - markers)} are never cited")
    for sentence in _SENTENCE_SPLIT_RE.split(answer):
        if sentence.strip() and not _MARKER_RE.search(sentence):
            problems.append(f"uncited sentence: {sentence.strip()[:60]!r}")
    return problems


class QueryEngine:
    """Read-only against the index; interaction-log appends are serialized by
    the store."""

    def __init__(
        self,
        store: KnowledgeStore,
        generator: Optional[GenerationBackend] = None,
        token_budget: int = DEFAULT_TOKEN_BUDGET,
    ):
        self.store = store
        self.generator = generator or ExtractiveGenerationBackend()
        self.token_budget = token_budget

    def answer(self, query: Query) -> GroundedResponse:
        started = time.perf_counter()
        store = self.store
        with store.lock.read_locked():
            today = store.clock.today()
            consents = list(store.consents.values())

            def accessible(artifact_id: str, _metadata) -> bool:
                artifact = store.artifacts.get(artifact_id)
                if artifact is None or artifact.state is not ArtifactState.INDEXED:
                    return False
                return bool(check_access(query.principal, artifact, consents, today))

            indexed = [
                a for a in store.artifacts.values() if a.state is ArtifactState.INDEXED
            ]
            if indexed and not any(accessible(a.artifact_id, None) for a in indexed):
                raise Forbidden(
                    f"principal {query.principal} is outside every applicable consent scope"
                )

            query_vector = store.embedder.embed(query.question)
            hits = store.index.search(
                query_vector, query.k, metadata_filter=query.filter, extra_predicate=accessible
            )
            context = assemble_context(hits, store, budget=self.token_budget)
            answer_text = self.generator.generate(query.question, context)

            problems = validate_citations(answer_text, len(context))
            if problems:
                # Strictest reading of citation transparency: never serve
                # uncited prose, downgrade instead.
                answer_text = NO_GROUNDING_NOTICE
                context = PromptContext(items=(), token_budget=self.token_budget)

            citations = tuple(
                Citation(marker=i, artifact_id=item.artifact_id)
                for i, item in enumerate(context.items, start=1)
            )
            disclosure = []
            for item in context.items:
                record = store.index.get(item.artifact_id)
                disclosure.append(
                    {
                        "confidence": record.metadata.confidence,
                        "capture_date": record.metadata.capture_date.isoformat(),
                        "domain_tag": record.metadata.domain_tag,
                        "doc_id": record.metadata.doc_id,
                    }
                )

            latency_ms = (time.perf_counter() - started) * 1000.0
            response = GroundedResponse(
                query_id=query.query_id,
                answer=answer_text,
                citations=citations,
                disclosure=tuple(disclosure),
                latency_ms=latency_ms,
            )
            asked_at = query.asked_at or store.clock.now()
            store.append_interaction(
                {
                    "query_id": query.query_id,
                    "principal": query.principal,
                    "asked_at": format_timestamp(asked_at),
                    "latency_ms": latency_ms,
                    "cited_artifact_ids": [c.artifact_id for c in citations],
                    "resolved_flag": None,
                    "question": query.question,
                    "response": response.to_dict(),
                }
            )
            return response
