"""The shared knowledge store: one writer, many readers, atomic erasure.

All collections live in memory and persist as JSON files plus the binary
vector index under a data directory. Mutations take the write lock; reads
take the read lock, so a query never observes a partially applied erasure.
"""

from __future__ import annotations

import json
import os
import threading
from contextlib import contextmanager
from datetime import date, datetime
from pathlib import Path
from typing import Iterator, Optional

from . import governance
from .embedding import HashingEmbeddingBackend
from .errors import (
    AlreadySet,
    ConsentMissing,
    ConsentScopeViolation,
    Duplicate,
    DuplicateDocument,
    EmptyDocument,
    MissingElement,
    NotActive,
    OutOfRange,
    ScanFailed,
    UnknownEntity,
    UnknownQuery,
)
from .extraction import (
    CorroborationIndex,
    MarkerExtractionBackend,
    ValidationDecision,
    confidence_score,
    extract_artifacts,
    VALIDATION_CONFIDENCE_FLOOR,
)
from .governance import (
    AccessDecision,
    ConsentRecord,
    ConsentStatus,
    ErasureJob,
    ErasureProof,
    JobStatus,
    check_access,
    new_erasure_job,
    salted_hash,
)
from .index import EmbeddingRecord, RecordMetadata, VectorIndex
from .ingestion import (
    CaptureSession,
    RedactionRuleSet,
    chunk as chunk_text,
    check_session_duration,
    normalize,
    scrub_pii,
    tokenize,
)
from .model import (
    ArtifactState,
    AuditEntry,
    ExpertProfile,
    KnowledgeArtifact,
    Modality,
    SourceDocument,
    TranscriptChunk,
    transition_state,
)
from .runtime import Clock, IdGenerator, fnv1a64, format_timestamp

DEFAULT_SIGNER_KEY = b"expertkb-consent-signing"


class RWLock:
    """Readers-writer lock with writer preference.

    Many readers or one writer; a waiting writer blocks new readers so
    erasure cannot starve under a query flood.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writers_waiting = 0
        self._writing = False

    @contextmanager
    def read_locked(self) -> Iterator[None]:
        with self._cond:
            while self._writing or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write_locked(self) -> Iterator[None]:
        with self._cond:
            self._writers_waiting += 1
            while self._writing or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


class KnowledgeStore:
    """Domain collections plus every cross-module operation that must stay
    atomic under the single-writer contract."""

    def __init__(
        self,
        data_dir: str,
        embedding_dimension: int = 64,
        clock: Optional[Clock] = None,
        ids: Optional[IdGenerator] = None,
        name_dictionary: Optional[list[str]] = None,
        sla_window_hours: int = governance.DEFAULT_SLA_WINDOW_HOURS,
        chunk_window: int = 512,
        chunk_overlap: int = 64,
        signer_key: bytes = DEFAULT_SIGNER_KEY,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock or Clock()
        self.ids = ids or IdGenerator()
        self.sla_window_hours = sla_window_hours
        self.chunk_window = chunk_window
        self.chunk_overlap = chunk_overlap
        self.redaction_rules = RedactionRuleSet.builtin(name_dictionary)
        self.embedder = HashingEmbeddingBackend(embedding_dimension)
        self.extractor = MarkerExtractionBackend()
        self.signer = governance.ConsentSigner(signer_key)

        self.lock = RWLock()
        self._log_mutex = threading.Lock()
        self._save_mutex = threading.Lock()

        self.experts: dict[str, ExpertProfile] = {}
        self.expert_stubs: dict[str, dict] = {}
        self.documents: dict[str, SourceDocument] = {}
        self.chunks: dict[str, TranscriptChunk] = {}
        self.chunks_by_doc: dict[str, list[str]] = {}
        self.artifacts: dict[str, KnowledgeArtifact] = {}
        self.sessions: dict[str, CaptureSession] = {}
        self.consents: dict[str, ConsentRecord] = {}
        self.delegates: dict[str, set[str]] = {}
        self.audit_log: list[AuditEntry] = []
        self.corroboration = CorroborationIndex()
        self.index = VectorIndex(embedding_dimension)
        self.erasure_jobs: dict[str, ErasureJob] = {}
        self.decisions: list[ValidationDecision] = []
        # interaction log entries plus the cached response (the prompt-context
        # cache erasure must also purge)
        self.interactions: list[dict] = []
        self.ratings: list[dict] = []
        self.surveys: list[dict] = []

    # -- experts and consent ---------------------------------------------

    def register_expert(self, display_name: str, domain_tags: set[str]) -> ExpertProfile:
        with self.lock.write_locked():
            expert = ExpertProfile(
                expert_id=self.ids.new_id(),
                display_name=display_name,
                domain_tags=frozenset(domain_tags),
                created_at=self.clock.now(),
            )
            self.experts[expert.expert_id] = expert
            return expert

    def get_expert(self, expert_id: str) -> ExpertProfile:
        expert = self.experts.get(expert_id)
        if expert is None:
            raise UnknownEntity(f"unknown expert {expert_id}")
        return expert

    def find_expert_by_name(self, display_name: str) -> Optional[ExpertProfile]:
        for expert in self.experts.values():
            if expert.display_name == display_name:
                return expert
        return None

    def add_delegate(self, expert_id: str, principal: str) -> None:
        with self.lock.write_locked():
            self.get_expert(expert_id)
            self.delegates.setdefault(expert_id, set()).add(principal)

    def grant_consent(
        self,
        expert_id: str,
        scope_domain_tags: set[str],
        scope_modalities: set[Modality],
        authorized_principals: set[str],
        retention_until: date,
        voice_clone_consent: bool = False,
        license_ref: str = "",
    ) -> ConsentRecord:
        with self.lock.write_locked():
            self.get_expert(expert_id)
            consent = governance.build_consent(
                consent_id=self.ids.new_id(),
                expert_id=expert_id,
                scope_domain_tags=scope_domain_tags,
                scope_modalities=scope_modalities,
                authorized_principals=authorized_principals,
                retention_until=retention_until,
                signed_at=self.clock.now(),
                today=self.clock.today(),
                voice_clone_consent=voice_clone_consent,
                license_ref=license_ref,
            )
            self.consents[consent.consent_id] = consent
            return consent

    def get_consent(self, consent_id: str) -> ConsentRecord:
        consent = self.consents.get(consent_id)
        if consent is None:
            raise UnknownEntity(f"unknown consent {consent_id}")
        return consent

    def withdraw_consent(self, consent_id: str) -> tuple[ConsentRecord, ErasureJob]:
        """Withdrawal immediately enqueues an erasure job for the expert."""
        with self.lock.write_locked():
            consent = self.get_consent(consent_id)
            withdrawn = governance.withdraw(consent)
            self.consents[consent_id] = withdrawn
            job = self._enqueue_erasure(withdrawn.expert_id)
            return withdrawn, job

    def expire_retention(self, now: Optional[datetime] = None) -> list[ErasureJob]:
        """Expire lapsed consents and spawn erasure jobs; naturally idempotent
        because expired consents are no longer Active."""
        now = now or self.clock.now()
        jobs = []
        with self.lock.write_locked():
            for consent_id, consent in list(self.consents.items()):
                if consent.status is ConsentStatus.ACTIVE and consent.retention_until < now.date():
                    self.consents[consent_id] = governance.expire(consent)
                    jobs.append(self._enqueue_erasure(consent.expert_id, requested_at=now))
        return jobs

    def check_access(self, principal: str, artifact: KnowledgeArtifact) -> AccessDecision:
        return check_access(
            principal, artifact, list(self.consents.values()), self.clock.today()
        )

    def principal_has_any_consent(self, principal: str) -> bool:
        return any(
            principal in c.authorized_principals
            for c in self.consents.values()
            if c.status is ConsentStatus.ACTIVE
        )

    def _active_consent_for(self, expert_id: str, modality: Modality) -> ConsentRecord:
        today = self.clock.today()
        candidates = [
            c
            for c in self.consents.values()
            if c.expert_id == expert_id
            and c.status is ConsentStatus.ACTIVE
            and c.retention_until >= today
        ]
        if not candidates:
            raise ConsentMissing(f"no active consent for expert {expert_id}")
        in_scope = [c for c in candidates if modality in c.scope_modalities]
        if not in_scope:
            raise ConsentScopeViolation(
                f"no active consent of expert {expert_id} covers modality {modality.value}"
            )
        return sorted(in_scope, key=lambda c: (c.signed_at, c.consent_id))[-1]

    # -- ingestion ---------------------------------------------------------

    def register_session(
        self, expert_id: str, modality: Modality, scheduled_minutes: int, consent_id: Optional[str]
    ) -> CaptureSession:
        with self.lock.write_locked():
            self.get_expert(expert_id)
            check_session_duration(modality, scheduled_minutes)
            if consent_id is None or consent_id not in self.consents:
                raise ConsentMissing("session requires an active consent")
            consent = self.consents[consent_id]
            if (
                consent.status is not ConsentStatus.ACTIVE
                or consent.retention_until < self.clock.today()
            ):
                raise ConsentMissing(f"consent {consent_id} is not active")
            if modality not in consent.scope_modalities:
                raise ConsentScopeViolation(
                    f"consent {consent_id} does not cover modality {modality.value}"
                )
            session = CaptureSession(
                session_id=self.ids.new_id(),
                expert_id=expert_id,
                modality=modality,
                scheduled_minutes=scheduled_minutes,
                consent_id=consent_id,
            )
            self.sessions[session.session_id] = session
            return session

    def ingest_document(
        self,
        text: str,
        capture_date: date,
        expert_id: Optional[str] = None,
        modality: Optional[Modality] = None,
        domain_tag: Optional[str] = None,
        session_id: Optional[str] = None,
    ) -> tuple[SourceDocument, list[TranscriptChunk]]:
        """Fixed pipeline: normalize -> scrub_pii -> chunk, persisted atomically.

        The duplicate check and original_byte_hash run over the pre-scrub
        upload bytes.
        """
        with self.lock.write_locked():
            if session_id is not None:
                session = self.sessions.get(session_id)
                if session is None:
                    raise UnknownEntity(f"unknown session {session_id}")
                expert_id = session.expert_id
                modality = session.modality
            if expert_id is None or modality is None:
                raise UnknownEntity("document needs an expert and modality (or a session)")
            expert = self.get_expert(expert_id)
            self._active_consent_for(expert_id, modality)

            original_hash = fnv1a64(text.encode("utf-8"))
            if any(d.original_byte_hash == original_hash for d in self.documents.values()):
                raise DuplicateDocument(f"identical bytes already ingested ({original_hash:016x})")

            normalized = normalize(text)
            scrubbed, _counts = scrub_pii(normalized, self.redaction_rules)
            if not tokenize(scrubbed):
                raise EmptyDocument("document empty after normalization")

            if domain_tag is None:
                if len(expert.domain_tags) == 1:
                    domain_tag = next(iter(expert.domain_tags))
                else:
                    raise MissingElement(
                        "domain_tag required when the expert has multiple domain tags"
                    )

            doc = SourceDocument(
                doc_id=self.ids.new_id(),
                expert_id=expert_id,
                modality=modality,
                capture_date=capture_date,
                raw_text=scrubbed,
                original_byte_hash=original_hash,
                ingest_time=self.clock.now(),
                domain_tag=domain_tag,
            )
            chunks = chunk_text(
                scrubbed,
                doc.doc_id,
                self.ids.new_id,
                window=self.chunk_window,
                overlap=self.chunk_overlap,
            )
            self.documents[doc.doc_id] = doc
            for c in chunks:
                self.chunks[c.chunk_id] = c
            self.chunks_by_doc[doc.doc_id] = [c.chunk_id for c in chunks]
            return doc, chunks

    def get_document(self, doc_id: str) -> SourceDocument:
        doc = self.documents.get(doc_id)
        if doc is None:
            raise UnknownEntity(f"unknown document {doc_id}")
        return doc

    def document_chunks(self, doc_id: str) -> list[TranscriptChunk]:
        return [self.chunks[cid] for cid in self.chunks_by_doc.get(doc_id, [])]

    def owner_of_doc(self, doc_id: str) -> Optional[str]:
        doc = self.documents.get(doc_id)
        return doc.expert_id if doc else None

    # -- extraction and validation -----------------------------------------

    def extract_document(self, doc_id: str) -> list[KnowledgeArtifact]:
        """Run the extraction backend over a chunked document; artifacts start
        in Extracted with a provisional corroboration score."""
        with self.lock.write_locked():
            doc = self.get_document(doc_id)
            chunks = self.document_chunks(doc_id)
            artifacts = extract_artifacts(
                doc,
                chunks,
                self.extractor,
                self.ids.new_id,
                expert_id=doc.expert_id,
                domain_tag=doc.domain_tag,
                at=self.clock.now(),
            )
            for artifact in artifacts:
                self.corroboration.add(artifact.statement, doc.doc_id)
            scored = []
            for artifact in artifacts:
                artifact = artifact.replace_confidence(
                    confidence_score(artifact, self.corroboration)
                )
                self.artifacts[artifact.artifact_id] = artifact
                scored.append(artifact)
            return scored

    def document_has_artifacts(self, doc_id: str) -> bool:
        return any(
            any(p.doc_id == doc_id for p in a.provenance) for a in self.artifacts.values()
        )

    def get_artifact(self, artifact_id: str) -> KnowledgeArtifact:
        artifact = self.artifacts.get(artifact_id)
        if artifact is None:
            raise UnknownEntity(f"unknown artifact {artifact_id}")
        return artifact

    def submit_for_validation(self, artifact_id: str) -> KnowledgeArtifact:
        """Re-score from the corroboration index, then move to the queue."""
        with self.lock.write_locked():
            artifact = self.get_artifact(artifact_id)
            artifact = artifact.replace_confidence(
                confidence_score(artifact, self.corroboration)
            )
            artifact = self._transition(artifact, ArtifactState.PENDING_VALIDATION, "pipeline")
            self.artifacts[artifact_id] = artifact
            return artifact

    def validation_queue(self, expert_id: str) -> list[KnowledgeArtifact]:
        with self.lock.read_locked():
            pending = [
                a
                for a in self.artifacts.values()
                if a.expert_id == expert_id and a.state is ArtifactState.PENDING_VALIDATION
            ]
            return sorted(pending, key=lambda a: (a.created_at, a.artifact_id))

    def decide(
        self,
        artifact_id: str,
        verdict: str,
        reviewer: str,
        edited_statement: Optional[str] = None,
    ) -> list[KnowledgeArtifact]:
        """Approve -> Validated; Reject -> Rejected; Edit -> original Rejected
        plus a Validated revision. Returns the updated artifact(s)."""
        with self.lock.write_locked():
            artifact = self.get_artifact(artifact_id)
            decision = ValidationDecision(
                artifact_id=artifact_id,
                verdict=verdict,
                reviewer=reviewer,
                decided_at=self.clock.now(),
                edited_statement=edited_statement,
            )
            results: list[KnowledgeArtifact] = []
            if verdict == "Approve":
                updated = self._transition(artifact, ArtifactState.VALIDATED, reviewer)
                updated = updated.replace_confidence(
                    max(updated.confidence, VALIDATION_CONFIDENCE_FLOOR)
                )
                self.artifacts[artifact_id] = updated
                results.append(updated)
            elif verdict == "Reject":
                updated = self._transition(artifact, ArtifactState.REJECTED, reviewer)
                self.artifacts[artifact_id] = updated
                results.append(updated)
            else:  # Edit: reject-and-revise, immutable history for correction rate
                rejected = self._transition(artifact, ArtifactState.REJECTED, reviewer)
                self.artifacts[artifact_id] = rejected
                revision = KnowledgeArtifact(
                    artifact_id=self.ids.new_id(),
                    expert_id=artifact.expert_id,
                    artifact_type=artifact.artifact_type,
                    statement=edited_statement,
                    provenance=artifact.provenance,
                    confidence=artifact.confidence,
                    state=ArtifactState.EXTRACTED,
                    domain_tag=artifact.domain_tag,
                    created_at=self.clock.now(),
                    revision_of=artifact_id,
                )
                revision = self._transition(
                    revision, ArtifactState.PENDING_VALIDATION, reviewer
                )
                revision = self._transition(revision, ArtifactState.VALIDATED, reviewer)
                revision = revision.replace_confidence(
                    max(revision.confidence, VALIDATION_CONFIDENCE_FLOOR)
                )
                self.artifacts[revision.artifact_id] = revision
                results.extend([rejected, revision])
            self.decisions.append(decision)
            return results

    def _transition(
        self, artifact: KnowledgeArtifact, target: ArtifactState, actor: str
    ) -> KnowledgeArtifact:
        return transition_state(
            artifact,
            target,
            actor,
            self.audit_log,
            self.clock.now(),
            delegates=frozenset(self.delegates.get(artifact.expert_id, ())),
        )

    # -- indexing ------------------------------------------------------------

    def index_artifact(self, artifact_id: str) -> EmbeddingRecord:
        """Embed a validated artifact, upsert it, and mark it Indexed."""
        with self.lock.write_locked():
            artifact = self.get_artifact(artifact_id)
            vector = self.embedder.embed(artifact.statement)
            first = artifact.provenance[0]
            record = EmbeddingRecord(
                artifact_id=artifact.artifact_id,
                vector=vector,
                metadata=RecordMetadata(
                    doc_id=first.doc_id,
                    capture_date=self.get_document(first.doc_id).capture_date,
                    artifact_type=artifact.artifact_type,
                    confidence=artifact.confidence,
                    domain_tag=artifact.domain_tag,
                ),
            )
            self.index.upsert(record, artifact.state)
            if artifact.state is ArtifactState.VALIDATED:
                self.artifacts[artifact_id] = self._transition(
                    artifact, ArtifactState.INDEXED, "pipeline"
                )
            return record

    # -- interaction log -------------------------------------------------

    def append_interaction(self, entry: dict) -> None:
        """Append under the log mutex; safe among concurrent readers."""
        with self._log_mutex:
            self.interactions.append(entry)

    def find_interaction(self, query_id: str) -> Optional[dict]:
        for entry in self.interactions:
            if entry["query_id"] == query_id:
                return entry
        return None

    def record_feedback(self, query_id: str, resolved: bool) -> None:
        """Set the resolution flag on a logged query; immutable once set."""
        with self.lock.write_locked():
            entry = self.find_interaction(query_id)
            if entry is None:
                raise UnknownQuery(f"unknown query {query_id}")
            if entry.get("resolved_flag") is not None:
                raise AlreadySet(f"feedback for {query_id} already recorded")
            entry["resolved_flag"] = bool(resolved)

    def record_rating(
        self,
        sample_id: str,
        query_id: str,
        rating: int,
        rater: str,
        rater_class: str = "expert",
    ) -> None:
        """Five-point accuracy rating, one per (response, rater)."""
        with self.lock.write_locked():
            if not isinstance(rating, int) or not 1 <= rating <= 5:
                raise OutOfRange(f"rating must be an integer 1..5, got {rating!r}")
            for existing in self.ratings:
                if existing["query_id"] == query_id and existing["rater"] == rater:
                    raise Duplicate(f"{rater} already rated {query_id}")
            self.ratings.append(
                {
                    "sample_id": sample_id,
                    "query_id": query_id,
                    "rating": rating,
                    "rater": rater,
                    "rater_class": rater_class,
                    "rated_at": format_timestamp(self.clock.now()),
                }
            )

    def record_survey(self, score: int, principal: str) -> None:
        """0-10 recommendation survey response (NPS input)."""
        with self.lock.write_locked():
            if not isinstance(score, int) or not 0 <= score <= 10:
                raise OutOfRange(f"survey score must be an integer 0..10, got {score!r}")
            self.surveys.append(
                {
                    "score": score,
                    "principal": principal,
                    "submitted_at": format_timestamp(self.clock.now()),
                }
            )

    # -- erasure ---------------------------------------------------------

    def request_erasure(self, expert_id: str) -> ErasureJob:
        with self.lock.write_locked():
            return self._enqueue_erasure(expert_id)

    def _enqueue_erasure(self, expert_id: str, requested_at: Optional[datetime] = None) -> ErasureJob:
        job = new_erasure_job(
            self.ids.new_id(),
            expert_id,
            requested_at or self.clock.now(),
            self.sla_window_hours,
        )
        self.erasure_jobs[job.job_id] = job
        return job

    def get_erasure_job(self, job_id: str) -> ErasureJob:
        job = self.erasure_jobs.get(job_id)
        if job is None:
            raise UnknownEntity(f"unknown erasure job {job_id}")
        return job

    def execute_erasure(self, job_id: str) -> ErasureJob:
        """Hard-delete everything derived from the expert's contributions in
        one unit of visibility, then prove it with a residual scan."""
        with self.lock.write_locked():
            job = self.get_erasure_job(job_id)
            if job.status is not JobStatus.PENDING:
                raise NotActive(f"erasure job {job_id} is {job.status.value}")
            expert_id = job.expert_id
            salt = self.ids.new_id()

            doomed_docs = {d.doc_id for d in self.documents.values() if d.expert_id == expert_id}
            doomed_chunks = {c.chunk_id for c in self.chunks.values() if c.doc_id in doomed_docs}
            doomed_artifacts = {
                a.artifact_id for a in self.artifacts.values() if a.expert_id == expert_id
            }
            statements = [self.artifacts[a].statement for a in doomed_artifacts]
            doc_texts = [self.documents[d].raw_text for d in doomed_docs]

            vectors_removed = self.index.delete_by_expert(expert_id, self.owner_of_doc)

            for artifact_id in doomed_artifacts:
                del self.artifacts[artifact_id]
            for chunk_id in doomed_chunks:
                del self.chunks[chunk_id]
            for doc_id in doomed_docs:
                del self.documents[doc_id]
                self.chunks_by_doc.pop(doc_id, None)
            self.corroboration.forget_docs(doomed_docs)

            sessions_removed = 0
            for session_id, session in list(self.sessions.items()):
                if session.expert_id == expert_id:
                    del self.sessions[session_id]
                    sessions_removed += 1

            # Consent records stay as deletion evidence but lose Active status.
            for consent_id, consent in list(self.consents.items()):
                if consent.expert_id == expert_id and consent.status is ConsentStatus.ACTIVE:
                    self.consents[consent_id] = governance.withdraw(consent)

            log_entries_removed = 0
            kept_interactions = []
            removed_queries = set()
            for entry in self.interactions:
                if set(entry.get("cited_artifact_ids", ())) & doomed_artifacts:
                    log_entries_removed += 1
                    removed_queries.add(entry["query_id"])
                else:
                    kept_interactions.append(entry)
            self.interactions = kept_interactions

            decisions_removed = 0
            kept_decisions = []
            for decision in self.decisions:
                if decision.artifact_id in doomed_artifacts:
                    decisions_removed += 1
                else:
                    kept_decisions.append(decision)
            self.decisions = kept_decisions

            kept_ratings = []
            for rating in self.ratings:
                if rating.get("query_id") in removed_queries:
                    continue
                kept_ratings.append(rating)
            self.ratings = kept_ratings

            # Audit log keeps content-free tombstones: ids replaced by
            # job-salted hashes so the evidence survives without the data.
            tombstoned = []
            for entry in self.audit_log:
                if entry.artifact_id in doomed_artifacts:
                    tombstoned.append(
                        AuditEntry(
                            artifact_id=salted_hash(salt, entry.artifact_id),
                            from_state=entry.from_state,
                            to_state=entry.to_state,
                            actor=(
                                salted_hash(salt, entry.actor)
                                if entry.actor == expert_id
                                else entry.actor
                            ),
                            at=entry.at,
                            tombstone=True,
                        )
                    )
                else:
                    tombstoned.append(entry)
            self.audit_log = tombstoned

            if expert_id in self.experts:
                del self.experts[expert_id]
                self.expert_stubs[expert_id] = {
                    "expert_id": expert_id,
                    "erased": True,
                    "erased_at": format_timestamp(self.clock.now()),
                }
            self.delegates.pop(expert_id, None)

            counts = {
                "artifacts": len(doomed_artifacts),
                "chunks": len(doomed_chunks),
                "documents": len(doomed_docs),
                "vectors": vectors_removed,
                "log_entries": log_entries_removed,
                "sessions": sessions_removed,
                "decisions": decisions_removed,
            }

            self._save_unlocked()
            residuals = self._residual_scan(statements, doc_texts, doomed_artifacts, doomed_docs)
            if residuals:
                failed = ErasureJob(
                    job_id=job.job_id,
                    expert_id=job.expert_id,
                    requested_at=job.requested_at,
                    deadline=job.deadline,
                    status=JobStatus.FAILED,
                    failure=f"residual content found: {residuals[0]}",
                )
                self.erasure_jobs[job_id] = failed
                self._save_unlocked()
                raise ScanFailed(failed.failure)

            proof = ErasureProof(
                counts=counts,
                completed_at=self.clock.now(),
                scan_clean=True,
                salt=salt,
                expert_id_hash=salted_hash(salt, expert_id),
            )
            completed = ErasureJob(
                job_id=job.job_id,
                expert_id=job.expert_id,
                requested_at=job.requested_at,
                deadline=job.deadline,
                status=JobStatus.COMPLETED,
                proof=proof,
            )
            self.erasure_jobs[job_id] = completed
            self._save_unlocked()
            return completed

    def _residual_scan(
        self,
        statements: list[str],
        doc_texts: list[str],
        artifact_ids: set[str],
        doc_ids: set[str],
    ) -> list[str]:
        """Byte-scan every persisted file for erased statement text, document
        text, and ids (both hex and raw-16-byte forms)."""
        needles: list[tuple[str, bytes]] = []
        for s in statements:
            needles.append(("statement", s.encode("utf-8")))
        for t in doc_texts:
            needles.append(("document-text", t.encode("utf-8")))
        for artifact_id in artifact_ids:
            needles.append(("artifact-id", artifact_id.encode("ascii")))
            needles.append(("artifact-id-raw", bytes.fromhex(artifact_id)))
        for doc_id in doc_ids:
            needles.append(("doc-id", doc_id.encode("ascii")))
        findings = []
        for path in sorted(self.data_dir.rglob("*")):
            if not path.is_file():
                continue
            blob = path.read_bytes()
            for kind, needle in needles:
                if needle and needle in blob:
                    findings.append(f"{kind} in {path.name}")
        return findings

    def overdue_erasure_jobs(self, now: Optional[datetime] = None) -> list[ErasureJob]:
        return governance.overdue_jobs(list(self.erasure_jobs.values()), now or self.clock.now())

    # -- persistence -------------------------------------------------------

    def _write_json(self, name: str, payload) -> None:
        path = self.data_dir / name
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
        os.replace(tmp, path)

    def save(self) -> None:
        with self.lock.read_locked():
            with self._save_mutex:
                self._save_unlocked()

    def _save_unlocked(self) -> None:
        self._write_json("experts.json", {k: v.to_dict() for k, v in self.experts.items()})
        self._write_json("expert_stubs.json", self.expert_stubs)
        self._write_json("documents.json", {k: v.to_dict() for k, v in self.documents.items()})
        self._write_json("chunks.json", {k: v.to_dict() for k, v in self.chunks.items()})
        self._write_json("artifacts.json", {k: v.to_dict() for k, v in self.artifacts.items()})
        self._write_json("sessions.json", {k: v.to_dict() for k, v in self.sessions.items()})
        self._write_json("consents.json", {k: v.to_dict() for k, v in self.consents.items()})
        self._write_json("delegates.json", {k: sorted(v) for k, v in self.delegates.items()})
        self._write_json("audit.json", [e.to_dict() for e in self.audit_log])
        self._write_json("corroboration.json", self.corroboration.to_dict())
        self._write_json("erasure_jobs.json", {k: v.to_dict() for k, v in self.erasure_jobs.items()})
        self._write_json("decisions.json", [d.to_dict() for d in self.decisions])
        self._write_json("interactions.json", self.interactions)
        self._write_json("ratings.json", self.ratings)
        self._write_json("surveys.json", self.surveys)
        if hasattr(self.ids, "get_state"):
            self._write_json("ids_state.json", self.ids.get_state())
        self.index.flush(str(self.data_dir / "index.xmnd"))

    def load(self) -> None:
        def read(name: str, default):
            path = self.data_dir / name
            if not path.exists():
                return default
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)

        with self.lock.write_locked():
            self.experts = {
                k: ExpertProfile.from_dict(v) for k, v in read("experts.json", {}).items()
            }
            self.expert_stubs = read("expert_stubs.json", {})
            self.documents = {
                k: SourceDocument.from_dict(v) for k, v in read("documents.json", {}).items()
            }
            self.chunks = {
                k: TranscriptChunk.from_dict(v) for k, v in read("chunks.json", {}).items()
            }
            self.chunks_by_doc = {}
            for c in sorted(self.chunks.values(), key=lambda c: (c.doc_id, c.seq)):
                self.chunks_by_doc.setdefault(c.doc_id, []).append(c.chunk_id)
            self.artifacts = {
                k: KnowledgeArtifact.from_dict(v) for k, v in read("artifacts.json", {}).items()
            }
            self.sessions = {
                k: CaptureSession.from_dict(v) for k, v in read("sessions.json", {}).items()
            }
            self.consents = {
                k: ConsentRecord.from_dict(v) for k, v in read("consents.json", {}).items()
            }
            self.delegates = {k: set(v) for k, v in read("delegates.json", {}).items()}
            self.audit_log = [AuditEntry.from_dict(e) for e in read("audit.json", [])]
            self.corroboration = CorroborationIndex.from_dict(read("corroboration.json", {}))
            self.erasure_jobs = {
                k: ErasureJob.from_dict(v) for k, v in read("erasure_jobs.json", {}).items()
            }
            self.decisions = [ValidationDecision.from_dict(d) for d in read("decisions.json", [])]
            self.interactions = read("interactions.json", [])
            self.ratings = read("ratings.json", [])
            self.surveys = read("surveys.json", [])
            ids_state = read("ids_state.json", None)
            if ids_state is not None and hasattr(self.ids, "set_state"):
                self.ids.set_state(ids_state)
            index_path = self.data_dir / "index.xmnd"
            if index_path.exists():
                self.index = VectorIndex.load(str(index_path))
