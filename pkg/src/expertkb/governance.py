"""Consent ledger, access enforcement, retention expiry, and the complete
erasure pathway with audit proof.

Every read of an indexed artifact is gated by check_access; erasure is a
synchronous job that hard-deletes across all stores, then proves the result
with a residual byte scan.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Optional

from .errors import MissingElement, NotActive, PastRetention
from .model import KnowledgeArtifact, Modality
from .runtime import format_timestamp, parse_timestamp

DEFAULT_SLA_WINDOW_HOURS = 72


class ConsentStatus(str, Enum):
    ACTIVE = "Active"
    WITHDRAWN = "Withdrawn"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class ConsentRecord:
    """The four consent elements: scope (domain tags), uses (modalities),
    access list (principals), and retention. Voice-clone consent is a separate
    flag and never affects access decisions."""

    consent_id: str
    expert_id: str
    scope_domain_tags: frozenset[str]
    scope_modalities: frozenset[Modality]
    authorized_principals: frozenset[str]
    retention_until: date
    signed_at: datetime
    voice_clone_consent: bool = False
    status: ConsentStatus = ConsentStatus.ACTIVE
    license_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "consent_id": self.consent_id,
            "expert_id": self.expert_id,
            "scope_domain_tags": sorted(self.scope_domain_tags),
            "scope_modalities": sorted(m.value for m in self.scope_modalities),
            "authorized_principals": sorted(self.authorized_principals),
            "retention_until": self.retention_until.isoformat(),
            "signed_at": format_timestamp(self.signed_at),
            "voice_clone_consent": self.voice_clone_consent,
            "status": self.status.value,
            "license_ref": self.license_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConsentRecord":
        return cls(
            consent_id=d["consent_id"],
            expert_id=d["expert_id"],
            scope_domain_tags=frozenset(d["scope_domain_tags"]),
            scope_modalities=frozenset(Modality(m) for m in d["scope_modalities"]),
            authorized_principals=frozenset(d["authorized_principals"]),
            retention_until=date.fromisoformat(d["retention_until"]),
            signed_at=parse_timestamp(d["signed_at"]),
            voice_clone_consent=d.get("voice_clone_consent", False),
            status=ConsentStatus(d["status"]),
            license_ref=d.get("license_ref", ""),
        )


def build_consent(
    consent_id: str,
    expert_id: str,
    scope_domain_tags: set[str],
    scope_modalities: set[Modality],
    authorized_principals: set[str],
    retention_until: date,
    signed_at: datetime,
    today: date,
    voice_clone_consent: bool = False,
    license_ref: str = "",
) -> ConsentRecord:
    """Validate the four mandatory elements and mint an Active consent."""
    if not scope_domain_tags:
        raise MissingElement("scope_domain_tags (consent element 1: scope) is required")
    if not scope_modalities:
        raise MissingElement("scope_modalities (consent element 2: intended uses) is required")
    if not authorized_principals:
        raise MissingElement("authorized_principals (consent element 3: access list) is required")
    if retention_until is None:
        raise MissingElement("retention_until (consent element 4: retention) is required")
    if retention_until <= today:
        raise PastRetention(f"retention_until {retention_until} is not in the future")
    return ConsentRecord(
        consent_id=consent_id,
        expert_id=expert_id,
        scope_domain_tags=frozenset(scope_domain_tags),
        scope_modalities=frozenset(scope_modalities),
        authorized_principals=frozenset(authorized_principals),
        retention_until=retention_until,
        signed_at=signed_at,
        voice_clone_consent=voice_clone_consent,
        status=ConsentStatus.ACTIVE,
        license_ref=license_ref,
    )


@dataclass(frozen=True)
class AccessDecision:
    allowed: bool
    reason: str  # machine-readable; "Allowed" on success

    def __bool__(self) -> bool:
        return self.allowed


DENY_NO_CONSENT = "NoConsent"
DENY_WITHDRAWN = "ConsentWithdrawn"
DENY_EXPIRED = "ConsentExpired"
DENY_RETENTION = "RetentionExpired"
DENY_PRINCIPAL = "PrincipalNotAuthorized"
DENY_TAG = "TagOutOfScope"


def _deny_reason(consent: ConsentRecord, principal: str, domain_tag: str, today: date) -> str:
    if consent.status is ConsentStatus.WITHDRAWN:
        return DENY_WITHDRAWN
    if consent.status is ConsentStatus.EXPIRED:
        return DENY_EXPIRED
    if consent.retention_until < today:
        return DENY_RETENTION
    if principal not in consent.authorized_principals:
        return DENY_PRINCIPAL
    if domain_tag not in consent.scope_domain_tags:
        return DENY_TAG
    return "Allowed"


def check_access(
    principal: str,
    artifact: KnowledgeArtifact,
    consents: list[ConsentRecord],
    today: date,
) -> AccessDecision:
    """Allow iff some Active consent of the artifact's expert authorizes the
    principal, covers the artifact's domain tag, and retention has not lapsed.

    Deny is a result, not an error; the reason comes from the most recently
    signed consent so callers get a stable explanation.
    """
    own = sorted(
        (c for c in consents if c.expert_id == artifact.expert_id),
        key=lambda c: (c.signed_at, c.consent_id),
    )
    if not own:
        return AccessDecision(False, DENY_NO_CONSENT)
    for consent in own:
        reason = _deny_reason(consent, principal, artifact.domain_tag, today)
        if reason == "Allowed" and consent.status is ConsentStatus.ACTIVE:
            return AccessDecision(True, "Allowed")
    return AccessDecision(False, _deny_reason(own[-1], principal, artifact.domain_tag, today))


def withdraw(consent: ConsentRecord) -> ConsentRecord:
    if consent.status is not ConsentStatus.ACTIVE:
        raise NotActive(f"consent {consent.consent_id} is {consent.status.value}")
    return replace(consent, status=ConsentStatus.WITHDRAWN)


def expire(consent: ConsentRecord) -> ConsentRecord:
    if consent.status is not ConsentStatus.ACTIVE:
        raise NotActive(f"consent {consent.consent_id} is {consent.status.value}")
    return replace(consent, status=ConsentStatus.EXPIRED)


class JobStatus(str, Enum):
    PENDING = "Pending"
    COMPLETED = "Completed"
    FAILED = "Failed"


@dataclass(frozen=True)
class ErasureProof:
    """Deletion evidence without knowledge content: counts, salted id hashes,
    timestamps, and the residual-scan verdict."""

    counts: dict
    completed_at: datetime
    scan_clean: bool
    salt: str
    expert_id_hash: str

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "completed_at": format_timestamp(self.completed_at),
            "scan_clean": self.scan_clean,
            "salt": self.salt,
            "expert_id_hash": self.expert_id_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErasureProof":
        return cls(
            counts=dict(d["counts"]),
            completed_at=parse_timestamp(d["completed_at"]),
            scan_clean=d["scan_clean"],
            salt=d["salt"],
            expert_id_hash=d["expert_id_hash"],
        )


@dataclass(frozen=True)
class ErasureJob:
    job_id: str
    expert_id: str
    requested_at: datetime
    deadline: datetime
    status: JobStatus = JobStatus.PENDING
    proof: Optional[ErasureProof] = None
    failure: str = ""

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "expert_id": self.expert_id,
            "requested_at": format_timestamp(self.requested_at),
            "deadline": format_timestamp(self.deadline),
            "status": self.status.value,
            "proof": self.proof.to_dict() if self.proof else None,
            "failure": self.failure,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErasureJob":
        return cls(
            job_id=d["job_id"],
            expert_id=d["expert_id"],
            requested_at=parse_timestamp(d["requested_at"]),
            deadline=parse_timestamp(d["deadline"]),
            status=JobStatus(d["status"]),
            proof=ErasureProof.from_dict(d["proof"]) if d.get("proof") else None,
            failure=d.get("failure", ""),
        )


def new_erasure_job(
    job_id: str, expert_id: str, requested_at: datetime, sla_window_hours: int
) -> ErasureJob:
    return ErasureJob(
        job_id=job_id,
        expert_id=expert_id,
        requested_at=requested_at,
        deadline=requested_at + timedelta(hours=sla_window_hours),
    )


def salted_hash(salt: str, value: str) -> str:
    return hashlib.sha256(f"{salt}:{value}".encode("utf-8")).hexdigest()


def overdue_jobs(jobs: list[ErasureJob], now: datetime) -> list[ErasureJob]:
    """Pending jobs past their SLA deadline; the scheduler alerts on these."""
    return [j for j in jobs if j.status is JobStatus.PENDING and now > j.deadline]


# -- signed consent export ----------------------------------------------------


class ConsentSigner:
    """Pluggable signing seam; the mock is a keyed hash (HMAC-SHA256)."""

    def __init__(self, key: bytes):
        self._key = key

    def sign(self, payload: bytes) -> str:
        return hmac.new(self._key, payload, hashlib.sha256).hexdigest()

    def verify(self, payload: bytes, signature: str) -> bool:
        return hmac.compare_digest(self.sign(payload), signature)


def export_signed_consent(consent: ConsentRecord, signer: ConsentSigner) -> str:
    body = consent.to_dict()
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return json.dumps({"consent": body, "signature": signer.sign(payload)}, sort_keys=True)


def verify_signed_consent(document: str, signer: ConsentSigner) -> ConsentRecord:
    parsed = json.loads(document)
    payload = json.dumps(parsed["consent"], sort_keys=True, separators=(",", ":")).encode("utf-8")
    if not signer.verify(payload, parsed["signature"]):
        raise ValueError("consent signature does not verify")
    return ConsentRecord.from_dict(parsed["consent"])
