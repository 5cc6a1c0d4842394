"""HTTP surface: bearer-token auth, role checks, 1:1 delegation to module
operations, and the error-to-status mapping.

Mutating endpoints serialize through the store's writer lock; queries run
concurrently against a consistent snapshot.
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi import Query as FastApiQuery
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import Config, Principal
from .engine import Query, QueryEngine
from .errors import KnowledgeBaseError
from .evaluation import compute_metrics, report_rows
from .governance import export_signed_consent
from .index import MetadataFilter
from .model import Modality
from .runtime import parse_timestamp
from .store import KnowledgeStore

# Module error code -> HTTP status. 403 covers consent denials, 409 state
# conflicts and duplicates, 422 validation, 404 unknown ids.
ERROR_STATUS = {
    "Unauthorized": 403,
    "Forbidden": 403,
    "ConsentMissing": 403,
    "ConsentScopeViolation": 403,
    "IllegalTransition": 409,
    "Duplicate": 409,
    "DuplicateDocument": 409,
    "AlreadySet": 409,
    "NotActive": 409,
    "NotValidated": 409,
    "InvalidDuration": 422,
    "MissingElement": 422,
    "PastRetention": 422,
    "OutOfRange": 422,
    "MissingEditText": 422,
    "EmptyDocument": 422,
    "EmptyQuestion": 422,
    "BadWindow": 422,
    "EmptyInput": 422,
    "DimensionMismatch": 422,
    "SampleTooLarge": 422,
    "EmptyWindow": 422,
    "InvalidEncoding": 422,
    "UnknownQuery": 404,
    "UnknownEntity": 404,
    "BackendFailure": 502,
    "NotIndexed": 500,
    "ScanFailed": 500,
    "CorruptFile": 500,
    "VersionMismatch": 500,
}

# Endpoint inventory: (method, path, operation). The bijection test asserts
# each operation is reachable through exactly one endpoint.
ROUTES = [
    ("POST", "/experts", "core-model.register_expert"),
    ("POST", "/consents", "governance.grant_consent"),
    ("DELETE", "/consents/{consent_id}", "governance.withdraw_consent"),
    ("POST", "/sessions", "ingestion.register_session"),
    ("POST", "/documents", "ingestion.ingest_document"),
    ("POST", "/extract/{doc_id}", "extraction.process_document"),
    ("GET", "/validation/queue", "extraction.validation_queue"),
    ("POST", "/artifacts/{artifact_id}/decision", "extraction.decide"),
    ("POST", "/index/{artifact_id}", "vector-index.upsert"),
    ("POST", "/query", "query-engine.answer"),
    ("POST", "/feedback/{query_id}", "query-engine.record_feedback"),
    ("POST", "/erasure", "governance.execute_erasure"),
    ("GET", "/erasure/{job_id}", "governance.get_erasure_job"),
    ("GET", "/metrics", "evaluation.compute_metrics"),
    ("POST", "/ratings", "evaluation.record_rating"),
    ("POST", "/surveys", "evaluation.record_survey"),
]


class ExpertBody(BaseModel):
    display_name: str
    domain_tags: list[str]


class ConsentBody(BaseModel):
    expert_id: str
    scope_domain_tags: list[str]
    scope_modalities: list[str]
    authorized_principals: list[str]
    retention_until: str  # YYYY-MM-DD
    voice_clone_consent: bool = False
    license_ref: str = ""


class SessionBody(BaseModel):
    expert_id: str
    modality: str
    scheduled_minutes: int
    consent_id: Optional[str] = None


class DocumentBody(BaseModel):
    # Either a front-matter document in `content`, or explicit fields.
    content: Optional[str] = None
    session_id: Optional[str] = None
    expert_id: Optional[str] = None
    modality: Optional[str] = None
    capture_date: Optional[str] = None
    domain_tag: Optional[str] = None
    text: Optional[str] = None


class DecisionBody(BaseModel):
    verdict: str
    edited_statement: Optional[str] = None


class QueryBody(BaseModel):
    question: str
    k: int = Field(default=0, ge=0)  # 0 means "use the configured default"
    filter: Optional[dict] = None


class FeedbackBody(BaseModel):
    resolved: bool


class ErasureBody(BaseModel):
    expert_id: str


class RatingBody(BaseModel):
    sample_id: str
    query_id: str
    rating: int
    rater_class: str = "expert"


class SurveyBody(BaseModel):
    score: int


def create_app(store: KnowledgeStore, config: Config) -> FastAPI:
    app = FastAPI(title="expertkb", version="0.1.0")
    engine = QueryEngine(store, token_budget=config.token_budget)

    def authenticate(authorization: Optional[str] = Header(default=None)) -> Principal:
        if not authorization or not authorization.startswith("Bearer "):
            raise _http_401()
        principal = config.lookup_token(authorization.removeprefix("Bearer "))
        if principal is None:
            raise _http_401()
        return principal

    def _http_401():
        from fastapi import HTTPException

        return HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.exception_handler(KnowledgeBaseError)
    async def domain_error_handler(request: Request, exc: KnowledgeBaseError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": exc.message}
        )

    @app.post("/experts")
    def register_expert(body: ExpertBody, principal: Principal = Depends(authenticate)):
        expert = store.register_expert(body.display_name, set(body.domain_tags))
        store.save()
        return expert.to_dict()

    @app.post("/consents")
    def grant_consent(body: ConsentBody, principal: Principal = Depends(authenticate)):
        consent = store.grant_consent(
            expert_id=body.expert_id,
            scope_domain_tags=set(body.scope_domain_tags),
            scope_modalities={Modality(m) for m in body.scope_modalities},
            authorized_principals=set(body.authorized_principals),
            retention_until=date.fromisoformat(body.retention_until),
            voice_clone_consent=body.voice_clone_consent,
            license_ref=body.license_ref,
        )
        store.save()
        return json.loads(export_signed_consent(consent, store.signer))

    @app.delete("/consents/{consent_id}")
    def withdraw_consent(consent_id: str, principal: Principal = Depends(authenticate)):
        consent = store.get_consent(consent_id)
        _require_self_or_admin(principal, consent.expert_id)
        withdrawn, job = store.withdraw_consent(consent_id)
        store.save()
        return {"consent": withdrawn.to_dict(), "erasure_job": job.to_dict()}

    @app.post("/sessions")
    def register_session(body: SessionBody, principal: Principal = Depends(authenticate)):
        session = store.register_session(
            expert_id=body.expert_id,
            modality=Modality(body.modality),
            scheduled_minutes=body.scheduled_minutes,
            consent_id=body.consent_id,
        )
        store.save()
        return session.to_dict()

    @app.post("/documents")
    def ingest_document(body: DocumentBody, principal: Principal = Depends(authenticate)):
        if body.content is not None:
            from .ingestion import parse_front_matter

            fm = parse_front_matter(body.content)
            expert = store.experts.get(fm.expert) or store.find_expert_by_name(fm.expert)
            if expert is None:
                from .errors import UnknownEntity

                raise UnknownEntity(f"unknown expert {fm.expert!r} in front matter")
            doc, chunks = store.ingest_document(
                text=fm.body,
                capture_date=fm.capture_date,
                expert_id=expert.expert_id,
                modality=fm.modality,
                domain_tag=fm.domain,
            )
        else:
            doc, chunks = store.ingest_document(
                text=body.text or "",
                capture_date=date.fromisoformat(body.capture_date),
                expert_id=body.expert_id,
                modality=Modality(body.modality) if body.modality else None,
                domain_tag=body.domain_tag,
                session_id=body.session_id,
            )
        store.save()
        return {"document": doc.to_dict(), "chunk_count": len(chunks)}

    @app.post("/extract/{doc_id}")
    def extract(doc_id: str, principal: Principal = Depends(authenticate)):
        from .errors import Duplicate

        if store.document_has_artifacts(doc_id):
            raise Duplicate(f"document {doc_id} already extracted")
        artifacts = store.extract_document(doc_id)
        submitted = [store.submit_for_validation(a.artifact_id) for a in artifacts]
        store.save()
        return {"artifacts": [a.to_dict() for a in submitted]}

    @app.get("/validation/queue")
    def validation_queue(expert: str, principal: Principal = Depends(authenticate)):
        queue = store.validation_queue(expert)
        return {"queue": [a.to_dict() for a in queue]}

    @app.post("/artifacts/{artifact_id}/decision")
    def decide(
        artifact_id: str, body: DecisionBody, principal: Principal = Depends(authenticate)
    ):
        results = store.decide(
            artifact_id=artifact_id,
            verdict=body.verdict,
            reviewer=principal.principal_id,
            edited_statement=body.edited_statement,
        )
        store.save()
        return {"artifacts": [a.to_dict() for a in results]}

    @app.post("/index/{artifact_id}")
    def index_artifact(artifact_id: str, principal: Principal = Depends(authenticate)):
        record = store.index_artifact(artifact_id)
        store.save()
        return {
            "artifact_id": record.artifact_id,
            "dimension": len(record.vector),
            "metadata": record.metadata.to_dict(),
        }

    @app.post("/query")
    def query(body: QueryBody, principal: Principal = Depends(authenticate)):
        q = Query(
            query_id=store.ids.new_id(),
            principal=principal.principal_id,
            question=body.question,
            filter=MetadataFilter.from_dict(body.filter or {}),
            k=body.k or config.k_default,
        )
        response = engine.answer(q)
        store.save()
        return response.to_dict()

    @app.post("/feedback/{query_id}")
    def feedback(query_id: str, body: FeedbackBody, principal: Principal = Depends(authenticate)):
        store.record_feedback(query_id, body.resolved)
        store.save()
        return {"query_id": query_id, "resolved_flag": body.resolved}

    @app.post("/erasure")
    def erase(body: ErasureBody, principal: Principal = Depends(authenticate)):
        _require_self_or_admin(principal, body.expert_id)
        job = store.request_erasure(body.expert_id)
        job = store.execute_erasure(job.job_id)
        return job.to_dict()

    @app.get("/erasure/{job_id}")
    def erasure_status(job_id: str, principal: Principal = Depends(authenticate)):
        return store.get_erasure_job(job_id).to_dict()

    @app.get("/metrics")
    def metrics(
        from_: str = FastApiQuery(alias="from"),
        to: str = FastApiQuery(),
        principal: Principal = Depends(authenticate),
    ):
        _require_admin(principal)
        report = compute_metrics(
            store.interactions,
            store.decisions,
            store.ratings,
            store.surveys,
            (parse_timestamp(from_), parse_timestamp(to)),
        )
        return {"report": report.to_dict(), "rows": report_rows(report)}

    @app.post("/ratings")
    def rate(body: RatingBody, principal: Principal = Depends(authenticate)):
        store.record_rating(
            sample_id=body.sample_id,
            query_id=body.query_id,
            rating=body.rating,
            rater=principal.principal_id,
            rater_class=body.rater_class,
        )
        store.save()
        return {"recorded": True}

    @app.post("/surveys")
    def survey(body: SurveyBody, principal: Principal = Depends(authenticate)):
        store.record_survey(body.score, principal.principal_id)
        store.save()
        return {"recorded": True}

    def _require_admin(principal: Principal):
        from .errors import Forbidden

        if principal.role != "Admin":
            raise Forbidden("requires Admin role")

    def _require_self_or_admin(principal: Principal, expert_id: str):
        from .errors import Forbidden

        if principal.role == "Admin":
            return
        if principal.role == "Expert" and principal.principal_id == expert_id:
            return
        raise Forbidden("requires the expert themself or an Admin")

    return app


def dump_openapi(app: FastAPI, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(app.openapi(), fh, indent=2, sort_keys=True)


def serve(config: Config) -> None:
    import uvicorn

    from .config import open_store

    store = open_store(config)
    app = create_app(store, config)
    host, _, port = config.listen_address.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="info")
