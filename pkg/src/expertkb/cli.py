"""Admin and batch front door.

Every verb maps onto one service endpoint (``--server``) or the same module
operation in-process (``--local``, the default). Plain-text output is
line-oriented and stable; ``--json`` switches to machine-readable output.
Exit codes: 0 success, 1 domain/API error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date, timedelta
from pathlib import Path

import httpx

from .config import Config, open_store
from .engine import Query, QueryEngine
from .errors import KnowledgeBaseError
from .evaluation import compute_metrics
from .extraction import export_queue, parse_queue_records
from .governance import ConsentStatus
from .index import MetadataFilter
from .ingestion import parse_front_matter
from .model import ArtifactState, Modality
from .report import render_text_table, write_report
from .runtime import parse_timestamp

BOOTSTRAP_RETENTION_DAYS = 3650


class CliError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expertkb", description="expert knowledge base operations"
    )
    parser.add_argument("--config", default="expertkb.json", help="configuration file path")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--local", action="store_true", help="operate in-process (default)")
    mode.add_argument("--server", metavar="URL", help="operate against a running server")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("serve", help="run the HTTP service")

    p = sub.add_parser("ingest", help="ingest front-matter documents and extract artifacts")
    p.add_argument("paths", nargs="+", help="files or directories of .txt documents")
    p.add_argument("--no-bootstrap", action="store_true", help="fail on unknown experts")

    p = sub.add_parser("extract", help="run extraction for a document")
    p.add_argument("doc_id", nargs="?", help="document id")
    p.add_argument("--all", action="store_true", help="every document without artifacts")

    p = sub.add_parser("queue", help="validation queue export/import")
    queue_sub = p.add_subparsers(dest="queue_action", required=True)
    q = queue_sub.add_parser("export", help="write pending artifacts as JSONL")
    q.add_argument("expert_id")
    q.add_argument("--out", help="output file (default stdout)")
    q = queue_sub.add_parser("import", help="apply verdicts from a reviewed JSONL file")
    q.add_argument("file")
    q.add_argument("--reviewer", required=True, help="principal recording the decisions")

    p = sub.add_parser("index", help="vector index maintenance")
    index_sub = p.add_subparsers(dest="index_action", required=True)
    index_sub.add_parser("rebuild", help="re-embed all validated artifacts and flush")

    p = sub.add_parser("query", help="ask a question")
    p.add_argument("question")
    p.add_argument("--k", type=int, default=0, help="top-k override")
    p.add_argument("--type", dest="artifact_type", help="artifact type filter")
    p.add_argument("--domain", help="domain tag filter")
    p.add_argument("--from-date", help="capture date lower bound (YYYY-MM-DD)")
    p.add_argument("--to-date", help="capture date upper bound (YYYY-MM-DD)")
    p.add_argument("--min-confidence", type=float, help="confidence threshold")

    p = sub.add_parser("erase", help="erase an expert's contributions")
    p.add_argument("expert_id")

    p = sub.add_parser("report", help="evaluation metrics report")
    p.add_argument("from_ts", metavar="from", help="window start (RFC 3339 or date)")
    p.add_argument("to_ts", metavar="to", help="window end")
    p.add_argument("--out", default="reports", help="output directory for files and figures")
    p.add_argument("--surveys", help="JSON file with extra survey scores")

    p = sub.add_parser("consent", help="consent management")
    consent_sub = p.add_subparsers(dest="consent_action", required=True)
    c = consent_sub.add_parser("grant")
    c.add_argument("--expert", required=True)
    c.add_argument("--tags", required=True, help="comma-separated domain tags")
    c.add_argument("--modalities", default="Interview,ThinkAloud,Corpus")
    c.add_argument("--principals", required=True, help="comma-separated principal ids")
    c.add_argument("--retention", required=True, help="retention end date YYYY-MM-DD")
    c.add_argument("--voice-clone", action="store_true")
    c.add_argument("--license-ref", default="")
    c = consent_sub.add_parser("withdraw")
    c.add_argument("consent_id")

    return parser


def _load_config(path: str) -> Config:
    if Path(path).exists():
        return Config.from_file(path)
    return Config.from_dict({})


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _iter_document_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("*.txt")))
        elif p.exists():
            files.append(p)
        else:
            raise CliError(f"no such path: {raw}")
    return files


def _build_filter(args) -> MetadataFilter:
    d: dict = {}
    if args.artifact_type:
        d["artifact_types"] = [args.artifact_type]
    if args.domain:
        d["domain_tags"] = [args.domain]
    if args.from_date or args.to_date:
        d["capture_date_range"] = [args.from_date or "0001-01-01", args.to_date or "9999-12-31"]
    if args.min_confidence is not None:
        d["min_confidence"] = args.min_confidence
    return MetadataFilter.from_dict(d)


class LocalRunner:
    """In-process verbs; side effects identical to the HTTP endpoints."""

    def __init__(self, config: Config):
        self.config = config
        self.store = open_store(config)

    def _bootstrap_principals(self) -> set[str]:
        ids = {p.principal_id for p in self.config.principals_by_hash.values()}
        ids.add(self.config.cli_principal)
        return ids

    def _ensure_consent(self, expert_id: str, tag: str) -> None:
        today = self.store.clock.today()
        for consent in self.store.consents.values():
            if (
                consent.expert_id == expert_id
                and consent.status is ConsentStatus.ACTIVE
                and consent.retention_until >= today
                and tag in consent.scope_domain_tags
            ):
                return
        self.store.grant_consent(
            expert_id=expert_id,
            scope_domain_tags={tag},
            scope_modalities=set(Modality),
            authorized_principals=self._bootstrap_principals(),
            retention_until=today + timedelta(days=BOOTSTRAP_RETENTION_DAYS),
            license_ref="bootstrap",
        )

    def ingest(self, args) -> dict:
        # Per document, the exact endpoint pipeline: ingest, extract, queue.
        files = _iter_document_files(args.paths)
        documents = 0
        artifacts = 0
        for path in files:
            content = path.read_text(encoding="utf-8")
            fm = parse_front_matter(content)
            expert = self.store.experts.get(fm.expert) or self.store.find_expert_by_name(fm.expert)
            if expert is None:
                if args.no_bootstrap:
                    raise CliError(f"unknown expert {fm.expert!r} in {path.name}")
                tag = fm.domain or "general"
                expert = self.store.register_expert(fm.expert, {tag})
            if not args.no_bootstrap:
                self._ensure_consent(expert.expert_id, fm.domain or sorted(expert.domain_tags)[0])
            doc, _chunks = self.store.ingest_document(
                text=fm.body,
                capture_date=fm.capture_date,
                expert_id=expert.expert_id,
                modality=fm.modality,
                domain_tag=fm.domain,
            )
            documents += 1
            for artifact in self.store.extract_document(doc.doc_id):
                self.store.submit_for_validation(artifact.artifact_id)
                artifacts += 1
        self.store.save()
        return {"documents": documents, "artifacts": artifacts}

    def extract(self, args) -> dict:
        if args.all:
            doc_ids = [
                d for d in self.store.documents if not self.store.document_has_artifacts(d)
            ]
        else:
            if not args.doc_id:
                raise CliError("doc_id or --all required")
            doc_ids = [args.doc_id]
        total = 0
        for doc_id in doc_ids:
            artifacts = self.store.extract_document(doc_id)
            for a in artifacts:
                self.store.submit_for_validation(a.artifact_id)
            total += len(artifacts)
        self.store.save()
        return {"documents": len(doc_ids), "artifacts": total}

    def queue_export(self, args) -> dict:
        queue = self.store.validation_queue(args.expert_id)
        payload = export_queue(queue)
        if args.out:
            Path(args.out).write_text(payload, encoding="utf-8")
        return {"count": len(queue), "payload": payload, "out": args.out}

    def queue_import(self, args) -> dict:
        records = parse_queue_records(Path(args.file).read_text(encoding="utf-8"))
        applied = 0
        for record in records:
            verdict = record.get("verdict")
            if not verdict:
                continue
            self.store.decide(
                artifact_id=record["artifact_id"],
                verdict=verdict,
                reviewer=args.reviewer,
                edited_statement=record.get("edited_statement"),
            )
            applied += 1
        self.store.save()
        return {"records": len(records), "applied": applied}

    def index_rebuild(self, args) -> dict:
        count = 0
        for artifact in sorted(self.store.artifacts.values(), key=lambda a: a.artifact_id):
            if artifact.state in (ArtifactState.VALIDATED, ArtifactState.INDEXED):
                self.store.index_artifact(artifact.artifact_id)
                count += 1
        self.store.save()
        return {"indexed": count}

    def query(self, args) -> dict:
        engine = QueryEngine(self.store, token_budget=self.config.token_budget)
        q = Query(
            query_id=self.store.ids.new_id(),
            principal=self.config.cli_principal,
            question=args.question,
            filter=_build_filter(args),
            k=args.k or self.config.k_default,
        )
        response = engine.answer(q)
        self.store.save()
        return response.to_dict()

    def erase(self, args) -> dict:
        job = self.store.request_erasure(args.expert_id)
        job = self.store.execute_erasure(job.job_id)
        return job.to_dict()

    def feedback(self, query_id: str, resolved: bool) -> dict:
        self.store.record_feedback(query_id, resolved)
        self.store.save()
        return {"query_id": query_id, "resolved_flag": resolved}

    def report(self, args) -> dict:
        surveys = list(self.store.surveys)
        if args.surveys:
            extra = json.loads(Path(args.surveys).read_text(encoding="utf-8"))
            now = self.store.clock.now()
            from .runtime import format_timestamp

            surveys.extend(
                {"score": int(s), "principal": "survey-file", "submitted_at": format_timestamp(now)}
                for s in extra
            )
        report = compute_metrics(
            self.store.interactions,
            self.store.decisions,
            self.store.ratings,
            surveys,
            (parse_timestamp(args.from_ts), parse_timestamp(args.to_ts)),
        )
        written = write_report(report, args.out, ratings=self.store.ratings)
        return {"report": report.to_dict(), "files": written, "text": render_text_table(report)}

    def consent_grant(self, args) -> dict:
        consent = self.store.grant_consent(
            expert_id=args.expert,
            scope_domain_tags=set(args.tags.split(",")),
            scope_modalities={Modality(m) for m in args.modalities.split(",")},
            authorized_principals=set(args.principals.split(",")),
            retention_until=date.fromisoformat(args.retention),
            voice_clone_consent=args.voice_clone,
            license_ref=args.license_ref,
        )
        self.store.save()
        return consent.to_dict()

    def consent_withdraw(self, args) -> dict:
        consent, job = self.store.withdraw_consent(args.consent_id)
        self.store.save()
        return {"consent": consent.to_dict(), "erasure_job": job.to_dict()}


class ServerRunner:
    """The same verbs over HTTP against a running service."""

    def __init__(self, config: Config, base_url: str, token: str):
        self.config = config
        self.client = httpx.Client(
            base_url=base_url,
            headers={"Authorization": f"Bearer {token}"},
            timeout=60.0,
        )

    def _call(self, method: str, path: str, **kwargs) -> dict:
        response = self.client.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                body = response.json()
            except Exception:
                body = {"code": "HttpError", "message": response.text}
            raise CliError(f"{body.get('code', response.status_code)}: {body.get('message', '')}")
        return response.json()

    def ingest(self, args) -> dict:
        # Server-mode ingest expects experts and consents to exist already
        # (register them via POST /experts and `consent grant`).
        files = _iter_document_files(args.paths)
        documents = 0
        artifacts = 0
        for path in files:
            content = path.read_text(encoding="utf-8")
            doc = self._call("POST", "/documents", json={"content": content})
            documents += 1
            result = self._call("POST", f"/extract/{doc['document']['doc_id']}", json={})
            artifacts += len(result["artifacts"])
        return {"documents": documents, "artifacts": artifacts}

    def extract(self, args) -> dict:
        if not args.doc_id:
            raise CliError("server mode requires an explicit doc_id")
        result = self._call("POST", f"/extract/{args.doc_id}", json={})
        return {"documents": 1, "artifacts": len(result["artifacts"])}

    def queue_export(self, args) -> dict:
        result = self._call("GET", "/validation/queue", params={"expert": args.expert_id})
        from .model import KnowledgeArtifact

        queue = [KnowledgeArtifact.from_dict(a) for a in result["queue"]]
        payload = export_queue(queue)
        if args.out:
            Path(args.out).write_text(payload, encoding="utf-8")
        return {"count": len(queue), "payload": payload, "out": args.out}

    def queue_import(self, args) -> dict:
        records = parse_queue_records(Path(args.file).read_text(encoding="utf-8"))
        applied = 0
        for record in records:
            verdict = record.get("verdict")
            if not verdict:
                continue
            self._call(
                "POST",
                f"/artifacts/{record['artifact_id']}/decision",
                json={"verdict": verdict, "edited_statement": record.get("edited_statement")},
            )
            applied += 1
        return {"records": len(records), "applied": applied}

    def index_rebuild(self, args) -> dict:
        raise CliError("index rebuild runs locally against the data directory")

    def query(self, args) -> dict:
        body = {"question": args.question, "k": args.k or 0}
        filt = _build_filter(args).to_dict()
        if filt:
            body["filter"] = filt
        return self._call("POST", "/query", json=body)

    def erase(self, args) -> dict:
        return self._call("POST", "/erasure", json={"expert_id": args.expert_id})

    def report(self, args) -> dict:
        result = self._call(
            "GET", "/metrics", params={"from": args.from_ts, "to": args.to_ts}
        )
        return {"report": result["report"], "rows": result["rows"]}

    def consent_grant(self, args) -> dict:
        return self._call(
            "POST",
            "/consents",
            json={
                "expert_id": args.expert,
                "scope_domain_tags": args.tags.split(","),
                "scope_modalities": args.modalities.split(","),
                "authorized_principals": args.principals.split(","),
                "retention_until": args.retention,
                "voice_clone_consent": args.voice_clone,
                "license_ref": args.license_ref,
            },
        )

    def consent_withdraw(self, args) -> dict:
        return self._call("DELETE", f"/consents/{args.consent_id}")


def _print_query_result(args, result: dict) -> None:
    if args.json:
        print(json.dumps(result, sort_keys=True))
        return
    print(result["answer"])
    if result["citations"]:
        print()
        header = f"{'n':>2}  {'artifact_id':32}  {'confidence':>10}  {'capture_date':12}  domain_tag"
        print(header)
        print("-" * len(header))
        for citation, disclosure in zip(result["citations"], result["disclosure"]):
            print(
                f"{citation['marker']:>2}  {citation['artifact_id']:32}  "
                f"{disclosure['confidence']:>10.2f}  {disclosure['capture_date']:12}  "
                f"{disclosure['domain_tag']}"
            )


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _load_config(args.config)

    try:
        if args.verb == "serve":
            from .service import serve

            serve(config)
            return 0

        runner: object
        if args.server:
            if not config.cli_token:
                raise CliError("server mode needs a cli_token entry in the configuration file")
            runner = ServerRunner(config, args.server, config.cli_token)
        else:
            runner = LocalRunner(config)

        if args.verb == "ingest":
            result = runner.ingest(args)
            _emit(args, result, [f"{result['documents']} documents, {result['artifacts']} artifacts extracted"])
        elif args.verb == "extract":
            result = runner.extract(args)
            _emit(args, result, [f"{result['documents']} documents, {result['artifacts']} artifacts extracted"])
        elif args.verb == "queue":
            if args.queue_action == "export":
                result = runner.queue_export(args)
                if args.out:
                    _emit(args, {"count": result["count"], "out": result["out"]},
                          [f"{result['count']} pending artifacts -> {result['out']}"])
                elif args.json:
                    print(json.dumps({"count": result["count"]}))
                else:
                    sys.stdout.write(result["payload"])
            else:
                result = runner.queue_import(args)
                _emit(args, result, [f"{result['applied']} decisions applied of {result['records']} records"])
        elif args.verb == "index":
            result = runner.index_rebuild(args)
            _emit(args, result, [f"{result['indexed']} artifacts indexed"])
        elif args.verb == "query":
            result = runner.query(args)
            _print_query_result(args, result)
        elif args.verb == "erase":
            result = runner.erase(args)
            counts = result.get("proof", {}).get("counts", {}) if result.get("proof") else {}
            removed = sum(counts.values())
            _emit(args, result, [f"{removed} items removed"])
        elif args.verb == "report":
            result = runner.report(args)
            if args.json:
                print(json.dumps(result.get("report", {}), sort_keys=True))
            elif "text" in result:
                sys.stdout.write(result["text"])
            else:
                for row in result.get("rows", []):
                    print(f"{row['dimension']}: {row['metric']} target {row['target']} computed {row['computed']} -> {row['met']}")
        elif args.verb == "consent":
            if args.consent_action == "grant":
                result = runner.consent_grant(args)
                consent_id = result.get("consent_id") or result.get("consent", {}).get("consent_id")
                _emit(args, result, [f"consent {consent_id} granted"])
            else:
                result = runner.consent_withdraw(args)
                _emit(args, result, [f"consent {result['consent']['consent_id']} withdrawn, "
                                     f"erasure job {result['erasure_job']['job_id']} queued"])
        else:  # pragma: no cover - argparse enforces the verb set
            parser.error(f"unknown verb {args.verb}")
        return 0
    except (KnowledgeBaseError, CliError) as exc:
        message = getattr(exc, "message", None) or str(exc)
        code = getattr(exc, "code", "CliError")
        if args.json:
            print(json.dumps({"error": code, "message": message}), file=sys.stderr)
        else:
            print(f"error ({code}): {message}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
