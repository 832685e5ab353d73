"""HTTP service for ranking and human screening of candidate links.

Read endpoints serve rankings from the immutable engine; screening decisions
go through the append-only session store. Responses are JSON unless the
tab-separated variant is requested explicitly.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .pipeline import LinkageEngine
from .screening import DEFAULT_SCREENING_DEPTH, ScreeningError, SessionStore
from .similarity import MethodConfig, UnrankableRegistrationError, normalize_measure

# Shown to the reviewer alongside each candidate; advisory, never enforced.
CONFIRMATION_CHECKLIST = (
    "Compare the number of participants",
    "Compare the study design",
    "Compare the study dates and length",
)

DEFAULT_CONFIG = MethodConfig("term", "tfidf", "cosine")


class DecisionBody(BaseModel):
    pmid: str
    decision: str
    note: str | None = None


def _snippet(text: str, limit: int = 400) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 1].rstrip() + "…"


def create_app(
    engine: LinkageEngine,
    store: SessionStore,
    default_config: MethodConfig = DEFAULT_CONFIG,
    default_k: int = DEFAULT_SCREENING_DEPTH,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="trialink screening service")

    @app.exception_handler(ScreeningError)
    async def _screening_error(request: Request, exc: ScreeningError):
        status = {"invalid_argument": 400, "not_found": 404, "conflict": 409}[exc.code]
        return JSONResponse(status_code=status, content={"code": exc.code, "message": exc.message})

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"code": code, "message": message})

    def resolve_config(representation: str | None, scheme: str | None, measure: str | None) -> MethodConfig:
        return MethodConfig(
            representation=representation or default_config.representation,
            scheme=scheme or default_config.scheme,
            measure=normalize_measure(measure) if measure else default_config.measure,
        )

    def registration_panel(nct_id: str) -> dict:
        reg = engine.registration(nct_id)
        return {
            "nct_id": reg.nct_id,
            "brief_title": reg.brief_title,
            "official_title": reg.official_title,
            "brief_summary": _snippet(reg.brief_summary, 1200),
            "conditions": list(reg.conditions),
            "received_date": reg.received_date.isoformat() if reg.received_date else None,
            "completion_date": reg.completion_date.isoformat() if reg.completion_date else None,
            "study_type": reg.study_type,
            "phase": reg.phase,
            "enrollment": reg.enrollment,
            "overall_status": reg.overall_status,
        }

    @app.get("/api/registrations/{nct_id}/candidates")
    def get_candidates(
        nct_id: str,
        k: int | None = Query(default=None, ge=1),
        representation: str | None = None,
        scheme: str | None = None,
        measure: str | None = None,
    ):
        if not engine.has_registration(nct_id):
            return error(404, "not_found", f"unknown registration: {nct_id}")
        try:
            config = resolve_config(representation, scheme, measure)
            depth = k or default_k
            ranked = engine.rank(nct_id, config, k=depth)
        except UnrankableRegistrationError as exc:
            return error(422, "unrankable", str(exc))
        except ValueError as exc:
            return error(400, "invalid_argument", str(exc))

        session = store.open_session(nct_id, config, depth, [pmid for pmid, _ in ranked.ranking])
        query = engine.query_vector(nct_id, config.representation, config.scheme)
        index = engine.index(config.representation, config.scheme)
        vocab_keys = index.vocabulary.keys
        query_support = set(query.indices)
        row_of = {pmid: row for row, pmid in enumerate(index.pmids)}

        candidates = []
        for position, (pmid, score) in enumerate(ranked.ranking, start=1):
            article = engine.article(pmid)
            vector = index.vectors[row_of[pmid]]
            shared = sorted(vocab_keys[i] for i in query_support.intersection(vector.indices))
            decision = session.decisions.get(pmid)
            candidates.append(
                {
                    "rank": position,
                    "pmid": pmid,
                    "score": score,
                    "title": article.title,
                    "abstract_snippet": _snippet(article.abstract),
                    "publication_date": article.publication_date.isoformat()
                    if article.publication_date
                    else None,
                    "shared_features": shared,
                    "decision": decision.to_dict() if decision else None,
                }
            )
        return {
            "nct_id": nct_id,
            "config": config.to_dict(),
            "k": depth,
            "registration": registration_panel(nct_id),
            "checklist": list(CONFIRMATION_CHECKLIST),
            "session": session.to_dict(),
            "candidates": candidates,
        }

    @app.post("/api/sessions/{nct_id}/decisions")
    def post_decision(nct_id: str, body: DecisionBody):
        session = store.record_decision(nct_id, body.pmid, body.decision, body.note)
        return session.to_dict()

    @app.post("/api/sessions/{nct_id}/reopen")
    def reopen_session(nct_id: str):
        return store.reopen(nct_id).to_dict()

    @app.get("/api/sessions/{nct_id}")
    def get_session(nct_id: str):
        return store.get(nct_id).to_dict()

    @app.get("/api/sessions")
    def list_sessions(status: str | None = None):
        sessions = (
            store.open_queue()
            if status == "open"
            else sorted(store.sessions.values(), key=lambda s: (s.opened_at, s.nct_id))
        )
        return {
            "sessions": [
                {
                    "nct_id": s.nct_id,
                    "status": s.status,
                    "opened_at": s.opened_at,
                    "k": s.k,
                    "n_candidates": len(s.candidate_pmids),
                    "n_decided": len(s.decisions),
                    "confirmed_pmid": s.confirmed_pmid,
                    "brief_title": engine.registration(s.nct_id).brief_title
                    if engine.has_registration(s.nct_id)
                    else "",
                }
                for s in sessions
            ]
        }

    @app.get("/api/progress")
    def get_progress():
        return store.progress()

    @app.get("/api/links/confirmed")
    def confirmed_links(format: str = "json"):
        links = store.confirmed_links()
        if format == "tsv":
            lines = ["nct_id\tpmid\tdecided_at"]
            lines += [f"{l.nct_id}\t{l.pmid}\t{l.decided_at}" for l in links]
            return PlainTextResponse("\n".join(lines) + "\n")
        return {"links": [l.to_dict() for l in links]}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
