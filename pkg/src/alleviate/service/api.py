"""HTTP surface. Thin: every route delegates to AppState and translates
domain errors into {code, message} bodies."""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from alleviate.service.state import AppState, StateError

_ERROR_CODES = {404: "not_found", 409: "conflict", 422: "validation", 401: "unauthorized"}


class NoteIn(BaseModel):
    patient_id: str
    note_id: str
    text: str


class SessionIn(BaseModel):
    patient_id: str


class MessageIn(BaseModel):
    text: str


class FeedbackIn(BaseModel):
    message_id: str
    source: Literal["patient", "clinician"]
    signal: Literal["positive", "negative"]


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": _ERROR_CODES.get(status, "error"), "message": message},
    )


def create_app(state: AppState) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_app):
        yield
        state.close()

    app = FastAPI(title="alleviate", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(StateError)
    async def on_state_error(_req: Request, err: StateError):
        return _error(err.http_status, str(err))

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_req: Request, err: RequestValidationError):
        return _error(422, str(err.errors()[:1]))

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        token = state.config.bearer_token
        if token and request.headers.get("Authorization") != f"Bearer {token}":
            return _error(401, "missing or wrong bearer token")
        return await call_next(request)

    @app.post("/v1/notes")
    def post_note(body: NoteIn):
        added, warnings = state.ingest_note(body.patient_id, body.note_id, body.text)
        return {"triples_added": added, "warnings": warnings}

    @app.post("/v1/sessions")
    def post_session(body: SessionIn):
        return {"session_id": state.open_session(body.patient_id)}

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        return state.post_message(session_id, body.text)

    @app.post("/v1/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackIn):
        q_after = state.apply_feedback(session_id, body.message_id, body.source, body.signal)
        return {"q_after": q_after}

    @app.get("/v1/alerts")
    def get_alerts(since_seq: int = 0):
        return {"alerts": state.alerts_since(since_seq)}

    @app.get("/v1/patients/{patient_id}/graph")
    def get_graph(patient_id: str):
        return PlainTextResponse(state.graph_tsv(patient_id))

    @app.get("/v1/sessions/{session_id}/explanations")
    def get_explanations(session_id: str):
        return {"explanations": state.explanations(session_id)}

    @app.get("/v1/health")
    def get_health():
        return {"status": "ok", "uptime_s": round(state.uptime_s(), 3)}

    return app
