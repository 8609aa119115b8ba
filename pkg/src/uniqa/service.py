"""Session-aware QA service over the pipeline."""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import EngineError, NotFoundError, ProviderError, ValidationError
from .pipeline import PipelineConfig, SessionStore, answer_question
from .retrieval import VectorIndex, load_index


class AskBody(BaseModel):
    question: str


def _status_for(exc: EngineError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ValidationError):
        return 400
    if isinstance(exc, ProviderError):
        return 502
    return 500


def create_app(config: PipelineConfig, index: VectorIndex | None = None,
               store: SessionStore | None = None) -> FastAPI:
    if index is None:
        if not config.index_path:
            raise ValidationError("service requires config.index_path")
        index = load_index(config.index_path)
    if store is None:
        db = config.sessions_db or str(Path(config.index_path or ".") / "sessions.db")
        store = SessionStore(db)

    app = FastAPI(title="uniqa", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.index = index
    app.state.store = store

    # Requests within one session are serialized; history append is order-sensitive.
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    @app.exception_handler(EngineError)
    async def engine_error_handler(_: Request, exc: EngineError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": {"stage": exc.stage, "message": exc.message}},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "clues": len(index)}

    @app.post("/v1/sessions")
    def create_session():
        session = store.create()
        return {"session_id": session.session_id}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        return {
            "session_id": session.session_id,
            "turns": [{"question": t.question, "answer": t.answer}
                      for t in session.turns],
        }

    @app.post("/v1/sessions/{session_id}/ask")
    def ask(session_id: str, body: AskBody):
        with lock_for(session_id):
            session = store.get(session_id)
            envelope = answer_question(session, body.question, config, index)
            store.append_turn(session_id, body.question, envelope.answer.text)
        return envelope.to_dict()

    @app.get("/v1/clues/{clue_id}")
    def get_clue(clue_id: str):
        clue = index.clue(clue_id)
        return {"id": clue.id, "modality": clue.modality, "text": clue.text,
                "source_ref": clue.source_ref}

    return app


def serve(config: PipelineConfig, host: str = "127.0.0.1", port: int = 8600) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port)
