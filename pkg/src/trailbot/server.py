"""HTTP service: chat, trail browsing, admin ingestion, and metrics.

All handlers return plain JSON matching the schema files published under
``schemas/`` in the repository; tests fuzz every endpoint against those
schemas. With mock backends enabled the whole API works offline.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import ServerConfig
from .embeddings import HashingEmbedder, RemoteEmbedder
from .errors import (
    BackendError,
    FilterParseError,
    IngestError,
    NotFoundError,
    ValidationError,
)
from .filter_dsl import parse_filter
from .gateway import RemoteLlm, ScriptedMockLlm, load_mock_script
from .index import ReviewSearchIndex, TrailReviewCache
from .ingest import import_corpus
from .orchestrator import ChatEngine, EngineConfig, SessionStore
from .store import TrailStore

logger = logging.getLogger("trailbot.server")

SNIPPET_CHARS = 160


class ChatRequest(BaseModel):
    session_id: str | None = None
    message: str


class IngestRequest(BaseModel):
    trails_path: str
    reviews_path: str


def build_engine(config: ServerConfig) -> ChatEngine:
    store = TrailStore(config.store_path)
    if config.embedder_endpoint:
        embedder = RemoteEmbedder(
            config.embedder_endpoint,
            model_name=config.embedder_model,
            dim=config.embedder_dim,
        )
    else:
        embedder = HashingEmbedder(dim=config.embedder_dim)
    if config.llm_mock:
        script = load_mock_script(config.llm_mock_script) if config.llm_mock_script else []
        llm = ScriptedMockLlm(
            script=script,
            echo_mode=config.llm_mock_echo,
            delay_ms_per_char=config.llm_mock_delay_ms_per_char,
        )
    else:
        llm = RemoteLlm(config.llm_endpoint, model=config.llm_model)
    index = ReviewSearchIndex(store, embedder, TrailReviewCache(config.cache_capacity))
    engine = ChatEngine(
        store,
        index,
        llm,
        EngineConfig(k=config.k, max_prompt_chars=config.max_prompt_chars),
    )
    if config.ingest_trails and config.ingest_reviews:
        import_corpus(config.ingest_trails, config.ingest_reviews, store)
    return engine


def _trail_dict(trail) -> dict:
    return {
        "id": trail.id,
        "name": trail.name,
        "town": trail.town,
        "length_miles": trail.length_miles,
        "difficulty": trail.difficulty,
        "activities": sorted(trail.activities),
        "pets_allowed": trail.pets_allowed,
        "wheelchair_accessible": trail.wheelchair_accessible,
        "description": trail.description,
    }


def _review_dict(review) -> dict:
    return {
        "id": review.id,
        "trail_id": review.trail_id,
        "source": review.source,
        "text": review.text,
        "fetched_at": review.fetched_at,
    }


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    config.validate()
    engine = build_engine(config)
    sessions = SessionStore(ttl_seconds=config.session_ttl_seconds)
    app = FastAPI(title="trailbot", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.config = config
    request_count = {"n": 0}
    count_lock = threading.Lock()

    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": f"invalid request: {exc.errors()[0]['msg']}"},
                            status_code=400)

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        with count_lock:
            request_count["n"] += 1
        record = {
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "ms": round(elapsed_ms, 3),
        }
        chat_info = getattr(request.state, "chat_info", None)
        if chat_info:
            record.update(chat_info)
        logger.info(json.dumps(record, sort_keys=True))
        return response

    def _source_snippet(source_id: str, route_kind: str) -> str:
        # review_rag cites review ids; the table paths cite trail ids
        try:
            if route_kind == "review_rag":
                return engine.store.get_review(source_id).text[:SNIPPET_CHARS]
            trail = engine.store.get_trail(source_id)
            return f"{trail.name}: {trail.description}"[:SNIPPET_CHARS]
        except NotFoundError:
            return ""

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/chat")
    def chat(body: ChatRequest, request: Request):
        message = body.message.strip()
        if not message:
            return JSONResponse({"error": "message must be non-empty"}, status_code=400)
        session, _created = sessions.get_or_create(body.session_id)
        try:
            result = engine.answer(message, session)
        except BackendError as err:
            return JSONResponse(
                {"error": str(err), "backend": err.backend}, status_code=503
            )
        request.state.chat_info = {
            "route": result.route.kind.value,
            "timings": {k: round(v, 3) for k, v in result.timings.items()},
        }
        return {
            "session_id": session.session_id,
            "answer": result.answer,
            "route": result.route.kind.value,
            "route_confidence": result.route.confidence,
            "sources": [
                {"review_id": sid, "snippet": _source_snippet(sid, result.route.kind.value)}
                for sid in result.sources
            ],
            "timings": result.timings,
            "k_used": result.k_used,
            "trail_id": result.trail_id,
            "clarification": result.clarification,
            "candidates": list(result.candidates),
        }

    @app.get("/api/trails")
    def trails(filter: str = "", limit: int | None = None):
        try:
            expr = parse_filter(filter)
        except FilterParseError as err:
            return JSONResponse(
                {"error": str(err), "position": err.position}, status_code=400
            )
        rows = engine.store.exec_filter(expr)
        if limit is not None and limit >= 0:
            rows = rows[:limit]
        return [_trail_dict(t) for t in rows]

    @app.get("/api/trails/{trail_id}/reviews")
    def trail_reviews(trail_id: str):
        try:
            reviews = engine.store.reviews_for_trail(trail_id)
        except NotFoundError as err:
            return JSONResponse({"error": str(err)}, status_code=404)
        return [_review_dict(r) for r in reviews]

    @app.post("/api/admin/ingest")
    def admin_ingest(body: IngestRequest):
        if not config.admin_enabled:
            return JSONResponse({"error": "admin endpoints disabled"}, status_code=403)
        try:
            report = import_corpus(body.trails_path, body.reviews_path, engine.store)
        except (IngestError, ValidationError, OSError) as err:
            return JSONResponse({"error": str(err)}, status_code=422)
        # review sets may have changed arbitrarily; drop all cached embeddings
        engine.index.cache.clear()
        return report.to_dict()

    @app.get("/api/stats")
    def stats():
        with count_lock:
            requests_seen = request_count["n"]
        return {
            "cache": engine.index.cache.metrics(),
            "routes": dict(engine.route_counts),
            "sessions": len(sessions),
            "requests": requests_seen,
        }

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
