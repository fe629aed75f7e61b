"""End-to-end answer pipeline: route, retrieve, prompt, complete.

Each route kind maps to exactly one retrieval path: ``structured`` and
``recommendation`` go through the filter DSL and the trail table,
``review_rag`` goes through per-trail top-k review retrieval, and
``out_of_scope`` answers without touching either. Responses carry the ids
of everything that reached the prompt plus per-stage timings.

Filter text on the structured path comes from the LLM only when the
backend is a real model (or when explicitly configured); mock and offline
runs use the deterministic rule-based generator, so tests need no network.
"""

from __future__ import annotations

import re
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import filter_dsl
from .embeddings import Embedder
from .errors import FilterParseError, ValidationError
from .gateway import (
    ANSWER_SYSTEM,
    DEFAULT_MAX_PROMPT_CHARS,
    RECOMMEND_SYSTEM,
    PromptBundle,
    Provenance,
    build_rag_prompt,
    build_structured_prompt,
)
from .index import RetrievalHit, ReviewSearchIndex
from .routing import QueryRoute, RouteKind, classify
from .store import TrailRecord, TrailStore

FUZZY_DISTANCE_LIMIT = 0.34
MAX_CANDIDATES = 3

OUT_OF_SCOPE_ANSWER = (
    "I can help with outdoor trails: their length, difficulty, activities, "
    "accessibility, and what visitors say about them. Could you rephrase "
    "your question in those terms?"
)


@dataclass
class SessionState:
    """Per-conversation state; history is FIFO-bounded."""

    session_id: str
    history_limit: int = 20
    created_at: float = field(default_factory=time.time)

    def __post_init__(self):
        self.history: deque[tuple[str, str]] = deque(maxlen=self.history_limit)
        self.query_vec_memo: dict[str, np.ndarray] = {}
        self.lock = threading.Lock()
        self.last_used = self.created_at

    def turns(self) -> tuple[tuple[str, str], ...]:
        return tuple(self.history)


class SessionStore:
    """In-memory sessions with a TTL; restarts drop state by design."""

    def __init__(self, ttl_seconds: float = 3600.0, history_limit: int = 20):
        self.ttl_seconds = ttl_seconds
        self.history_limit = history_limit
        self._sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()

    def get_or_create(self, session_id: str | None) -> tuple[SessionState, bool]:
        with self._lock:
            now = time.time()
            expired = [
                sid for sid, s in self._sessions.items()
                if now - s.last_used > self.ttl_seconds
            ]
            for sid in expired:
                del self._sessions[sid]
            if session_id and session_id in self._sessions:
                session = self._sessions[session_id]
                session.last_used = now
                return session, False
            new_id = session_id or uuid.uuid4().hex
            session = SessionState(new_id, history_limit=self.history_limit)
            self._sessions[new_id] = session
            return session, True

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


@dataclass(frozen=True)
class ChatResponse:
    answer: str
    route: QueryRoute
    sources: tuple[str, ...]
    timings: dict[str, float]
    k_used: int | None = None
    trail_id: str | None = None
    clarification: bool = False
    candidates: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Trail mention resolution

_GENERIC_TOKENS = {"trail", "trails"}
_WORD_RE = re.compile(r"[a-z0-9']+")


def _levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def _name_key(name: str) -> str:
    tokens = [t for t in _WORD_RE.findall(name.casefold()) if t not in _GENERIC_TOKENS]
    return " ".join(tokens)


def resolve_trail_mention(
    query: str, store: TrailStore
) -> tuple[TrailRecord | None, list[str]]:
    """Find the trail a query names.

    An exact case-insensitive substring match on the stored name wins (the
    longest name on overlap). Otherwise trails within normalized edit
    distance 0.34 of some query token window, generic 'trail' words
    ignored, come back as clarification candidates sorted by closeness
    then name.
    """
    lowered = query.casefold()
    exact = [t for t in store.list_trails() if t.name.casefold() in lowered]
    if exact:
        exact.sort(key=lambda t: (-len(t.name), t.name))
        return exact[0], []

    query_tokens = [
        t for t in _WORD_RE.findall(lowered) if t not in _GENERIC_TOKENS
    ]
    scored: list[tuple[float, str]] = []
    for trail in store.list_trails():
        key = _name_key(trail.name)
        width = max(1, len(key.split()))
        best = None
        for w in (width - 1, width, width + 1):
            if w < 1 or w > len(query_tokens):
                continue
            for start in range(len(query_tokens) - w + 1):
                window = " ".join(query_tokens[start:start + w])
                distance = _levenshtein(window, key) / max(len(window), len(key))
                if best is None or distance < best:
                    best = distance
        if best is not None and best <= FUZZY_DISTANCE_LIMIT:
            scored.append((best, trail.name))
    scored.sort()
    return None, [name for _, name in scored[:MAX_CANDIDATES]]


# ---------------------------------------------------------------------------
# Rule-based filter generation (offline replacement for model-emitted DSL)

_DIFFICULTY_WORDS = {"easy": "easy", "moderate": "moderate",
                     "difficult": "difficult", "hard": "difficult"}
_ACTIVITY_WORDS = {
    "hike": "hiking", "hikes": "hiking", "hiking": "hiking",
    "bike": "biking", "bikes": "biking", "biking": "biking", "cycling": "biking",
    "walk": "walking", "walks": "walking", "walking": "walking",
    "horseback": "horseback", "horse": "horseback",
    "snowshoe": "snowshoeing", "snowshoeing": "snowshoeing",
}
_PET_RE = re.compile(r"\b(?:dog|dogs|pet|pets|puppy)\b", re.IGNORECASE)
_WHEELCHAIR_RE = re.compile(r"\b(?:wheelchair|accessible|accessibility|stroller)\b", re.IGNORECASE)
_MAX_LEN_RE = re.compile(
    r"\b(?:under|below|less than|shorter than|at most|within|up to)\s+(\d+(?:\.\d+)?)\s*miles?\b",
    re.IGNORECASE,
)
_MIN_LEN_RE = re.compile(
    r"\b(?:over|above|more than|longer than|at least)\s+(\d+(?:\.\d+)?)\s*miles?\b",
    re.IGNORECASE,
)


def filter_text_from_rules(query: str, trail_name: str | None = None) -> str:
    """Compose DSL text from recognizable constraint terms; '' is match-all."""
    clauses: list[str] = []
    if trail_name:
        clauses.append(f'name = "{trail_name}"')
    lowered = query.casefold()
    tokens = set(_WORD_RE.findall(lowered))
    for word, level in _DIFFICULTY_WORDS.items():
        if word in tokens:
            clauses.append(f'difficulty = "{level}"')
            break
    if _PET_RE.search(query):
        clauses.append('pets_allowed = "yes"')
    if _WHEELCHAIR_RE.search(query):
        clauses.append('wheelchair_accessible = "yes"')
    for word, activity in _ACTIVITY_WORDS.items():
        if word in tokens:
            clauses.append(f'activities HAS "{activity}"')
            break
    match = _MAX_LEN_RE.search(query)
    if match:
        clauses.append(f"length_miles <= {match.group(1)}")
    match = _MIN_LEN_RE.search(query)
    if match:
        clauses.append(f"length_miles >= {match.group(1)}")
    return " AND ".join(clauses)


DSL_SYSTEM = (
    "Translate the user's question into one filter expression over trails.\n"
    "Fields: name, town, description (strings); length_miles (number); "
    "difficulty (easy|moderate|difficult); pets_allowed, "
    "wheelchair_accessible (yes|no|unknown); activities (set: hiking, "
    "biking, walking, horseback, snowshoeing).\n"
    "Syntax: field = \"value\", field <= number, activities HAS \"biking\", "
    "combined with AND/OR/NOT, optional ORDER BY field ASC|DESC and LIMIT n. "
    "Reply with the expression only; reply with an empty line to match all."
)


# ---------------------------------------------------------------------------
# Engine

@dataclass
class EngineConfig:
    k: int = 5
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS
    history_limit: int = 20
    # None = auto: use the LLM for routing/DSL only when it is a remote model
    use_llm_for_routing: bool | None = None
    use_llm_for_dsl: bool | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


class ChatEngine:
    """Wires store, retrieval index, embedder, and LLM into answer()."""

    def __init__(
        self,
        store: TrailStore,
        index: ReviewSearchIndex,
        llm,
        config: EngineConfig | None = None,
    ):
        self.store = store
        self.index = index
        self.embedder: Embedder = index.backend
        self.llm = llm
        self.config = config or EngineConfig()
        self.route_counts: dict[str, int] = {k.value: 0 for k in RouteKind}
        self._route_lock = threading.Lock()

    # -- helpers -----------------------------------------------------------

    def _llm_is_remote(self) -> bool:
        return getattr(self.llm, "kind", "") == "remote_http"

    def _routing_llm(self):
        use = self.config.use_llm_for_routing
        if use is None:
            use = self._llm_is_remote()
        return self.llm if use else None

    def _memoized_query_vec(self, session: SessionState, query: str) -> np.ndarray:
        key = " ".join(query.casefold().split())
        vec = session.query_vec_memo.get(key)
        if vec is None:
            vec = self.embedder.embed(query)
            session.query_vec_memo[key] = vec
        return vec

    def _filter_from_llm(self, query: str) -> filter_dsl.FilterExpr:
        """Ask the model for DSL; one retry with the parse error, then match-all."""
        bundle = PromptBundle(
            system=DSL_SYSTEM, context="", question=query,
            provenance=Provenance("structured", ()),
            max_chars=self.config.max_prompt_chars,
        )
        text = self.llm.complete(bundle).strip().strip("`")
        try:
            return filter_dsl.parse_filter(text)
        except FilterParseError as err:
            retry = PromptBundle(
                system=DSL_SYSTEM,
                context=f"Your previous expression failed to parse: {err}",
                question=query,
                provenance=Provenance("structured", ()),
                max_chars=self.config.max_prompt_chars,
            )
            text = self.llm.complete(retry).strip().strip("`")
            try:
                return filter_dsl.parse_filter(text)
            except FilterParseError:
                return filter_dsl.FilterExpr()

    def _structured_filter(self, query: str) -> filter_dsl.FilterExpr:
        use_llm = self.config.use_llm_for_dsl
        if use_llm is None:
            use_llm = self._llm_is_remote()
        if use_llm:
            return self._filter_from_llm(query)
        trail, _ = resolve_trail_mention(query, self.store)
        text = filter_text_from_rules(query, trail.name if trail else None)
        return filter_dsl.parse_filter(text)

    # -- paths -------------------------------------------------------------

    def _answer_structured(self, query, session, route, timings, system=ANSWER_SYSTEM):
        t0 = time.perf_counter()
        expr = self._structured_filter(query)
        rows = self.store.exec_filter(expr)
        timings["retrieve_ms"] = (time.perf_counter() - t0) * 1000.0
        bundle = build_structured_prompt(
            rows, query, history=session.turns(), system=system,
            max_chars=self.config.max_prompt_chars,
        )
        t0 = time.perf_counter()
        answer = self.llm.complete(bundle)
        timings["llm_ms"] = (time.perf_counter() - t0) * 1000.0
        return ChatResponse(
            answer=answer, route=route, sources=bundle.provenance.ids,
            timings=timings,
        )

    def _answer_rag(self, query, session, route, timings, k, rag_enabled):
        t0 = time.perf_counter()
        trail, candidates = resolve_trail_mention(query, self.store)
        if trail is None:
            timings["retrieve_ms"] = (time.perf_counter() - t0) * 1000.0
            timings["llm_ms"] = 0.0
            if candidates:
                listing = ", ".join(candidates)
                text = (
                    "I could not find that trail. Did you mean: "
                    f"{listing}? Please ask again with the full trail name."
                )
            else:
                text = (
                    "I could not find that trail in the database. Please "
                    "name the trail you are asking about."
                )
            return ChatResponse(
                answer=text, route=route, sources=(), timings=timings,
                clarification=True, candidates=tuple(candidates),
            )
        if rag_enabled:
            query_vec = self._memoized_query_vec(session, query)
            hits = self.index.top_k(query_vec, trail.id, k)
            k_used = k
        else:
            # Baseline path: every review of the trail, id order, no
            # similarity selection and no embedding work.
            reviews = self.store.reviews_for_trail(trail.id)
            hits = [RetrievalHit(r.id, 0.0) for r in reviews]
            k_used = None
        reviews_by_id = {r.id: r for r in self.store.reviews_for_trail(trail.id)}
        timings["retrieve_ms"] = (time.perf_counter() - t0) * 1000.0
        bundle = build_rag_prompt(
            hits, reviews_by_id, query, history=session.turns(),
            max_chars=self.config.max_prompt_chars,
        )
        t0 = time.perf_counter()
        answer = self.llm.complete(bundle)
        timings["llm_ms"] = (time.perf_counter() - t0) * 1000.0
        return ChatResponse(
            answer=answer, route=route, sources=bundle.provenance.ids,
            timings=timings, k_used=k_used, trail_id=trail.id,
        )

    # -- entry point ---------------------------------------------------------

    def answer(
        self,
        query: str,
        session: SessionState | None = None,
        k: int | None = None,
        rag_enabled: bool = True,
    ) -> ChatResponse:
        """Answer one query; per-session calls are serialized."""
        if not query or not query.strip():
            raise ValidationError("query must be non-empty")
        if session is None:
            session = SessionState(uuid.uuid4().hex, history_limit=self.config.history_limit)
        k = self.config.k if k is None else k
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")

        with session.lock:
            total_start = time.perf_counter()
            timings: dict[str, float] = {"retrieve_ms": 0.0, "llm_ms": 0.0}
            route = classify(
                query,
                schema_fields=tuple(filter_dsl.SCHEMA_FIELDS),
                llm=self._routing_llm(),
            )
            timings["route_ms"] = (time.perf_counter() - total_start) * 1000.0
            with self._route_lock:
                self.route_counts[route.kind.value] += 1

            if route.kind is RouteKind.review_rag:
                response = self._answer_rag(query, session, route, timings, k, rag_enabled)
            elif route.kind is RouteKind.recommendation:
                response = self._answer_structured(
                    query, session, route, timings, system=RECOMMEND_SYSTEM
                )
            elif route.kind is RouteKind.structured:
                response = self._answer_structured(query, session, route, timings)
            else:
                timings["llm_ms"] = 0.0
                response = ChatResponse(
                    answer=OUT_OF_SCOPE_ANSWER, route=route, sources=(), timings=timings
                )

            session.history.append(("user", query))
            session.history.append(("assistant", response.answer))
            session.last_used = time.time()
            timings["total_ms"] = (time.perf_counter() - total_start) * 1000.0
            return response
