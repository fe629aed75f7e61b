"""Chat-completion backends and prompt construction for both answer paths.

A ``PromptBundle`` is the unit fed to any backend: system text, a context
block (serialized trail rows or retrieved reviews), the question, and prior
turns. Builders enforce the character budget by dropping oldest history
first, then the lowest-ranked context entries: retrieved context is the
answer's evidence, history is ambiance. Provenance records exactly the ids
whose text survived into the context, which is what response sources must
equal.

Backends: ``RemoteLlm`` posts to a JSON chat endpoint; ``ScriptedMockLlm``
answers deterministically from substring-matched scripts, or echoes the
context verbatim in ``echo_mode`` (the stand-in that makes provenance and
offline evaluation testable).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import GatewayError, IngestError, ValidationError
from .index import RetrievalHit
from .store import Review, TrailRecord

DEFAULT_MAX_PROMPT_CHARS = 8000

ANSWER_SYSTEM = (
    "You are a friendly outdoor trail assistant. Answer from the provided "
    "context only, citing review ids in square brackets where relevant, and "
    "say so plainly when the context does not cover the question."
)

RECOMMEND_SYSTEM = (
    ANSWER_SYSTEM
    + " Recommend the best matching trails from the context for the user's "
    "stated needs and explain briefly why each fits."
)

NO_TRAILS_SENTINEL = "No matching trails."
NO_REVIEWS_SENTINEL = "No reviews available."


@dataclass(frozen=True)
class Provenance:
    kind: str  # "structured" | "reviews"
    ids: tuple[str, ...]


@dataclass(frozen=True)
class PromptBundle:
    system: str
    context: str
    question: str
    history: tuple[tuple[str, str], ...] = ()
    provenance: Provenance = Provenance("structured", ())
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS

    def rendered(self) -> str:
        """Canonical single-string layout; its length is the bundle's size."""
        parts = [self.system]
        parts.extend(f"{role}: {text}" for role, text in self.history)
        if self.context:
            parts.append(self.context)
        parts.append(f"Question: {self.question}")
        return "\n\n".join(parts)

    @property
    def size(self) -> int:
        return len(self.rendered())


def _fit(
    system: str,
    question: str,
    history: tuple[tuple[str, str], ...],
    entries: list[tuple[str | None, str]],
    make_context,
    kind: str,
    max_chars: int,
) -> PromptBundle:
    """Assemble a bundle within budget.

    ``entries`` are (id, text) context pieces ordered from most to least
    important; oldest history goes first, then entries from the tail.
    """
    history = tuple(history)
    kept = list(entries)

    def build() -> PromptBundle:
        ids = tuple(e[0] for e in kept if e[0] is not None)
        return PromptBundle(
            system=system,
            context=make_context(kept, len(entries) - len(kept)),
            question=question,
            history=history,
            provenance=Provenance(kind, ids),
            max_chars=max_chars,
        )

    bundle = build()
    while bundle.size > max_chars and history:
        history = history[1:]
        bundle = build()
    while bundle.size > max_chars and kept:
        kept.pop()
        bundle = build()
    return bundle


def build_structured_prompt(
    rows: list[TrailRecord],
    question: str,
    history: tuple[tuple[str, str], ...] = (),
    system: str = ANSWER_SYSTEM,
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptBundle:
    """Serialize trail rows (store order) into a stable tabular context."""

    def row_line(trail: TrailRecord) -> str:
        description = trail.description
        if description:
            description = " " + description[0].upper() + description[1:] + "."
        return (
            f"- {trail.name} in {trail.town}: {format(trail.length_miles, 'g')} miles,"
            f" difficulty {trail.difficulty},"
            f" activities {', '.join(sorted(trail.activities))},"
            f" pets allowed {trail.pets_allowed},"
            f" wheelchair accessible {trail.wheelchair_accessible}.{description}"
        )

    def make_context(kept: list[tuple[str | None, str]], dropped: int) -> str:
        if not kept:
            return NO_TRAILS_SENTINEL
        lines = ["Matching trails:"] + [text for _, text in kept]
        if dropped:
            lines.append(f"({dropped} more trails not shown)")
        return "\n".join(lines)

    entries = [(t.id, row_line(t)) for t in rows]
    return _fit(system, question, history, entries, make_context, "structured", max_chars)


def build_rag_prompt(
    hits: list[RetrievalHit],
    reviews: dict[str, Review],
    question: str,
    history: tuple[tuple[str, str], ...] = (),
    system: str = ANSWER_SYSTEM,
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptBundle:
    """Reviews in hit order, each prefixed with its id as a citation marker."""

    def make_context(kept: list[tuple[str | None, str]], dropped: int) -> str:
        if not kept:
            return NO_REVIEWS_SENTINEL
        return "\n".join(["Reviews:"] + [text for _, text in kept])

    entries = [
        (hit.review_id, f"[{hit.review_id}] {reviews[hit.review_id].text}")
        for hit in hits
    ]
    return _fit(system, question, history, entries, make_context, "reviews", max_chars)


class ScriptedMockLlm:
    """Deterministic stand-in: scripted answers and/or context echo.

    ``script`` is an ordered list of (match, response) pairs; the first
    entry whose match is a case-insensitive substring of the question wins.
    With ``echo_mode`` the context is returned byte-for-byte instead, which
    lets tests check provenance. ``delay_ms_per_char`` sleeps in proportion
    to prompt size so context-size effects show up in latency measurements.
    """

    kind = "scripted_mock"

    def __init__(
        self,
        script: list[tuple[str, str]] | None = None,
        echo_mode: bool = False,
        delay_ms_per_char: float = 0.0,
    ):
        self.script = list(script or [])
        self.echo_mode = echo_mode
        self.delay_ms_per_char = delay_ms_per_char

    def complete(self, bundle: PromptBundle) -> str:
        if bundle.size > bundle.max_chars:
            raise ValidationError(
                f"prompt of {bundle.size} chars exceeds bound {bundle.max_chars}"
            )
        if self.delay_ms_per_char:
            time.sleep(self.delay_ms_per_char * bundle.size / 1000.0)
        lowered = bundle.question.lower()
        for match, response in self.script:
            if match.lower() in lowered:
                return response
        if self.echo_mode and bundle.context:
            return bundle.context
        return "I do not have enough information to answer that."


class RemoteLlm:
    """Client for a JSON chat endpoint: POST {endpoint}/chat with
    {"model": str, "messages": [{"role", "content"}]}, expecting
    {"content": str}."""

    kind = "remote_http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float = 30.0,
        max_in_flight: int = 4,
    ):
        import threading

        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.timeout = timeout
        self._slots = threading.Semaphore(max_in_flight)

    def complete(self, bundle: PromptBundle) -> str:
        import httpx

        if bundle.size > bundle.max_chars:
            raise ValidationError(
                f"prompt of {bundle.size} chars exceeds bound {bundle.max_chars}"
            )
        user_content = f"Question: {bundle.question}"
        if bundle.context:
            user_content = f"{bundle.context}\n\n{user_content}"
        messages = [{"role": "system", "content": bundle.system}]
        messages.extend(
            {"role": role, "content": text} for role, text in bundle.history
        )
        messages.append({"role": "user", "content": user_content})
        try:
            with self._slots:
                response = httpx.post(
                    f"{self.endpoint}/chat",
                    json={"model": self.model, "messages": messages},
                    timeout=self.timeout,
                )
            response.raise_for_status()
            content = response.json().get("content", "")
        except GatewayError:
            raise
        except Exception as exc:
            raise GatewayError(f"llm endpoint {self.endpoint} unreachable: {exc}") from exc
        if not content:
            raise GatewayError("llm returned empty output")
        return content


def load_mock_script(path: str | Path) -> list[tuple[str, str]]:
    """Read a JSON-lines script file of {"match": str, "response": str}."""
    script = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            script.append((record["match"], record["response"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise IngestError(f"bad mock script record: {exc}", line=lineno) from exc
    return script
