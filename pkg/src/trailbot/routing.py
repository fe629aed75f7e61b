"""Three-way query routing: recommendation, structured lookup, or review RAG.

Routing happens before any answer generation. When an LLM gateway is wired
in, a forced-choice prompt asks it to pick one label and anything
unparseable falls back to the rule cascade, so the router is total and,
without an LLM, fully deterministic.

Rule cascade (first hit wins):
  1. opinion/experience vocabulary  -> review_rag
  2. recommend/suggest imperative   -> recommendation
  3. schema attribute vocabulary    -> structured
  4. nothing fired                  -> out_of_scope (confidence 0.25)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class RouteKind(str, Enum):
    recommendation = "recommendation"
    structured = "structured"
    review_rag = "review_rag"
    out_of_scope = "out_of_scope"


@dataclass(frozen=True)
class QueryRoute:
    kind: RouteKind
    confidence: float
    rationale: str


# Experiential/opinion vocabulary: questions needing what reviewers said.
OPINION_TERMS = (
    "review", "reviews", "reviewers", "people say", "people think",
    "people mention", "visitors", "visitor", "hikers say", "anyone",
    "opinion", "opinions", "experience", "experiences", "impressions",
    "say about", "complain", "complaints", "crowded", "busy", "scenery",
    "scenic", "views", "wildlife", "worth it", "worth visiting",
    "parking situation", "maintained", "muddy", "condition of",
)

# Imperative ask for a suggestion.
RECOMMEND_TERMS = (
    "recommend", "recommendation", "recommendations", "suggest",
    "suggestion", "suggestions", "which trail should", "what trail should",
    "best trail for", "good trail for", "ideas for",
)

# Attribute vocabulary answerable straight from the trail table.
SCHEMA_TERMS = (
    "length", "long", "miles", "mile", "distance", "difficulty",
    "difficult", "easy", "moderate", "hard", "town", "where is",
    "located", "location", "pets", "pet", "dog", "dogs", "allowed",
    "wheelchair", "accessible", "accessibility", "activities", "activity",
    "bike", "bikes", "biking", "hike", "hiking", "walk", "walking",
    "horseback", "snowshoe", "snowshoeing", "list", "how many trails",
)


def _compile(terms: tuple[str, ...]) -> re.Pattern:
    alternation = "|".join(re.escape(t) for t in terms)
    return re.compile(rf"\b(?:{alternation})\b", re.IGNORECASE)

_OPINION_RE = _compile(OPINION_TERMS)
_RECOMMEND_RE = _compile(RECOMMEND_TERMS)
_SCHEMA_RE = _compile(SCHEMA_TERMS)


def fallback_rules(query: str, schema_fields: tuple[str, ...] = ()) -> QueryRoute:
    """Deterministic rule-cascade routing; pure function of its arguments.

    ``schema_fields`` extends the structured vocabulary with literal field
    names so schema changes route without a lexicon edit.
    """
    text = query.strip()
    if not text:
        return QueryRoute(RouteKind.out_of_scope, 0.25, "empty query")
    match = _OPINION_RE.search(text)
    if match:
        return QueryRoute(
            RouteKind.review_rag, 0.9, f"opinion/experience term {match.group()!r}"
        )
    match = _RECOMMEND_RE.search(text)
    if match:
        return QueryRoute(
            RouteKind.recommendation, 0.85, f"recommendation ask {match.group()!r}"
        )
    match = _SCHEMA_RE.search(text)
    if match:
        return QueryRoute(
            RouteKind.structured, 0.8, f"schema attribute term {match.group()!r}"
        )
    if schema_fields:
        extra = _compile(tuple(schema_fields))
        match = extra.search(text)
        if match:
            return QueryRoute(
                RouteKind.structured, 0.8, f"schema field name {match.group()!r}"
            )
    return QueryRoute(RouteKind.out_of_scope, 0.25, "no routing rule fired")


_LLM_LABELS = {
    "RECOMMENDATION": RouteKind.recommendation,
    "STRUCTURED": RouteKind.structured,
    "REVIEWS": RouteKind.review_rag,
}

ROUTING_PROMPT = (
    "Classify the user's trail question. Reply with exactly one word:\n"
    "RECOMMENDATION if they ask you to pick or suggest trails for them,\n"
    "STRUCTURED if trail attributes (length, town, difficulty, activities,"
    " pets, accessibility) answer it,\n"
    "REVIEWS if it needs visitor opinions or experiences.\n"
)


def classify(query: str, schema_fields: tuple[str, ...] = (), llm=None) -> QueryRoute:
    """Route a query; never fails.

    With ``llm`` present its forced-choice answer wins when parseable;
    otherwise (and on gateway errors) the rule cascade decides, with
    confidence scaled down to record the degraded path.
    """
    if llm is None or not query.strip():
        return fallback_rules(query, schema_fields)
    from .gateway import PromptBundle, Provenance

    bundle = PromptBundle(
        system=ROUTING_PROMPT,
        context="",
        question=query,
        history=(),
        provenance=Provenance("structured", ()),
    )
    try:
        reply = llm.complete(bundle)
    except Exception:
        route = fallback_rules(query, schema_fields)
        return QueryRoute(route.kind, route.confidence * 0.8, route.rationale + " (llm unavailable)")
    token = reply.strip().split()[0].strip(".,:;").upper() if reply.strip() else ""
    if token in _LLM_LABELS:
        return QueryRoute(_LLM_LABELS[token], 0.95, f"model chose {token}")
    route = fallback_rules(query, schema_fields)
    return QueryRoute(route.kind, route.confidence * 0.8, route.rationale + " (llm output unparseable)")
