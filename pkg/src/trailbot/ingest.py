"""File-based corpus ingestion: load trails and reviews, clean review text,
drop irrelevant reviews, persist the rest.

A review survives ingestion when, after normalization, it (a) still has at
least ``min_length`` characters, (b) reads as English to the trigram
detector, and (c) is not an exact duplicate of a review already stored for
the same trail. Reviews whose trail hint resolves to no stored trail are
filtered too, with their own reason. Counts in the report are exact.
"""

from __future__ import annotations

import collections
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IngestError
from .store import Review, TrailRecord, TrailStore
from .textnorm import ContractionTable, normalize_review_text

REVIEW_SOURCES = ("google", "traillink", "other")

# ---------------------------------------------------------------------------
# English detection: character trigrams of the running text (word characters
# only, space-padded) scored against a profile of the most frequent trigrams
# of a generic English reference passage. Same trigram sets every run.

_REFERENCE_ENGLISH = """
the quick summary is that we went there on a sunday morning and it was a good
time for all of us because the weather was clear and the path was not too wet
after the rain that came through in the night before we arrived at the start
there were a few other people already on their way up and we said hello as we
passed them by the time we reached the top of the hill the sun had come out and
we could see for miles in every direction it is one of those places you want to
come back to again and again if you have the chance to go you should take it
with you bring some water and something to eat because there is nowhere to buy
anything once you are out there the way back down felt faster than the way up
as it always does and we stopped once to look at the view one more time before
we got back to where we had started from all in all it was a very good day out
and i would tell anyone who asks that they will not regret making the trip the
only thing i would change is that we should have left earlier in the morning
this is what i think about when someone asks me why i like being outside so
much there is no better way to spend a day than being out in the open air with
people you like doing something simple that does not cost anything at all
it gets really busy on saturdays and sundays so we usually go early in the
morning or late in the afternoon on weekdays you can often have the whole
place to yourself which is lovely in the spring and the fall the colors are
beautiful and everything smells fresh after it rains my family comes along
most weekends and even the little ones manage just fine it is mostly easy
going with only a couple of short steep parts that slow you down a bit the
ground can get muddy in places so wear proper shoes and watch your step some
sections are rocky and rooty but nothing too serious overall a pretty relaxed
outing that never gets old we keep coming back every season and it somehow
feels different each time friendly people well kept and quiet what more could
you ask for honestly just lovely all around highly recommended for anyone
nearby looking for an easy pleasant way to spend a couple of hours outdoors
"""

_PROFILE_SIZE = 350
_WORDS_RE = re.compile(r"[a-z']+")


def _text_trigrams(text: str) -> list[str]:
    collapsed = " ".join(_WORDS_RE.findall(text.lower()))
    if not collapsed:
        return []
    padded = f" {collapsed} "
    return [padded[i:i + 3] for i in range(len(padded) - 2)]


def _build_profile() -> frozenset[str]:
    counts = collections.Counter(_text_trigrams(_REFERENCE_ENGLISH))
    return frozenset(g for g, _ in counts.most_common(_PROFILE_SIZE))


_ENGLISH_PROFILE = _build_profile()


def english_score(text: str) -> float:
    """Fraction of the text's trigrams found in the English profile."""
    grams = _text_trigrams(text)
    if not grams:
        return 0.0
    return sum(g in _ENGLISH_PROFILE for g in grams) / len(grams)


# ---------------------------------------------------------------------------
# Relevance rules

@dataclass(frozen=True)
class RelevanceConfig:
    min_length: int = 10
    english_threshold: float = 0.35
    require_english: bool = True
    drop_duplicates: bool = True


DEFAULT_RELEVANCE = RelevanceConfig()


def rejection_reason(
    normalized_text: str,
    config: RelevanceConfig = DEFAULT_RELEVANCE,
    seen_texts: collections.abc.Container = frozenset(),
) -> str | None:
    """Why a normalized review is irrelevant, or None when it passes.

    Pure function of (text, config, seen set); ``seen_texts`` holds the
    normalized texts already stored for the same trail.
    """
    if len(normalized_text) < config.min_length:
        return "too_short"
    if config.require_english and english_score(normalized_text) < config.english_threshold:
        return "not_english"
    if config.drop_duplicates and normalized_text in seen_texts:
        return "duplicate"
    return None


def is_relevant(
    normalized_text: str,
    config: RelevanceConfig = DEFAULT_RELEVANCE,
    seen_texts: collections.abc.Container = frozenset(),
) -> bool:
    return rejection_reason(normalized_text, config, seen_texts) is None


# ---------------------------------------------------------------------------
# File loading

@dataclass(frozen=True)
class RawReview:
    source: str
    trail_name_hint: str
    text: str
    fetched_at: str | None = None


@dataclass
class IngestReport:
    trails_loaded: int = 0
    reviews_loaded: int = 0
    reviews_filtered: int = 0
    filter_reasons: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "trails_loaded": self.trails_loaded,
            "reviews_loaded": self.reviews_loaded,
            "reviews_filtered": self.reviews_filtered,
            "filter_reasons": dict(sorted(self.filter_reasons.items())),
        }


def _jsonl_records(path: Path) -> list[tuple[int, dict]]:
    records = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(record, dict):
            raise IngestError("record must be a JSON object", line=lineno)
        records.append((lineno, record))
    return records


def load_trails_file(path: str | Path) -> list[TrailRecord]:
    """Parse a trails JSON-lines file; duplicate names are an error."""
    path = Path(path)
    trails: list[TrailRecord] = []
    seen_names: dict[str, int] = {}
    for lineno, record in _jsonl_records(path):
        try:
            trail = TrailRecord(
                id=record.get("id", ""),
                name=record["name"],
                town=record["town"],
                length_miles=float(record["length_miles"]),
                difficulty=record["difficulty"],
                activities=frozenset(record["activities"]),
                pets_allowed=record.get("pets_allowed", "unknown"),
                wheelchair_accessible=record.get("wheelchair_accessible", "unknown"),
                description=record.get("description", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"bad trail record: {exc}", line=lineno) from exc
        key = trail.name.casefold()
        if key in seen_names:
            raise IngestError(
                f"duplicate trail name {trail.name!r} (first seen on line {seen_names[key]})",
                line=lineno,
            )
        seen_names[key] = lineno
        trails.append(trail)
    return trails


def load_reviews_file(path: str | Path) -> list[RawReview]:
    path = Path(path)
    reviews: list[RawReview] = []
    for lineno, record in _jsonl_records(path):
        try:
            raw = RawReview(
                source=record.get("source", "other"),
                trail_name_hint=record["trail_name_hint"],
                text=record["text"],
                fetched_at=record.get("fetched_at"),
            )
        except KeyError as exc:
            raise IngestError(f"bad review record: missing {exc}", line=lineno) from exc
        if raw.source not in REVIEW_SOURCES:
            raise IngestError(f"unknown review source {raw.source!r}", line=lineno)
        if not isinstance(raw.text, str) or not raw.text:
            raise IngestError("review text must be a non-empty string", line=lineno)
        reviews.append(raw)
    return reviews


# ---------------------------------------------------------------------------
# Import

_INGEST_LOCK = threading.Lock()  # import_corpus must not overlap itself


def import_corpus(
    trails_file: str | Path,
    reviews_file: str | Path,
    store: TrailStore,
    config: RelevanceConfig = DEFAULT_RELEVANCE,
    table: ContractionTable | None = None,
) -> IngestReport:
    """Load both files into the store; returns exact counts.

    Trails are upserted by name. Every accepted review is normalized and
    linked to exactly one trail; rejected reviews are tallied by reason.
    """
    with _INGEST_LOCK:
        report = IngestReport()
        trails = load_trails_file(trails_file)
        raw_reviews = load_reviews_file(reviews_file)

        for trail in trails:
            if not trail.id:
                trail = TrailRecord(**{**trail.__dict__, "id": store.next_trail_id()})
            store.upsert_trail(trail)
        report.trails_loaded = len(trails)

        seen: dict[str, set[str]] = {}

        def seen_for(trail_id: str) -> set[str]:
            if trail_id not in seen:
                seen[trail_id] = {r.text for r in store.reviews_for_trail(trail_id)}
            return seen[trail_id]

        for raw in raw_reviews:
            trail = store.get_trail_by_name(raw.trail_name_hint)
            if trail is None:
                report.reviews_filtered += 1
                report.filter_reasons["unknown_trail"] = (
                    report.filter_reasons.get("unknown_trail", 0) + 1
                )
                continue
            text = normalize_review_text(raw.text, table)
            reason = rejection_reason(text, config, seen_for(trail.id))
            if reason is not None:
                report.reviews_filtered += 1
                report.filter_reasons[reason] = report.filter_reasons.get(reason, 0) + 1
                continue
            store.add_review(
                Review(
                    id=store.next_review_id(),
                    trail_id=trail.id,
                    source=raw.source,
                    text=text,
                    fetched_at=raw.fetched_at,
                )
            )
            seen_for(trail.id).add(text)
            report.reviews_loaded += 1

        return report
