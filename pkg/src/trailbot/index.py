"""Exact top-k similarity search over a trail's review embeddings.

Review sets are per-trail and small (tens of reviews), so search is a flat
dot product against the cached matrix and a full sort, exact by
construction, which also makes the brute-force test oracle an equality
check. The cache keeps aligned (reviews, vectors) per trail with LRU
eviction; an entry is stale when the backend identity or the trail's
review-id multiset changed since it was built.
"""

from __future__ import annotations

import hashlib
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .embeddings import Embedder
from .errors import ConfigurationError, ValidationError
from .store import Review, TrailStore


@dataclass(frozen=True)
class RetrievalHit:
    review_id: str
    score: float


def rank_hits(
    query_vec: np.ndarray,
    vectors: np.ndarray,
    review_ids: list[str],
    k: int,
) -> list[RetrievalHit]:
    """Top-k by dot product, ties broken by ascending review id.

    Scores come from per-row dots rather than one matrix product: BLAS
    gemv kernels can differ in the last ulp between row positions, which
    would give equal vectors unequal scores and scramble the tie rule.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if len(review_ids) == 0:
        return []
    scores = [float(vectors[i] @ query_vec) for i in range(len(review_ids))]
    order = sorted(range(len(review_ids)), key=lambda i: (-scores[i], review_ids[i]))
    return [RetrievalHit(review_ids[i], scores[i]) for i in order[:k]]


def review_set_fingerprint(reviews: list[Review]) -> str:
    digest = hashlib.sha256()
    for review_id in sorted(r.id for r in reviews):
        digest.update(review_id.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


@dataclass
class CacheEntry:
    reviews: tuple[Review, ...]
    vectors: np.ndarray  # shape (n, dim), row-aligned with reviews
    built_with: str      # backend identity
    fingerprint: str     # review-id multiset hash at build time
    built_at: float


class TrailReviewCache:
    """LRU map: trail id -> aligned reviews and embedding matrix."""

    def __init__(self, capacity: int = 128):
        if capacity < 1:
            raise ValidationError(f"cache capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: OrderedDict[str, CacheEntry] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def lookup(self, trail_id: str, built_with: str, fingerprint: str) -> CacheEntry | None:
        """A hit requires the same backend and an unchanged review set."""
        entry = self._peek(trail_id, built_with, fingerprint)
        with self._lock:
            if entry is not None:
                self.hits += 1
            else:
                self.misses += 1
        return entry

    def _peek(self, trail_id: str, built_with: str, fingerprint: str) -> CacheEntry | None:
        """Lookup without touching the hit/miss counters (build recheck)."""
        with self._lock:
            entry = self._entries.get(trail_id)
            if (
                entry is not None
                and entry.built_with == built_with
                and entry.fingerprint == fingerprint
            ):
                self._entries.move_to_end(trail_id)
                return entry
            return None

    def put(self, trail_id: str, entry: CacheEntry) -> None:
        with self._lock:
            self._entries[trail_id] = entry
            self._entries.move_to_end(trail_id)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
                self.evictions += 1

    def invalidate(self, trail_id: str) -> None:
        """Idempotent; the next warm rebuilds the entry."""
        with self._lock:
            self._entries.pop(trail_id, None)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def metrics(self) -> dict:
        with self._lock:
            return {
                "size": len(self._entries),
                "capacity": self.capacity,
                "hits": self.hits,
                "misses": self.misses,
                "evictions": self.evictions,
            }


class ReviewSearchIndex:
    """Ties store, embedder, and cache together for per-trail retrieval."""

    def __init__(self, store: TrailStore, backend: Embedder, cache: TrailReviewCache | None = None):
        self.store = store
        self.backend = backend
        self.cache = cache if cache is not None else TrailReviewCache()
        self._build_locks: dict[str, threading.Lock] = {}
        self._build_locks_guard = threading.Lock()

    def _build_lock(self, trail_id: str) -> threading.Lock:
        with self._build_locks_guard:
            return self._build_locks.setdefault(trail_id, threading.Lock())

    def warm(self, trail_id: str) -> CacheEntry:
        """Ensure a valid cache entry; embeds only when missing or stale.

        Concurrent misses for the same trail coalesce into one build.
        """
        reviews = self.store.reviews_for_trail(trail_id)
        fingerprint = review_set_fingerprint(reviews)
        entry = self.cache.lookup(trail_id, self.backend.identity, fingerprint)
        if entry is not None:
            return entry
        with self._build_lock(trail_id):
            entry = self.cache._peek(trail_id, self.backend.identity, fingerprint)
            if entry is not None:
                return entry
            if reviews:
                vectors = np.stack(self.backend.embed_batch([r.text for r in reviews]))
            else:
                vectors = np.zeros((0, self.backend.dim), dtype=np.float64)
            entry = CacheEntry(
                reviews=tuple(reviews),
                vectors=vectors,
                built_with=self.backend.identity,
                fingerprint=fingerprint,
                built_at=time.time(),
            )
            self.cache.put(trail_id, entry)
            return entry

    def top_k(self, query_vec: np.ndarray, trail_id: str, k: int) -> list[RetrievalHit]:
        """The min(k, n) most similar reviews of one trail, exact."""
        entry = self.warm(trail_id)
        query_vec = np.asarray(query_vec, dtype=np.float64)
        if query_vec.shape != (self.backend.dim,):
            raise ConfigurationError(
                f"query vector has shape {query_vec.shape}, index expects ({self.backend.dim},)"
            )
        return rank_hits(query_vec, entry.vectors, [r.id for r in entry.reviews], k)

    def invalidate(self, trail_id: str) -> None:
        self.cache.invalidate(trail_id)
