"""Embedding backends producing unit-norm vectors.

Two backends share one contract: the same text always maps to the same
vector, every vector is L2-normalized, and ``call_counter`` counts texts
embedded (a batch of k counts k), which is what the cache tests measure.

``HashingEmbedder`` is the in-repo reference backend: character trigrams of
the lowercased text are hashed into ``dim`` signed buckets and the counts
normalized. It needs no network or model weights, and texts sharing more
trigrams land closer in cosine, which is the property retrieval tests rely
on. ``RemoteEmbedder`` speaks a single JSON POST protocol so any hosted
sentence-embedding model can be adapted with a thin shim.
"""

from __future__ import annotations

import hashlib
import itertools
import threading

import numpy as np

from .errors import BackendError, BatchEmbedError, DegenerateVectorError, ValidationError

NORM_TOLERANCE = 1e-6


def normalize(values) -> np.ndarray:
    """Scale a vector to unit L2 norm; rejects zero and non-finite input."""
    vec = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise DegenerateVectorError("vector contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DegenerateVectorError("cannot normalize a zero vector")
    return vec / norm


class Embedder:
    """Common bookkeeping for backends; subclasses implement ``_embed_one``."""

    kind = "abstract"

    def __init__(self, dim: int, model_name: str):
        if dim <= 0:
            raise ValidationError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.model_name = model_name
        self._counter = 0
        self._counter_lock = threading.Lock()

    @property
    def identity(self) -> str:
        return f"{self.kind}:{self.model_name}:{self.dim}"

    @property
    def call_counter(self) -> int:
        with self._counter_lock:
            return self._counter

    def _count(self, n: int) -> None:
        with self._counter_lock:
            self._counter += n

    def _embed_one(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValidationError("cannot embed empty text")
        vec = self._embed_one(text)
        self._count(1)
        return vec

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        """Pointwise equal to mapping ``embed``; order preserved."""
        for i, text in enumerate(texts):
            if not text:
                raise BatchEmbedError("cannot embed empty text", index=i)
        vectors = []
        for i, text in enumerate(texts):
            try:
                vectors.append(self._embed_one(text))
            except BackendError:
                raise
            except Exception as exc:
                raise BatchEmbedError(str(exc), index=i) from exc
        self._count(len(texts))
        return vectors


def _trigrams(text: str) -> list[str]:
    lowered = text.lower()
    if len(lowered) < 3:
        return [lowered]
    return [lowered[i:i + 3] for i in range(len(lowered) - 2)]


class HashingEmbedder(Embedder):
    """Deterministic trigram-hashing embedder (default dim 256)."""

    kind = "reference_hash"

    def __init__(self, dim: int = 256, model_name: str = "trigram-hash"):
        super().__init__(dim=dim, model_name=model_name)

    def _embed_one(self, text: str) -> np.ndarray:
        grams = _trigrams(text)
        # A salt round guards against the (rare) case where signed buckets
        # cancel to an all-zero vector; the retry is deterministic.
        for salt in itertools.count():
            vec = np.zeros(self.dim, dtype=np.float64)
            suffix = b"" if salt == 0 else b"#%d" % salt
            for gram in grams:
                digest = hashlib.blake2b(gram.encode("utf-8") + suffix, digest_size=8).digest()
                h = int.from_bytes(digest, "big")
                sign = 1.0 if h & 1 else -1.0
                vec[(h >> 1) % self.dim] += sign
            if np.any(vec):
                return normalize(vec)


class RemoteEmbedder(Embedder):
    """Client for the JSON embedding protocol.

    POST {endpoint}/embed with {"model": str, "texts": [str]} and expect
    {"dim": int, "vectors": [[float]]}. One retry on failure, 5s timeout,
    at most ``max_in_flight`` concurrent requests.
    """

    kind = "remote_http"

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        dim: int,
        timeout: float = 5.0,
        max_in_flight: int = 8,
    ):
        super().__init__(dim=dim, model_name=model_name)
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._slots = threading.Semaphore(max_in_flight)

    def _post(self, texts: list[str]) -> list[np.ndarray]:
        import httpx

        payload = {"model": self.model_name, "texts": texts}
        last_error: Exception | None = None
        for _attempt in range(2):
            try:
                with self._slots:
                    response = httpx.post(
                        f"{self.endpoint}/embed", json=payload, timeout=self.timeout
                    )
                response.raise_for_status()
                body = response.json()
                if body["dim"] != self.dim:
                    raise BackendError(
                        f"embedding backend reports dim {body['dim']}, expected {self.dim}",
                        backend="embedder",
                    )
                return [normalize(v) for v in body["vectors"]]
            except BackendError:
                raise
            except Exception as exc:  # timeouts, connection errors, bad JSON
                last_error = exc
        raise BackendError(
            f"embedding endpoint {self.endpoint} unreachable: {last_error}",
            backend="embedder",
        )

    def _embed_one(self, text: str) -> np.ndarray:
        return self._post([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        for i, text in enumerate(texts):
            if not text:
                raise BatchEmbedError("cannot embed empty text", index=i)
        if not texts:
            return []
        vectors = self._post(list(texts))
        if len(vectors) != len(texts):
            raise BackendError(
                f"embedding backend returned {len(vectors)} vectors for {len(texts)} texts",
                backend="embedder",
            )
        self._count(len(texts))
        return vectors
