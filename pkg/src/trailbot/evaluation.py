"""Offline evaluation: answer-matching percentage and k-sensitivity.

A generated answer counts as correct when the cosine similarity between
its embedding and the ground truth's embedding clears the threshold
(default 0.70, recorded in the report). The scoring embedder is a separate
backend instance from the engine's retrieval embedder, so retrieval call
counting and scoring never interact. The with/without-retrieval comparison
reruns the same cases with ``rag_enabled=False``, which serializes every
review of the trail into the prompt instead of the top-k selection.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import Embedder, HashingEmbedder
from .errors import IngestError, ValidationError
from .orchestrator import ChatEngine, SessionState

DEFAULT_THRESHOLD = 0.70


@dataclass(frozen=True)
class EvalCase:
    id: str
    question: str
    ground_truth: str
    expected_route: str
    trail_ref: str | None = None


def load_eval_cases(path: str | Path) -> list[EvalCase]:
    cases = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            case = EvalCase(
                id=record["id"],
                question=record["question"],
                ground_truth=record["ground_truth"],
                expected_route=record["expected_route"],
                trail_ref=record.get("trail_ref"),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise IngestError(f"bad eval case: {exc}", line=lineno) from exc
        if not case.ground_truth:
            raise IngestError("ground_truth must be non-empty", line=lineno)
        cases.append(case)
    return cases


def match_score(generated: str, truth: str, eval_backend: Embedder) -> float:
    """Cosine similarity of the two texts' embeddings, clamped to [0, 1]."""
    if not generated or not truth:
        raise ValidationError("match_score needs two non-empty texts")
    a = eval_backend.embed(generated)
    b = eval_backend.embed(truth)
    return max(0.0, min(1.0, float(a @ b)))


@dataclass
class CaseResult:
    case_id: str
    route: str
    score: float
    correct: bool
    latency_ms: float | None
    error: str | None = None


@dataclass
class EvalReport:
    results: list[CaseResult]
    matching_pct: float
    mean_latency_ms: float | None
    p95_latency_ms: float | None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "aggregate": {
                "matching_pct": self.matching_pct,
                "mean_latency_ms": self.mean_latency_ms,
                "p95_latency_ms": self.p95_latency_ms,
                "cases": len(self.results),
                "correct": sum(r.correct for r in self.results),
            },
            "cases": [
                {
                    "id": r.case_id,
                    "route": r.route,
                    "score": round(r.score, 6),
                    "correct": r.correct,
                    "latency_ms": None if r.latency_ms is None else round(r.latency_ms, 3),
                    "error": r.error,
                }
                for r in self.results
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _percentile_95(latencies: list[float]) -> float:
    ordered = sorted(latencies)
    index = max(0, -(-len(ordered) * 95 // 100) - 1)  # ceil(0.95 n) - 1
    return ordered[index]


def run_eval(
    cases: list[EvalCase],
    engine: ChatEngine,
    eval_backend: Embedder | None = None,
    k: int | None = None,
    rag_enabled: bool = True,
    threshold: float = DEFAULT_THRESHOLD,
    parallel: bool = False,
) -> EvalReport:
    """Answer every case through the full engine and score the answers.

    Cases run sequentially in fresh sessions so latency numbers are stable
    and cache state carries across cases exactly as it would serving one
    user after another. ``parallel`` trades that for speed: cases run on a
    thread pool and latency reporting is disabled (None in the report).
    Engine errors mark the case incorrect and the run continues.
    """
    if not cases:
        raise ValidationError("empty fixture: no eval cases")
    if eval_backend is None:
        eval_backend = HashingEmbedder(model_name="trigram-hash-eval")
    if eval_backend is engine.embedder:
        raise ValidationError("evaluation embedder must be distinct from the retrieval embedder")

    def run_case(case: EvalCase) -> CaseResult:
        session = SessionState(f"eval-{case.id}")
        start = time.perf_counter()
        try:
            response = engine.answer(case.question, session, k=k, rag_enabled=rag_enabled)
            latency_ms = (time.perf_counter() - start) * 1000.0
            score = match_score(response.answer, case.ground_truth, eval_backend)
            return CaseResult(
                case_id=case.id,
                route=response.route.kind.value,
                score=score,
                correct=score >= threshold,
                latency_ms=latency_ms,
            )
        except Exception as exc:
            return CaseResult(
                case_id=case.id,
                route="error",
                score=0.0,
                correct=False,
                latency_ms=(time.perf_counter() - start) * 1000.0,
                error=str(exc),
            )

    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(run_case, cases))
        for result in results:
            result.latency_ms = None
        mean_latency = p95_latency = None
    else:
        results = [run_case(case) for case in cases]
        latencies = [r.latency_ms for r in results]
        mean_latency = statistics.fmean(latencies)
        p95_latency = _percentile_95(latencies)

    return EvalReport(
        results=results,
        matching_pct=100.0 * sum(r.correct for r in results) / len(results),
        mean_latency_ms=mean_latency,
        p95_latency_ms=p95_latency,
        config={
            "k": engine.config.k if k is None else k,
            "rag_enabled": rag_enabled,
            "threshold": threshold,
            "retrieval_backend": engine.embedder.identity,
            "eval_backend": eval_backend.identity,
            "llm": getattr(engine.llm, "kind", "unknown"),
            "parallel": parallel,
        },
    )


def k_sweep(
    cases: list[EvalCase],
    ks: list[int],
    engine_factory,
    eval_backend: Embedder | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[dict]:
    """One run_eval per k with a fresh engine each, everything else equal."""
    if not ks:
        raise ValidationError("ks must be non-empty")
    if any(k < 1 for k in ks):
        raise ValidationError("every k must be >= 1")
    rows = []
    for k in ks:
        report = run_eval(
            cases,
            engine_factory(),
            eval_backend=eval_backend,
            k=k,
            threshold=threshold,
        )
        rows.append(
            {
                "k": k,
                "matching_pct": report.matching_pct,
                "mean_latency_ms": report.mean_latency_ms,
            }
        )
    return rows


def sweep_to_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=["k", "matching_pct", "mean_latency_ms"])
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()
