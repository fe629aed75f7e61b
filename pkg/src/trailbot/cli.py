"""Command line entry points: ingest, serve, eval run, eval sweep."""

from __future__ import annotations

import json
import logging
import sys

import click

from .config import load_config
from .embeddings import HashingEmbedder
from .errors import TrailbotError
from .evaluation import k_sweep, load_eval_cases, run_eval, sweep_to_csv
from .gateway import ScriptedMockLlm
from .index import ReviewSearchIndex
from .ingest import DEFAULT_RELEVANCE, RelevanceConfig, import_corpus
from .orchestrator import ChatEngine, EngineConfig
from .store import TrailStore


@click.group()
def main():
    """Trail recommendation chatbot engine."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")


@main.command()
@click.option("--trails", "trails_path", required=True, type=click.Path(exists=True))
@click.option("--reviews", "reviews_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file with relevance settings (min_length, english_threshold).")
@click.option("--store", "store_path", default="trailbot.db", show_default=True)
def ingest(trails_path, reviews_path, config_path, store_path):
    """Load a trail/review corpus into the store."""
    relevance = DEFAULT_RELEVANCE
    if config_path:
        with open(config_path, encoding="utf-8") as f:
            relevance = RelevanceConfig(**json.load(f))
    store = TrailStore(store_path)
    try:
        report = import_corpus(trails_path, reviews_path, store, relevance)
    except TrailbotError as err:
        click.echo(f"ingest failed: {err}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--store", "store_path", default=None, help="SQLite path (default in-memory).")
@click.option("--trails", "ingest_trails", type=click.Path(exists=True), default=None,
              help="Corpus to ingest at startup.")
@click.option("--reviews", "ingest_reviews", type=click.Path(exists=True), default=None)
@click.option("--k", type=int, default=None)
@click.option("--static-dir", default=None, help="Directory of UI assets to serve at /.")
def serve(config_path, host, port, store_path, ingest_trails, ingest_reviews, k, static_dir):
    """Run the HTTP chat service."""
    import uvicorn

    from .server import create_app

    try:
        config = load_config(
            config_path,
            overrides={
                "host": host,
                "port": port,
                "store_path": store_path,
                "ingest_trails": ingest_trails,
                "ingest_reviews": ingest_reviews,
                "k": k,
                "static_dir": static_dir,
            },
        )
        app = create_app(config)
    except TrailbotError as err:
        click.echo(f"cannot start: {err}", err=True)
        sys.exit(1)
    uvicorn.run(
        app,
        host=config.host,
        port=config.port,
        timeout_graceful_shutdown=10,
        log_level="info",
    )


def _build_offline_engine(trails_path, reviews_path, k, delay_ms_per_char):
    store = TrailStore()
    import_corpus(trails_path, reviews_path, store)
    return ChatEngine(
        store,
        ReviewSearchIndex(store, HashingEmbedder()),
        ScriptedMockLlm(echo_mode=True, delay_ms_per_char=delay_ms_per_char),
        EngineConfig(k=k),
    )


@main.group(name="eval")
def eval_group():
    """Offline evaluation against a QA fixture."""


@eval_group.command(name="run")
@click.option("--fixture", required=True, type=click.Path(exists=True))
@click.option("--trails", default="fixtures/trails.jsonl", show_default=True,
              type=click.Path(exists=True))
@click.option("--reviews", default="fixtures/reviews.jsonl", show_default=True,
              type=click.Path(exists=True))
@click.option("--k", default=5, show_default=True, type=int)
@click.option("--rag", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--threshold", default=0.7, show_default=True, type=float)
@click.option("--llm-delay", default=0.1, show_default=True, type=float,
              help="Mock LLM delay in ms per prompt character.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the JSON report here as well.")
def eval_run(fixture, trails, reviews, k, rag, threshold, llm_delay, report_path):
    """Answer every fixture case offline and report matching percentage."""
    cases = load_eval_cases(fixture)
    engine = _build_offline_engine(trails, reviews, k, llm_delay)
    report = run_eval(cases, engine, k=k, rag_enabled=(rag == "on"), threshold=threshold)
    payload = report.to_json()
    if report_path:
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(payload + "\n")
    click.echo(payload)
    click.echo(
        f"matching: {report.matching_pct:.1f}%  "
        f"mean latency: {report.mean_latency_ms:.1f} ms  "
        f"p95: {report.p95_latency_ms:.1f} ms",
        err=True,
    )


@eval_group.command(name="sweep")
@click.option("--fixture", required=True, type=click.Path(exists=True))
@click.option("--trails", default="fixtures/trails.jsonl", show_default=True,
              type=click.Path(exists=True))
@click.option("--reviews", default="fixtures/reviews.jsonl", show_default=True,
              type=click.Path(exists=True))
@click.option("--ks", default="1,3,5,10", show_default=True,
              help="Comma-separated k values.")
@click.option("--threshold", default=0.7, show_default=True, type=float)
@click.option("--llm-delay", default=0.1, show_default=True, type=float)
def eval_sweep(fixture, trails, reviews, ks, threshold, llm_delay):
    """Rerun the evaluation at several k values; emits a CSV table."""
    k_values = [int(part) for part in ks.split(",") if part.strip()]
    cases = load_eval_cases(fixture)
    rows = k_sweep(
        cases,
        k_values,
        lambda: _build_offline_engine(trails, reviews, 5, llm_delay),
        threshold=threshold,
    )
    click.echo(sweep_to_csv(rows), nl=False)


if __name__ == "__main__":
    main()
