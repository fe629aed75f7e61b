from pathlib import Path

import pytest

from trailbot.embeddings import HashingEmbedder
from trailbot.gateway import ScriptedMockLlm
from trailbot.index import ReviewSearchIndex
from trailbot.ingest import import_corpus
from trailbot.orchestrator import ChatEngine, EngineConfig
from trailbot.store import TrailStore

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
SCHEMAS = REPO_ROOT / "schemas"

TRAILS_FILE = FIXTURES / "trails.jsonl"
REVIEWS_FILE = FIXTURES / "reviews.jsonl"
ROUTING_FILE = FIXTURES / "routing.jsonl"
EVAL_FILE = FIXTURES / "eval_cases.jsonl"


@pytest.fixture
def store():
    s = TrailStore()
    yield s
    s.close()


@pytest.fixture
def corpus_store():
    s = TrailStore()
    import_corpus(TRAILS_FILE, REVIEWS_FILE, s)
    yield s
    s.close()


def make_engine(store, k=5, echo=True, delay_ms_per_char=0.0, llm=None, dim=256):
    embedder = HashingEmbedder(dim=dim)
    if llm is None:
        llm = ScriptedMockLlm(echo_mode=echo, delay_ms_per_char=delay_ms_per_char)
    return ChatEngine(
        store, ReviewSearchIndex(store, embedder), llm, EngineConfig(k=k)
    )


@pytest.fixture
def engine(corpus_store):
    return make_engine(corpus_store)
