"""Trail recommendation chatbot engine.

Routes user questions to a structured trail store or review-based
retrieval, answers through pluggable LLM backends, and ships an offline
evaluation harness plus an HTTP chat service.
"""

from .embeddings import HashingEmbedder, RemoteEmbedder, normalize
from .errors import (
    BackendError,
    BatchEmbedError,
    ConfigurationError,
    DegenerateVectorError,
    FilterParseError,
    GatewayError,
    IngestError,
    NotFoundError,
    TrailbotError,
    ValidationError,
)
from .evaluation import EvalCase, k_sweep, load_eval_cases, match_score, run_eval
from .filter_dsl import FilterExpr, parse_filter, pretty_print
from .gateway import (
    PromptBundle,
    RemoteLlm,
    ScriptedMockLlm,
    build_rag_prompt,
    build_structured_prompt,
)
from .index import RetrievalHit, ReviewSearchIndex, TrailReviewCache, rank_hits
from .ingest import RelevanceConfig, import_corpus, is_relevant
from .orchestrator import (
    ChatEngine,
    ChatResponse,
    EngineConfig,
    SessionState,
    SessionStore,
    resolve_trail_mention,
)
from .routing import QueryRoute, RouteKind, classify, fallback_rules
from .store import Review, TrailRecord, TrailStore
from .textnorm import ContractionTable, load_contraction_table, normalize_review_text

__version__ = "0.1.0"
