"""Hierarchical auto-merging retrieval and an evaluation harness for
preoperative-assessment LLM systems.

The pipeline: ingest guideline corpora into word-window chunk trees, embed
the leaves, retrieve with cosine top-k plus threshold-driven parent
merging, assemble the preoperative prompt around the retrieved context,
obtain responses from a replay or HTTP backend, extract structured
answers, grade them against scenario answer keys, and compare systems with
exact contingency-table statistics.
"""

from __future__ import annotations

from .clinical import (
    AnswerKey,
    Grade,
    ResponseRecord,
    Scenario,
    extract_record,
    grade,
    triage_rule,
)
from .corpus import GuidelineDoc, NodeTree, build_tree, load_corpus
from .embedding import EmbedderConfig, EmbeddingVector, HashEmbedder, cosine
from .generation import (
    GenerationConfig,
    KnowledgeBase,
    PromptBundle,
    ReplayBackend,
    SystemId,
    assemble_prompt,
    generate,
)
from .retrieval import (
    ContextNode,
    RetrievalHit,
    RetrieverConfig,
    VectorIndex,
    auto_merge,
    index_build,
    top_k,
    truncate_contexts,
)
from .stats import (
    RatingMatrix,
    ScoreSheet,
    Table2x2,
    TestResult,
    confusion_rates,
    fisher_exact,
    odds_ratio_cmle,
    percent_agreement,
    score_aggregate,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerKey",
    "ContextNode",
    "EmbedderConfig",
    "EmbeddingVector",
    "GenerationConfig",
    "Grade",
    "GuidelineDoc",
    "HashEmbedder",
    "KnowledgeBase",
    "NodeTree",
    "PromptBundle",
    "RatingMatrix",
    "ReplayBackend",
    "ResponseRecord",
    "RetrievalHit",
    "RetrieverConfig",
    "Scenario",
    "ScoreSheet",
    "SystemId",
    "Table2x2",
    "TestResult",
    "VectorIndex",
    "assemble_prompt",
    "auto_merge",
    "build_tree",
    "confusion_rates",
    "cosine",
    "extract_record",
    "fisher_exact",
    "generate",
    "grade",
    "index_build",
    "load_corpus",
    "odds_ratio_cmle",
    "percent_agreement",
    "score_aggregate",
    "top_k",
    "triage_rule",
    "truncate_contexts",
]
