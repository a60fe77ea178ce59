"""Leaf-chunk vector index and auto-merging retrieval.

Retrieval is two-phase. `top_k` ranks embedded leaf chunks by cosine
similarity (exact, exhaustive search; the corpora are tens of documents).
`auto_merge` then walks each chunk tree bottom-up: whenever the marked
fraction of a node's direct children reaches the merge threshold, the
parent replaces everything marked beneath it. The surviving marked nodes
are returned as context blocks whose provenance records exactly which
retrieved leaves they absorbed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import NodeTree
from .embedding import EmbeddingVector

INDEX_FORMAT = "vector-index"
INDEX_VERSION = 1

__all__ = [
    "RetrieverConfig",
    "RetrievalHit",
    "ContextNode",
    "VectorIndex",
    "index_build",
    "top_k",
    "auto_merge",
    "truncate_contexts",
    "run_query",
    "save_index",
    "load_index",
]


@dataclass(frozen=True)
class RetrieverConfig:
    top_k: int = 30
    merge_threshold: float = 0.5
    max_context_nodes: int | None = None

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError(f"top_k must be positive, got {self.top_k}")
        if not 0.0 < self.merge_threshold <= 1.0:
            raise ValueError(
                f"merge_threshold must be in (0, 1], got {self.merge_threshold}"
            )
        if self.max_context_nodes is not None:
            if self.max_context_nodes < 1:
                raise ValueError("max_context_nodes must be positive when set")
            if self.max_context_nodes > self.top_k:
                raise ValueError("max_context_nodes cannot exceed top_k")


@dataclass(frozen=True)
class RetrievalHit:
    node_id: str
    score: float


@dataclass(frozen=True)
class ContextNode:
    node_id: str
    doc_id: str
    text: str
    score: float
    provenance: tuple[str, ...]


class VectorIndex:
    """Immutable map of leaf node_id -> embedding, ordered by node_id."""

    def __init__(self, node_ids: Sequence[str], matrix: np.ndarray) -> None:
        if len(node_ids) != matrix.shape[0]:
            raise ValueError("node_ids and matrix row count differ")
        order = np.argsort(np.asarray(node_ids, dtype=object))
        self.node_ids: tuple[str, ...] = tuple(node_ids[i] for i in order)
        self.matrix = np.ascontiguousarray(matrix[order], dtype=np.float64)
        self.matrix.flags.writeable = False

    @property
    def dims(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.node_ids)


def index_build(trees: Sequence[NodeTree], embedder, config=None) -> VectorIndex:
    """Embed every leaf of every tree exactly once.

    Entry order is deterministic (ascending node_id). Raises on an empty
    corpus; an embedding failure is re-raised with the offending node_id.
    """
    if not trees:
        raise ValueError("empty corpus")
    node_ids: list[str] = []
    vectors: list[np.ndarray] = []
    for tree in trees:
        for leaf in tree.leaves():
            try:
                vec = embedder.embed(leaf.text)
            except ValueError as exc:
                raise ValueError(f"failed to embed leaf {leaf.id!r}: {exc}") from exc
            node_ids.append(leaf.id)
            vectors.append(vec.components)
    return VectorIndex(node_ids, np.vstack(vectors))


def top_k(index: VectorIndex, query: EmbeddingVector, k: int) -> list[RetrievalHit]:
    """Exhaustive cosine search; ties broken by ascending node_id."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if query.dims != index.dims:
        raise ValueError(f"dimension mismatch: query {query.dims}, index {index.dims}")
    qnorm = query.norm()
    if qnorm == 0.0:
        raise ValueError("cosine undefined for a zero vector")
    scores = index.matrix @ (query.components / qnorm)
    # Index rows are unit vectors by construction, so the dot product is the
    # cosine; clamp against rounding drift.
    scores = np.clip(scores, -1.0, 1.0)
    limit = min(k, len(index))
    ranked = sorted(range(len(index)), key=lambda i: (-scores[i], index.node_ids[i]))
    return [
        RetrievalHit(node_id=index.node_ids[i], score=float(scores[i]))
        for i in ranked[:limit]
    ]


def auto_merge(
    trees: Sequence[NodeTree], hits: Sequence[RetrievalHit], threshold: float
) -> list[ContextNode]:
    """Replace retrieved leaves by ancestors once enough siblings are marked.

    Bottom-up over each tree's levels: a node is marked when
    (marked direct children) / (total children) >= threshold, which unmarks
    every marked node in its subtree. Marking only propagates upward, so a
    single ascending sweep reaches the fixpoint. Output context blocks are
    pairwise disjoint and partition the retrieved leaves via `provenance`,
    sorted by descending score then ascending node_id.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    by_node: dict[str, NodeTree] = {}
    for tree in trees:
        for node_id in tree.nodes:
            by_node[node_id] = tree
    scores: dict[str, float] = {}
    for hit in hits:
        tree = by_node.get(hit.node_id)
        if tree is None:
            raise ValueError(f"hit references unknown node {hit.node_id!r}")
        if not tree.node(hit.node_id).is_leaf:
            raise ValueError(f"hit references non-leaf node {hit.node_id!r}")
        scores[hit.node_id] = max(hit.score, scores.get(hit.node_id, -1.0))

    marked: set[str] = set(scores)
    for tree in trees:
        non_leaves = [n for n in tree.nodes.values() if not n.is_leaf]
        non_leaves.sort(key=lambda n: n.level)
        for node in non_leaves:
            count = sum(1 for c in node.child_ids if c in marked)
            if count and count / len(node.child_ids) >= threshold:
                for descendant in tree.descendants(node.id):
                    marked.discard(descendant)
                marked.add(node.id)

    contexts: list[ContextNode] = []
    for node_id in marked:
        tree = by_node[node_id]
        node = tree.node(node_id)
        if node.is_leaf:
            absorbed = [node_id]
        else:
            absorbed = sorted(d for d in tree.descendants(node_id) if d in scores)
        contexts.append(
            ContextNode(
                node_id=node_id,
                doc_id=node.doc_id,
                text=node.text,
                score=max(scores[leaf] for leaf in absorbed),
                provenance=tuple(absorbed),
            )
        )
    contexts.sort(key=lambda c: (-c.score, c.node_id))
    return contexts


def truncate_contexts(
    contexts: Sequence[ContextNode], limit: int
) -> list[ContextNode]:
    """Keep the first `limit` contexts, order preserved."""
    if limit < 1:
        raise ValueError(f"context limit must be positive, got {limit}")
    return list(contexts[:limit])


def run_query(
    index: VectorIndex,
    trees: Sequence[NodeTree],
    query: EmbeddingVector,
    config: RetrieverConfig,
) -> list[ContextNode]:
    """top_k -> auto_merge -> optional truncation, per the retriever config."""
    hits = top_k(index, query, config.top_k)
    contexts = auto_merge(trees, hits, config.merge_threshold)
    if config.max_context_nodes is not None:
        contexts = truncate_contexts(contexts, config.max_context_nodes)
    return contexts


def save_index(index: VectorIndex, path: Path | str) -> None:
    """Persist as line-delimited JSON; floats round-trip bit-exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "dims": index.dims}
        fh.write(json.dumps(header) + "\n")
        for node_id, row in zip(index.node_ids, index.matrix):
            fh.write(json.dumps({"node_id": node_id, "vector": row.tolist()}) + "\n")


def load_index(path: Path | str) -> VectorIndex:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT:
            raise ValueError(f"{path.name}: not a vector index file")
        if header.get("version") != INDEX_VERSION:
            raise ValueError(
                f"{path.name}: unsupported index version {header.get('version')!r}"
            )
        node_ids: list[str] = []
        rows: list[list[float]] = []
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            node_ids.append(entry["node_id"])
            rows.append(entry["vector"])
    if not node_ids:
        raise ValueError(f"{path.name}: empty index")
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.shape[1] != header["dims"]:
        raise ValueError(f"{path.name}: dims mismatch with header")
    return VectorIndex(node_ids, matrix)
