from __future__ import annotations

import random

import numpy as np
import pytest

from conftest import make_doc, random_tree, unique_word_doc
from oracles import automerge_fixpoint
from preop_rag.corpus import build_tree
from preop_rag.embedding import EmbedderConfig, HashEmbedder
from preop_rag.retrieval import (
    RetrievalHit,
    RetrieverConfig,
    auto_merge,
    index_build,
    load_index,
    run_query,
    save_index,
    top_k,
    truncate_contexts,
)


@pytest.fixture()
def embedder():
    return HashEmbedder(EmbedderConfig(dims=64, seed=0))


@pytest.fixture()
def small_corpus(embedder):
    trees = [
        build_tree(unique_word_doc(f"doc{i}", 130), [16, 64, 256]) for i in range(3)
    ]
    index = index_build(trees, embedder)
    return trees, index


class TestRetrieverConfig:
    def test_defaults(self):
        config = RetrieverConfig()
        assert config.top_k == 30
        assert config.merge_threshold == 0.5
        assert config.max_context_nodes is None

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            RetrieverConfig(merge_threshold=1.5)
        with pytest.raises(ValueError):
            RetrieverConfig(merge_threshold=0.0)
        RetrieverConfig(merge_threshold=1.0)

    def test_context_cap_bounded_by_top_k(self):
        with pytest.raises(ValueError):
            RetrieverConfig(top_k=5, max_context_nodes=6)
        with pytest.raises(ValueError):
            RetrieverConfig(max_context_nodes=0)


class TestIndexBuild:
    def test_entry_per_leaf(self, embedder):
        tree = build_tree(make_doc("d", [f"w{i}" for i in range(1000)]), [128, 512])
        index = index_build([tree], embedder)
        assert len(index) == len(tree.leaves()) == 8

    def test_empty_corpus_rejected(self, embedder):
        with pytest.raises(ValueError, match="empty corpus"):
            index_build([], embedder)

    def test_rebuild_identical(self, embedder, small_corpus):
        trees, index = small_corpus
        rebuilt = index_build(trees, HashEmbedder(EmbedderConfig(dims=64, seed=0)))
        assert rebuilt.node_ids == index.node_ids
        assert np.array_equal(rebuilt.matrix, index.matrix)


class TestTopK:
    def test_exact_text_rank_one(self, embedder, small_corpus):
        trees, index = small_corpus
        for tree in trees:
            for leaf in tree.leaves():
                hits = top_k(index, embedder.embed(leaf.text), 5)
                assert hits[0].node_id == leaf.id
                assert hits[0].score == pytest.approx(1.0, abs=1e-9)

    def test_k_larger_than_corpus(self, embedder, small_corpus):
        trees, index = small_corpus
        hits = top_k(index, embedder.embed("anything at all"), 10_000)
        assert len(hits) == len(index)
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)

    def test_identical_leaves_tie_broken_by_node_id(self, embedder):
        words = ["same"] * 40
        trees = [
            build_tree(make_doc("a", words), [16, 64]),
            build_tree(make_doc("b", words), [16, 64]),
        ]
        index = index_build(trees, embedder)
        hits = top_k(index, embedder.embed("same"), 4)
        assert [h.score for h in hits] == pytest.approx([1.0] * 4)
        assert [h.node_id for h in hits] == sorted(h.node_id for h in hits)

    def test_dimension_mismatch(self, small_corpus):
        _, index = small_corpus
        other = HashEmbedder(EmbedderConfig(dims=32, seed=0))
        with pytest.raises(ValueError, match="dimension mismatch"):
            top_k(index, other.embed("query"), 3)


def hit(node_id: str, score: float = 0.9) -> RetrievalHit:
    return RetrievalHit(node_id=node_id, score=score)


class TestAutoMerge:
    def make_tree(self, leaves: int, branch: int):
        return build_tree(
            make_doc("d", [f"w{i}" for i in range(leaves)]), [1, branch]
        )

    def test_single_leaf_below_threshold_unchanged(self):
        tree = self.make_tree(4, 4)  # one parent with 4 leaf children
        leaf = tree.leaves()[0]
        contexts = auto_merge([tree], [hit(leaf.id)], 0.5)
        assert [c.node_id for c in contexts] == [leaf.id]
        assert contexts[0].provenance == (leaf.id,)

    def test_half_marked_children_merge(self):
        tree = self.make_tree(4, 4)
        leaves = tree.leaves()
        contexts = auto_merge(
            [tree], [hit(leaves[0].id, 0.9), hit(leaves[1].id, 0.8)], 0.5
        )
        assert len(contexts) == 1
        merged = contexts[0]
        assert merged.node_id == tree.root_id
        assert merged.provenance == (leaves[0].id, leaves[1].id)
        assert merged.score == pytest.approx(0.9)

    def test_cascade_to_subtree_top(self):
        tree = build_tree(make_doc("d", [f"w{i}" for i in range(8)]), [1, 2, 4])
        hits = [hit(leaf.id, 0.5) for leaf in tree.leaves()]
        contexts = auto_merge([tree], hits, 0.5)
        assert [c.node_id for c in contexts] == [tree.root_id]
        assert set(contexts[0].provenance) == {l.id for l in tree.leaves()}

    def test_threshold_one_requires_all_children(self):
        tree = self.make_tree(4, 4)
        leaves = tree.leaves()
        sparse = auto_merge([tree], [hit(l.id) for l in leaves[:3]], 1.0)
        assert {c.node_id for c in sparse} == {l.id for l in leaves[:3]}
        full = auto_merge([tree], [hit(l.id) for l in leaves], 1.0)
        assert [c.node_id for c in full] == [tree.root_id]

    def test_unknown_node_rejected(self):
        tree = self.make_tree(4, 4)
        with pytest.raises(ValueError, match="unknown node"):
            auto_merge([tree], [hit("nope")], 0.5)

    def test_non_leaf_hit_rejected(self):
        tree = self.make_tree(4, 4)
        with pytest.raises(ValueError, match="non-leaf"):
            auto_merge([tree], [hit(tree.root_id)], 0.5)

    def test_threshold_validation(self):
        tree = self.make_tree(4, 4)
        with pytest.raises(ValueError):
            auto_merge([tree], [], 1.5)
        with pytest.raises(ValueError):
            auto_merge([tree], [], 0.0)

    def test_matches_fixpoint_oracle_randomized(self):
        rng = random.Random(20240612)
        for i in range(300):
            tree_count = rng.randint(1, 2)
            trees = [random_tree(rng, f"t{i}_{j}") for j in range(tree_count)]
            leaves = [leaf for tree in trees for leaf in tree.leaves()]
            chosen = rng.sample(leaves, rng.randint(0, len(leaves)))
            hits = [hit(l.id, rng.uniform(-1, 1)) for l in chosen]
            threshold = rng.choice([0.2, 1 / 3, 0.5, 2 / 3, 0.75, 0.9, 1.0])
            contexts = auto_merge(trees, hits, threshold)
            expected = automerge_fixpoint(trees, [h.node_id for h in hits], threshold)
            assert {c.node_id for c in contexts} == expected
            # provenance partitions retrieved leaves; output spans disjoint
            seen: list[str] = []
            for context in contexts:
                seen.extend(context.provenance)
            assert sorted(seen) == sorted(h.node_id for h in hits)

    def test_low_threshold_converges_to_root(self):
        tree = build_tree(make_doc("d", [f"w{i}" for i in range(32)]), [1, 4, 16])
        hits = [hit(l.id, 0.1) for l in tree.leaves()]
        contexts = auto_merge([tree], hits, 0.01)
        assert [c.node_id for c in contexts] == [tree.root_id]


class TestTruncate:
    def test_truncates_in_order(self):
        tree = build_tree(make_doc("d", [f"w{i}" for i in range(30)]), [1])
        leaves = tree.leaves()
        # leave one leaf out so the root never merges at threshold 1.0
        contexts = auto_merge(
            [tree], [hit(l.id, 1 - i * 0.01) for i, l in enumerate(leaves[:29])], 1.0
        )
        assert len(contexts) == 29
        kept = truncate_contexts(contexts, 10)
        assert kept == contexts[:10]
        assert truncate_contexts(contexts[:3], 10) == contexts[:3]

    def test_zero_limit_rejected(self):
        with pytest.raises(ValueError):
            truncate_contexts([], 0)


class TestRunQuery:
    def test_short_context_cap(self, embedder):
        # 150 leaves, so the 30 hits stay sparse and mostly unmerged
        trees = [
            build_tree(unique_word_doc(f"big{i}", 200), [8, 64, 256])
            for i in range(6)
        ]
        index = index_build(trees, embedder)
        config = RetrieverConfig(top_k=30, merge_threshold=1.0, max_context_nodes=10)
        contexts = run_query(index, trees, embedder.embed("big0w3 big1w5"), config)
        assert len(contexts) == 10


class TestPersistence:
    def test_round_trip_bit_exact(self, small_corpus, tmp_path):
        trees, index = small_corpus
        path = tmp_path / "index.jsonl"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.node_ids == index.node_ids
        assert loaded.matrix.tobytes() == index.matrix.tobytes()

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "not_index.jsonl"
        path.write_text('{"format": "something-else"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="not a vector index"):
            load_index(path)
