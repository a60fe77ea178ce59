from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_doc
from oracles import window_level_counts
from preop_rag.corpus import (
    CorpusError,
    Jurisdiction,
    build_tree,
    load_corpus,
    parse_guideline,
)


def write_guideline(path, doc_id="g1", jurisdiction="local", body="a b c"):
    path.write_text(
        f"id: {doc_id}\ntitle: T\njurisdiction: {jurisdiction}\nsource: S\n\n{body}\n",
        encoding="utf-8",
    )


class TestLoadCorpus:
    def test_empty_directory(self, tmp_path):
        assert load_corpus(tmp_path) == []

    def test_single_file_word_count(self, tmp_path):
        write_guideline(tmp_path / "g1.txt", body="a b c")
        docs = load_corpus(tmp_path)
        assert len(docs) == 1
        assert docs[0].jurisdiction is Jurisdiction.LOCAL
        assert docs[0].word_count == 3

    def test_duplicate_id_rejected(self, tmp_path):
        write_guideline(tmp_path / "one.txt", doc_id="g1")
        write_guideline(tmp_path / "two.txt", doc_id="g1")
        with pytest.raises(CorpusError, match="duplicate document id 'g1'"):
            load_corpus(tmp_path)

    def test_missing_header_field_named(self, tmp_path):
        (tmp_path / "bad.txt").write_text(
            "id: g1\ntitle: T\nsource: S\n\nbody\n", encoding="utf-8"
        )
        with pytest.raises(CorpusError, match="jurisdiction"):
            load_corpus(tmp_path)

    def test_invalid_jurisdiction_named(self, tmp_path):
        write_guideline(tmp_path / "bad.txt", jurisdiction="galactic")
        with pytest.raises(CorpusError, match="jurisdiction"):
            parse_guideline(tmp_path / "bad.txt")

    def test_ordering_by_id(self, tmp_path):
        write_guideline(tmp_path / "zz.txt", doc_id="a2")
        write_guideline(tmp_path / "aa.txt", doc_id="a10")
        assert [d.id for d in load_corpus(tmp_path)] == ["a10", "a2"]


class TestBuildTree:
    def test_short_doc_single_node(self):
        doc = make_doc("d", [f"w{i}" for i in range(100)])
        tree = build_tree(doc, [128, 512, 2048])
        assert len(tree.nodes) == 1
        root = tree.node(tree.root_id)
        assert root.is_leaf and root.word_span == (0, 100)

    def test_thousand_words_counts_match_oracle(self):
        doc = make_doc("d", [f"w{i}" for i in range(1000)])
        tree = build_tree(doc, [128, 512, 2048])
        by_level: dict[int, int] = {}
        for node in tree.nodes.values():
            by_level[node.level] = by_level.get(node.level, 0) + 1
        assert by_level == {0: 8, 1: 2, 2: 1}
        assert window_level_counts(1000, [128, 512, 2048]) == [8, 2, 1]

    def test_synthetic_root_when_top_level_splits(self):
        doc = make_doc("d", [f"w{i}" for i in range(5000)])
        tree = build_tree(doc, [128, 512, 2048])
        root = tree.node(tree.root_id)
        assert root.level == 3  # one above the top configured level
        assert root.word_span == (0, 5000)
        tree.validate()

    def test_leaf_concatenation_reproduces_body(self):
        words = [f"w{i}" for i in range(777)]
        tree = build_tree(make_doc("d", words), [16, 64, 256])
        joined = " ".join(leaf.text for leaf in tree.leaves())
        assert joined == " ".join(words)

    def test_empty_body_rejected(self):
        doc = make_doc("d", [])
        with pytest.raises(CorpusError, match="empty document"):
            build_tree(doc, [128])

    def test_level_sizes_validation(self):
        doc = make_doc("d", ["a", "b"])
        with pytest.raises(ValueError):
            build_tree(doc, [])
        with pytest.raises(ValueError):
            build_tree(doc, [128, 128])
        with pytest.raises(ValueError):
            build_tree(doc, [512, 128])

    def test_determinism(self):
        doc = make_doc("d", [f"w{i}" for i in range(999)])
        t1 = build_tree(doc, [32, 128])
        t2 = build_tree(doc, [32, 128])
        assert t1.nodes == t2.nodes and t1.root_id == t2.root_id


@settings(max_examples=150, deadline=None)
@given(
    word_count=st.integers(min_value=1, max_value=600),
    leaf=st.integers(min_value=1, max_value=9),
    factors=st.lists(st.integers(min_value=2, max_value=5), min_size=0, max_size=3),
)
def test_tree_invariants_roundtrip(word_count, leaf, factors):
    sizes = [leaf]
    for factor in factors:
        sizes.append(sizes[-1] * factor)
    words = [f"w{i}" for i in range(word_count)]
    tree = build_tree(make_doc("d", words), sizes)
    tree.validate()
    # leaves partition the word sequence and reproduce the body
    leaves = tree.leaves()
    assert leaves[0].word_span[0] == 0
    assert leaves[-1].word_span[1] == word_count
    assert " ".join(leaf.text for leaf in leaves) == " ".join(words)
    # parent spans cover exactly their children
    for node in tree.nodes.values():
        if node.child_ids:
            children = [tree.node(c) for c in node.child_ids]
            assert node.word_span == (
                children[0].word_span[0],
                children[-1].word_span[1],
            )
    # per-level counts match the span-recount oracle
    by_level: dict[int, int] = {}
    for node in tree.nodes.values():
        by_level[node.level] = by_level.get(node.level, 0) + 1
    expected = window_level_counts(word_count, sizes)
    assert [by_level[level] for level in sorted(by_level)] == expected


def test_random_trees_validate():
    rng = random.Random(7)
    from conftest import random_tree

    for i in range(50):
        random_tree(rng, f"doc{i}").validate()
