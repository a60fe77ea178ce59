from __future__ import annotations

import random
from pathlib import Path

import pytest

from preop_rag.corpus import GuidelineDoc, Jurisdiction, NodeTree, build_tree

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def make_doc(doc_id: str, words: list[str], jurisdiction: str = "local") -> GuidelineDoc:
    return GuidelineDoc(
        id=doc_id,
        title=f"doc {doc_id}",
        jurisdiction=Jurisdiction(jurisdiction),
        source_name="test",
        body=" ".join(words),
    )


def random_tree(rng: random.Random, doc_id: str) -> NodeTree:
    """A random 1-4 level tree with at most ~100 nodes."""
    leaf_size = rng.randint(1, 4)
    sizes = [leaf_size]
    for _ in range(rng.randint(1, 3)):
        sizes.append(sizes[-1] * rng.randint(2, 4))
    word_count = rng.randint(1, leaf_size * 55)
    words = [f"w{i}" for i in range(word_count)]
    return build_tree(make_doc(doc_id, words), sizes)


def unique_word_doc(doc_id: str, word_count: int, jurisdiction: str = "local") -> GuidelineDoc:
    """Document whose words are globally unique, so every leaf embeds distinctly."""
    words = [f"{doc_id}w{i}" for i in range(word_count)]
    return make_doc(doc_id, words, jurisdiction)
