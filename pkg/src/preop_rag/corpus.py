"""Guideline corpus ingestion and hierarchical chunk trees.

Guideline files are plain UTF-8 text: a block of `key: value` header lines
(`id`, `title`, `jurisdiction`, `source`), a blank line, then the body.
A "word" throughout this package is a maximal run of non-whitespace
characters; all spans count words, never characters.

Each document is windowed into a tree: level 0 holds consecutive word
windows of a fixed size, and every higher level greedily groups
consecutive lower-level nodes while its configured word budget allows.
Retrieval embeds the leaves and later re-merges them bottom-up.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

DEFAULT_LEVEL_SIZES = (128, 512, 2048)

HEADER_FIELDS = ("id", "title", "jurisdiction", "source")

__all__ = [
    "DEFAULT_LEVEL_SIZES",
    "Jurisdiction",
    "GuidelineDoc",
    "ChunkNode",
    "NodeTree",
    "CorpusError",
    "load_corpus",
    "parse_guideline",
    "build_tree",
]


class CorpusError(ValueError):
    """Malformed guideline file or corpus-level inconsistency."""


class Jurisdiction(str, enum.Enum):
    LOCAL = "local"
    INTERNATIONAL = "international"


@dataclass(frozen=True)
class GuidelineDoc:
    id: str
    title: str
    jurisdiction: Jurisdiction
    source_name: str
    body: str
    word_count: int = field(default=-1)

    def __post_init__(self) -> None:
        count = len(self.body.split())
        if self.word_count == -1:
            object.__setattr__(self, "word_count", count)
        elif self.word_count != count:
            raise CorpusError(
                f"doc {self.id!r}: word_count {self.word_count} does not match body ({count})"
            )


@dataclass(frozen=True)
class ChunkNode:
    id: str
    doc_id: str
    level: int
    word_span: tuple[int, int]
    text: str
    parent_id: str | None = None
    child_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        start, end = self.word_span
        if not start < end:
            raise ValueError(f"node {self.id!r}: empty span {self.word_span}")

    @property
    def is_leaf(self) -> bool:
        return self.level == 0

    @property
    def span_len(self) -> int:
        return self.word_span[1] - self.word_span[0]


@dataclass
class NodeTree:
    doc_id: str
    level_sizes: tuple[int, ...]
    nodes: dict[str, ChunkNode]
    root_id: str

    def node(self, node_id: str) -> ChunkNode:
        return self.nodes[node_id]

    def leaves(self) -> list[ChunkNode]:
        found = [n for n in self.nodes.values() if n.is_leaf]
        found.sort(key=lambda n: n.word_span[0])
        return found

    def descendants(self, node_id: str) -> Iterable[str]:
        """All strict descendants of `node_id`, preorder."""
        stack = list(self.nodes[node_id].child_ids)
        while stack:
            current = stack.pop()
            yield current
            stack.extend(self.nodes[current].child_ids)

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        root = self.nodes[self.root_id]
        if root.parent_id is not None:
            raise ValueError("root must have no parent")
        non_roots = [n for n in self.nodes.values() if n.id != self.root_id]
        for node in non_roots:
            if node.parent_id is None:
                raise ValueError(f"non-root {node.id!r} has no parent")
            parent = self.nodes[node.parent_id]
            if node.id not in parent.child_ids:
                raise ValueError(f"{node.id!r} missing from parent's children")
        for node in self.nodes.values():
            if node.is_leaf:
                if node.child_ids:
                    raise ValueError(f"leaf {node.id!r} has children")
                continue
            if not node.child_ids:
                raise ValueError(f"non-leaf {node.id!r} has no children")
            children = [self.nodes[c] for c in node.child_ids]
            spans = [c.word_span for c in children]
            if node.word_span != (spans[0][0], spans[-1][1]):
                raise ValueError(f"{node.id!r} span does not cover its children")
            for left, right in zip(spans, spans[1:]):
                if left[1] != right[0]:
                    raise ValueError(f"{node.id!r} children are not contiguous")
        leaves = self.leaves()
        cursor = 0
        for leaf in leaves:
            if leaf.word_span[0] != cursor:
                raise ValueError("leaves do not partition the document")
            cursor = leaf.word_span[1]
        if cursor != root.word_span[1]:
            raise ValueError("leaves do not cover the document")
        if list(self.level_sizes) != sorted(set(self.level_sizes)):
            raise ValueError("level_sizes must be strictly increasing")


def parse_guideline(path: Path) -> GuidelineDoc:
    """Parse one guideline file (header block, blank line, body)."""
    raw = path.read_text(encoding="utf-8")
    header: dict[str, str] = {}
    lines = raw.split("\n")
    body_start = len(lines)
    for i, line in enumerate(lines):
        if not line.strip():
            body_start = i + 1
            break
        if ":" not in line:
            raise CorpusError(f"{path.name}: malformed header line {line!r}")
        key, value = line.split(":", 1)
        header[key.strip().lower()] = value.strip()
    for required in HEADER_FIELDS:
        if not header.get(required):
            raise CorpusError(f"{path.name}: missing header field {required!r}")
    jurisdiction_raw = header["jurisdiction"].lower()
    try:
        jurisdiction = Jurisdiction(jurisdiction_raw)
    except ValueError:
        raise CorpusError(
            f"{path.name}: invalid header field 'jurisdiction': {jurisdiction_raw!r}"
        ) from None
    body = "\n".join(lines[body_start:])
    return GuidelineDoc(
        id=header["id"],
        title=header["title"],
        jurisdiction=jurisdiction,
        source_name=header["source"],
        body=body,
    )


def load_corpus(directory: Path | str) -> list[GuidelineDoc]:
    """Load every guideline file in `directory`, ordered by document id.

    Hidden files and subdirectories are skipped. Duplicate ids raise a
    corpus-level error naming both files.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"not a directory: {directory}")
    docs: list[GuidelineDoc] = []
    seen: dict[str, str] = {}
    for path in sorted(directory.iterdir()):
        if path.name.startswith(".") or not path.is_file():
            continue
        doc = parse_guideline(path)
        if doc.id in seen:
            raise CorpusError(
                f"duplicate document id {doc.id!r} in {path.name} and {seen[doc.id]}"
            )
        seen[doc.id] = path.name
        docs.append(doc)
    docs.sort(key=lambda d: d.id)
    return docs


def _window(count: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(start + size, count)) for start in range(0, count, size)]


def build_tree(
    doc: GuidelineDoc, level_sizes: Iterable[int] = DEFAULT_LEVEL_SIZES
) -> NodeTree:
    """Build the hierarchical chunk tree for one document.

    Level 0 nodes are consecutive word windows of `level_sizes[0]` words
    (the last may be shorter). Each higher level groups consecutive
    lower-level nodes greedily left to right while the group stays within
    that level's word budget. If the top configured level still has more
    than one node, a single synthetic root spanning the whole document is
    added above it. Grouping stops early once a level holds a single node.

    Pure function of (doc.body, level_sizes).
    """
    sizes = tuple(int(s) for s in level_sizes)
    if not sizes:
        raise ValueError("level_sizes must be nonempty")
    if any(s < 1 for s in sizes):
        raise ValueError("level_sizes must be >= 1")
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("level_sizes must be strictly increasing")

    words = doc.body.split()
    if not words:
        raise CorpusError("empty document")
    total = len(words)

    def make_id(level: int, start: int) -> str:
        return f"{doc.id}:{level}:{start:06d}"

    def make_node(level: int, span: tuple[int, int]) -> ChunkNode:
        start, end = span
        return ChunkNode(
            id=make_id(level, start),
            doc_id=doc.id,
            level=level,
            word_span=span,
            text=" ".join(words[start:end]),
        )

    levels: list[list[ChunkNode]] = [[make_node(0, s) for s in _window(total, sizes[0])]]
    for level in range(1, len(sizes)):
        below = levels[-1]
        if len(below) == 1:
            break
        budget = sizes[level]
        groups: list[list[ChunkNode]] = [[below[0]]]
        for node in below[1:]:
            current = groups[-1]
            if node.word_span[1] - current[0].word_span[0] <= budget:
                current.append(node)
            else:
                groups.append([node])
        levels.append(
            [
                make_node(level, (g[0].word_span[0], g[-1].word_span[1]))
                for g in groups
            ]
        )
    if len(levels[-1]) > 1:
        levels.append([make_node(len(levels), (0, total))])

    # Wire parent/child links; each level's nodes cover the level below in order.
    nodes: dict[str, ChunkNode] = {n.id: n for n in levels[0]}
    for level in range(1, len(levels)):
        lower = levels[level - 1]
        cursor = 0
        for parent in levels[level]:
            children: list[ChunkNode] = []
            while cursor < len(lower) and lower[cursor].word_span[1] <= parent.word_span[1]:
                children.append(lower[cursor])
                cursor += 1
            wired = ChunkNode(
                id=parent.id,
                doc_id=parent.doc_id,
                level=parent.level,
                word_span=parent.word_span,
                text=parent.text,
                child_ids=tuple(c.id for c in children),
            )
            nodes[wired.id] = wired
            for child in children:
                nodes[child.id] = ChunkNode(
                    id=child.id,
                    doc_id=child.doc_id,
                    level=child.level,
                    word_span=child.word_span,
                    text=child.text,
                    parent_id=wired.id,
                    child_ids=child.child_ids,
                )
        levels[level - 1] = [nodes[n.id] for n in lower]
        levels[level] = [nodes[n.id] for n in levels[level]]

    root_id = levels[-1][0].id
    return NodeTree(doc_id=doc.id, level_sizes=sizes, nodes=nodes, root_id=root_id)
