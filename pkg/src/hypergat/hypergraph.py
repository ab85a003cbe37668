"""Document-level text hypergraphs.

Each document becomes a hypergraph over its distinct in-vocabulary words:
one sequential hyperedge per sentence and one semantic hyperedge per LDA
topic (the document's words that are in the topic's top-K list).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Document
from .errors import DataError

SEQUENTIAL = "sequential"
SEMANTIC = "semantic"
FALLBACK = "fallback"


@dataclass(frozen=True)
class Hyperedge:
    kind: str
    members: tuple[int, ...]  # sorted local node positions


@dataclass
class TextHypergraph:
    nodes: list[int]  # vocabulary ids, first-occurrence order
    edges: list[Hyperedge]
    doc_id: int = -1
    edge_lists_by_node: list[list[int]] = field(init=False)

    def __post_init__(self):
        by_node: list[list[int]] = [[] for _ in self.nodes]
        for j, e in enumerate(self.edges):
            for k in e.members:
                by_node[k].append(j)
        self.edge_lists_by_node = by_node

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def node_attr_ids(self) -> list[int]:
        # one-hot attribute column == vocabulary index
        return self.nodes

    def validate(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise DataError("duplicate nodes in hypergraph")
        for e in self.edges:
            if list(e.members) != sorted(set(e.members)):
                raise DataError("edge members must be sorted and unique")
            if any(k < 0 or k >= self.n for k in e.members):
                raise DataError("edge member out of range")
            lower = 1 if e.kind == FALLBACK else 2
            if len(e.members) < lower:
                raise DataError(f"{e.kind} edge with {len(e.members)} member(s)")
        if any(not lst for lst in self.edge_lists_by_node):
            raise DataError("node without incident edge")

    def edge_word_sets(self) -> list[tuple[str, frozenset]]:
        """Edges as (kind, set of vocabulary ids); independent of node order."""
        return [(e.kind, frozenset(self.nodes[k] for k in e.members)) for e in self.edges]

    def to_json(self, words: Sequence[str] | None = None) -> dict:
        name = (lambda i: words[i]) if words is not None else (lambda i: i)
        return {
            "doc_id": self.doc_id,
            "nodes": [name(v) for v in self.nodes],
            "edges": [
                {"kind": e.kind, "members": [name(self.nodes[k]) for k in e.members]}
                for e in self.edges
            ],
        }


def _topic_members(topics, t: int, top_k: int, pos: dict[int, int], rank_within_doc: bool) -> list[int]:
    if rank_within_doc:
        phi = getattr(topics, "phi", None)
        if phi is None:
            raise DataError("rank_within_doc needs topic-word probabilities (phi)")
        doc_words = np.fromiter(pos.keys(), dtype=np.int64)
        scores = phi[t, doc_words]
        order = np.lexsort((doc_words, -scores))[:top_k]
        return [pos[int(w)] for w in doc_words[order]]
    top = topics.top_words[t]
    if top_k > len(top):
        raise DataError(f"requested top-{top_k} words but topic lists hold {len(top)}")
    return [pos[w] for w in top[:top_k] if w in pos]


def build_hypergraph(
    doc: Document,
    topics=None,
    top_k: int | None = None,
    sequential: bool = True,
    rank_within_doc: bool = False,
) -> TextHypergraph:
    """Build the hypergraph of an index-encoded document.

    ``topics`` is a fitted TopicModel / TopicLists or None (no semantic
    edges). ``sequential=False`` drops sentence edges.
    """
    pos: dict[int, int] = {}
    for sent in doc.sentences:
        for w in sent:
            if w not in pos:
                pos[w] = len(pos)
    if not pos:
        raise DataError(f"document {doc.id} has no in-vocabulary tokens")
    nodes = list(pos)

    edges: list[Hyperedge] = []
    if sequential:
        for sent in doc.sentences:
            members = sorted({pos[w] for w in sent})
            if len(members) >= 2:
                edges.append(Hyperedge(SEQUENTIAL, tuple(members)))
    if topics is not None:
        k = topics.top_k if top_k is None else top_k
        for t in range(topics.n_topics):
            members = sorted(set(_topic_members(topics, t, k, pos, rank_within_doc)))
            if len(members) >= 2:
                edges.append(Hyperedge(SEMANTIC, tuple(members)))

    # every node must have an incident edge for edge-level aggregation
    covered = set()
    for e in edges:
        covered.update(e.members)
    if not edges:
        edges.append(Hyperedge(FALLBACK, tuple(range(len(nodes)))))
    elif len(covered) < len(nodes):
        # words isolated by the >=2 rule (e.g. one-word sentences) join a fallback edge
        rest = tuple(k for k in range(len(nodes)) if k not in covered)
        edges.append(Hyperedge(FALLBACK, rest))
    return TextHypergraph(nodes, edges, doc.id)


@dataclass(frozen=True)
class IncidenceMatrix:
    n: int
    m: int
    rows: tuple[tuple[int, ...], ...]  # per node: incident edge ids
    cols: tuple[tuple[int, ...], ...]  # per edge: member node ids

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.m), dtype=np.int8)
        for j, members in enumerate(self.cols):
            a[list(members), j] = 1
        return a


def incidence(hg: TextHypergraph) -> IncidenceMatrix:
    return IncidenceMatrix(
        hg.n,
        hg.m,
        tuple(tuple(lst) for lst in hg.edge_lists_by_node),
        tuple(e.members for e in hg.edges),
    )


def memory_elements(n: int, m: int, bsz: int, vocab_size: int, n_docs: int) -> tuple[int, int]:
    """Element counts of per-batch incidence matrices vs. a corpus-level word+document graph."""
    args = dict(n=n, m=m, bsz=bsz, vocab_size=vocab_size, n_docs=n_docs)
    for name, v in args.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    return int(n) * int(m) * int(bsz), (int(vocab_size) + int(n_docs)) ** 2
