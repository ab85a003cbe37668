from __future__ import annotations

import numpy as np
import pytest

from hypergat import numeric as nk
from hypergat.hypergraph import FALLBACK, SEQUENTIAL, Hyperedge, TextHypergraph


@pytest.fixture
def f64():
    with nk.precision("float64"):
        yield


@pytest.fixture(autouse=True)
def _reset_precision():
    yield
    nk.set_precision("float32")


def random_hypergraph(rng: np.random.Generator, max_nodes: int = 6, max_edges: int = 4,
                      vocab_size: int = 20, doc_id: int = 0) -> TextHypergraph:
    """Random valid hypergraph: distinct vocabulary ids, every node covered."""
    n = int(rng.integers(2, max_nodes + 1))
    nodes = rng.choice(vocab_size, size=n, replace=False).tolist()
    m = int(rng.integers(1, max_edges + 1))
    edges = []
    for _ in range(m):
        size = int(rng.integers(2, n + 1))
        edges.append(Hyperedge(SEQUENTIAL, tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))))
    covered = {k for e in edges for k in e.members}
    rest = tuple(k for k in range(n) if k not in covered)
    if rest:
        edges.append(Hyperedge(FALLBACK, rest))
    return TextHypergraph(nodes, edges, doc_id)
