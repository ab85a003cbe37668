"""Latent Dirichlet allocation by collapsed Gibbs sampling.

Token-topic assignments are resampled one token at a time from

    p(z = t | rest) ∝ (n_dt + alpha) * (n_tw + beta) / (n_t + V * beta)

with the token's own assignment removed from the counts. Uniform draws
for a sweep are taken from the seeded Philox stream up front, so the
sampler itself is a deterministic function of those draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .rng import STREAM_LDA, make_rng

try:  # the sweep kernel is a tight scalar loop
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


def _sweep(words, docs, z, n_dt, n_tw, n_t, uniforms, alpha, beta, vbeta):
    n_topics = n_t.shape[0]
    p = np.empty(n_topics)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        t = z[i]
        n_dt[d, t] -= 1
        n_tw[t, w] -= 1
        n_t[t] -= 1
        total = 0.0
        for k in range(n_topics):
            total += (n_dt[d, k] + alpha) * (n_tw[k, w] + beta) / (n_t[k] + vbeta)
            p[k] = total
        u = uniforms[i] * total
        t = n_topics - 1
        for k in range(n_topics):
            if u < p[k]:
                t = k
                break
        z[i] = t
        n_dt[d, t] += 1
        n_tw[t, w] += 1
        n_t[t] += 1


if njit is not None:
    _sweep = njit(cache=False, nogil=True)(_sweep)


@dataclass
class TopicModel:
    phi: np.ndarray  # (T, V)
    top_words: list[list[int]]
    alpha: float
    beta: float
    iterations: int
    seed: int

    @property
    def n_topics(self) -> int:
        return self.phi.shape[0]

    @property
    def top_k(self) -> int:
        return len(self.top_words[0]) if self.top_words else 0

    def to_json(self, words: Sequence[str]) -> dict:
        return {
            "T": self.n_topics,
            "K": self.top_k,
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "topics": [
                {"id": t, "top_words": [words[i] for i in tw]}
                for t, tw in enumerate(self.top_words)
            ],
        }


@dataclass(eq=False)
class TopicLists:
    """Topic top-word lists as read back from ``topics.json``.

    Enough for hypergraph construction under the default (global list)
    reading. ``phi`` is attached when the within-document ranking needs it.
    """

    top_words: list[list[int]]
    phi: np.ndarray | None = None

    @property
    def n_topics(self) -> int:
        return len(self.top_words)

    @property
    def top_k(self) -> int:
        return len(self.top_words[0]) if self.top_words else 0

    @classmethod
    def from_json(cls, data: dict, index: dict[str, int]) -> "TopicLists":
        lists = []
        for topic in data["topics"]:
            lists.append([index[w] for w in topic["top_words"] if w in index])
        return cls(lists)

    @classmethod
    def load(cls, path, index: dict[str, int]) -> "TopicLists":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), index)


def default_alpha(n_topics: int) -> float:
    return 50.0 / n_topics


def top_k_words(phi_row: np.ndarray, k: int) -> list[int]:
    """Indices of the ``k`` largest entries, ties broken by smaller index."""
    if k > phi_row.shape[0]:
        raise ConfigError(f"K={k} exceeds vocabulary size {phi_row.shape[0]}")
    if k < 1:
        raise ConfigError("K must be >= 1")
    order = np.lexsort((np.arange(phi_row.shape[0]), -phi_row))
    return order[:k].tolist()


def fit_lda(
    docs: Sequence[Sequence[int]],
    vocab_size: int,
    n_topics: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 200,
    seed: int = 0,
    top_k: int = 10,
    on_sweep: Callable[[int, np.ndarray], None] | None = None,
) -> TopicModel:
    """Fit LDA on index-encoded training documents.

    ``docs`` holds one flat list of vocabulary indices per document.
    ``on_sweep(sweep, n_t)`` is called after initialisation (sweep 0) and
    after every Gibbs sweep.
    """
    if n_topics < 1:
        raise ConfigError(f"topic count must be >= 1, got {n_topics}")
    if iterations < 0:
        raise ConfigError("iterations must be >= 0")
    if alpha is None:
        alpha = default_alpha(n_topics)
    lengths = np.array([len(d) for d in docs], dtype=np.int64)
    if lengths.sum() == 0:
        raise DataError("LDA corpus has no tokens")
    words = np.concatenate([np.asarray(d, dtype=np.int64) for d in docs if len(d)])
    if words.min() < 0 or words.max() >= vocab_size:
        raise DataError("token index outside vocabulary")
    doc_of = np.repeat(np.arange(len(docs), dtype=np.int64), lengths)

    rng = make_rng(seed, STREAM_LDA)
    z = rng.integers(0, n_topics, size=words.shape[0]).astype(np.int64)
    n_dt = np.zeros((len(docs), n_topics), dtype=np.int64)
    n_tw = np.zeros((n_topics, vocab_size), dtype=np.int64)
    np.add.at(n_dt, (doc_of, z), 1)
    np.add.at(n_tw, (z, words), 1)
    n_t = n_tw.sum(axis=1)
    if on_sweep is not None:
        on_sweep(0, n_t.copy())

    vbeta = vocab_size * beta
    for it in range(1, iterations + 1):
        uniforms = rng.random(words.shape[0])
        _sweep(words, doc_of, z, n_dt, n_tw, n_t, uniforms, float(alpha), float(beta), float(vbeta))
        if on_sweep is not None:
            on_sweep(it, n_t.copy())

    phi = (n_tw + beta) / (n_t[:, None] + vbeta)
    k = min(top_k, vocab_size)
    top = [top_k_words(phi[t], k) for t in range(n_topics)]
    return TopicModel(phi, top, float(alpha), float(beta), iterations, seed)
