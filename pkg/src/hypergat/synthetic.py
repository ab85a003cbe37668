"""Synthetic labelled corpora for tests, benchmarks and demos."""

from __future__ import annotations

from pathlib import Path

from .corpus import RawRecord
from .rng import STREAM_SYNTH, make_rng


def _sentences(words: list[str], rng, min_len: int = 4, max_len: int = 8) -> str:
    out = []
    i = 0
    while i < len(words):
        n = int(rng.integers(min_len, max_len + 1))
        out.append(" ".join(words[i:i + n]) + " .")
        i += n
    return " ".join(out)


def keyword_corpus(n_docs: int, n_classes: int = 2, n_keywords: int = 5, n_shared: int = 20,
                   doc_len: int = 12, seed: int = 0) -> list[RawRecord]:
    """Each class owns a keyword vocabulary; documents mix own keywords with shared words."""
    rng = make_rng(seed, STREAM_SYNTH)
    shared = [f"common{i}" for i in range(n_shared)]
    records = []
    for i in range(n_docs):
        c = i % n_classes
        own = [f"class{c}kw{j}" for j in range(n_keywords)]
        words = [own[rng.integers(n_keywords)] if rng.random() < 0.5 else shared[rng.integers(n_shared)]
                 for _ in range(doc_len)]
        records.append(RawRecord(f"c{c}", _sentences(words, rng)))
    return records


def needle_corpus(n_docs: int, n_distractors: int = 30, n_keywords: int = 10, pool_size: int = 200,
                  seed: int = 0) -> list[RawRecord]:
    """Binary task decided by a single keyword hidden among ``n_distractors`` random words.

    Keywords are class-specific; distractors are drawn uniformly from a
    shared pool and carry no label information.
    """
    rng = make_rng(seed, STREAM_SYNTH)
    pool = [f"filler{i}" for i in range(pool_size)]
    records = []
    for _ in range(n_docs):
        c = int(rng.integers(2))
        words = [pool[j] for j in rng.integers(pool_size, size=n_distractors)]
        kw = f"{'ab'[c]}key{int(rng.integers(n_keywords))}"
        words.insert(int(rng.integers(n_distractors + 1)), kw)
        records.append(RawRecord("neg" if c == 0 else "pos", _sentences(words, rng)))
    return records


def two_cluster_corpus(n_per_cluster: int = 50, doc_len: int = 20, seed: int = 0) -> list[list[str]]:
    """Token lists from two disjoint vocabularies, {a, b} and {c, d}."""
    rng = make_rng(seed, STREAM_SYNTH)
    docs = []
    for vocab in (("a", "b"), ("c", "d")):
        for _ in range(n_per_cluster):
            docs.append([vocab[j] for j in rng.integers(2, size=doc_len)])
    return docs


def write_tsv(path, records) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(f"{r.label}\t{r.text}\n")
