"""End-to-end experiment: raw records in, test accuracy out."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numeric as nk
from .config import Config
from .corpus import (Document, LabelSet, RawRecord, Vocabulary, build_vocabulary, default_min_freq,
                     index_document, is_degenerate, make_documents, split_train_val)
from .errors import DataError
from .evaluation import RunSummary, accuracy, repeated_runs
from .hypergraph import TextHypergraph, build_hypergraph
from .lda import TopicModel, fit_lda
from .model import HyperGATModel, predict_logits
from .trainer import TrainHistory, predict, train

log = logging.getLogger(__name__)


@dataclass
class PreparedCorpus:
    labels: LabelSet
    vocab: Vocabulary
    train: list[Document]  # index-encoded
    val: list[Document]


def prepare_corpus(records: Sequence[RawRecord], cfg: Config, split_seed: int | None = None) -> PreparedCorpus:
    """Split, build the vocabulary from the train part and index both parts."""
    labels = LabelSet.from_records(records)
    docs = make_documents(list(records), labels, "train")
    seed = cfg["data.split_seed"] if split_seed is None else split_seed
    train_docs, val_docs = split_train_val(docs, cfg["data.val_ratio"], seed)
    min_freq = cfg["data.min_freq"]
    if min_freq == "auto":
        min_freq = default_min_freq(len(train_docs))
    vocab = build_vocabulary(train_docs, min_freq)
    train_ix = [index_document(d, vocab) for d in train_docs]
    bad = [d.id for d in train_ix if is_degenerate(d)]
    if bad:
        raise DataError(f"training documents without in-vocabulary tokens: {bad[:10]}"
                        f"{' ...' if len(bad) > 10 else ''} (lower data.min_freq)")
    val_ix = [index_document(d, vocab) for d in val_docs]
    return PreparedCorpus(labels, vocab, train_ix, val_ix)


def fit_topics(corpus: PreparedCorpus, cfg: Config) -> TopicModel | None:
    if not cfg["hypergraph.semantic"]:
        return None
    n_topics = cfg["lda.topics"]
    if n_topics == "auto":
        n_topics = len(corpus.labels)
    alpha = None if cfg["lda.alpha"] == "auto" else cfg["lda.alpha"]
    k = min(cfg["lda.topk"], len(corpus.vocab))
    return fit_lda([d.tokens() for d in corpus.train], len(corpus.vocab), n_topics, alpha,
                   cfg["lda.beta"], cfg["lda.iterations"], cfg["lda.seed"], k)


def graphs_for(docs: Sequence[Document], topics, cfg: Config) -> list[TextHypergraph | None]:
    """Hypergraphs of index-encoded documents; None for degenerate ones."""
    out = []
    for d in docs:
        if is_degenerate(d):
            out.append(None)
            continue
        out.append(build_hypergraph(d, topics, None, cfg["hypergraph.sequential"],
                                    cfg["semantic.rank_within_doc"]))
    return out


def predict_graphs(model: HyperGATModel, graphs: Sequence[TextHypergraph | None]) -> list[int]:
    """Argmax predictions; degenerate (None) documents get class 0."""
    present = [g for g in graphs if g is not None]
    logits = predict_logits(model, present, batch_size=64)
    it = iter(logits.argmax(axis=1).tolist())
    return [0 if g is None else next(it) for g in graphs]


@dataclass
class RunResult:
    model: HyperGATModel
    history: TrainHistory
    corpus: PreparedCorpus
    topics: TopicModel | None
    test_accuracy: float | None


def run_experiment(cfg: Config, train_records: Sequence[RawRecord], test_records: Sequence[RawRecord] | None,
                   seed: int) -> RunResult:
    """One independent run: split, vocabulary, LDA, hypergraphs, training and test evaluation."""
    nk.set_precision(cfg["precision"])
    corpus = prepare_corpus(train_records, cfg, split_seed=seed)
    topics = fit_topics(corpus, cfg)
    train_graphs = graphs_for(corpus.train, topics, cfg)
    val_graphs = graphs_for(corpus.val, topics, cfg)
    val_keep = [i for i, g in enumerate(val_graphs) if g is not None]
    if len(val_keep) < len(val_graphs):
        log.warning("%d validation documents have no in-vocabulary tokens; they are skipped",
                    len(val_graphs) - len(val_keep))
    tc = cfg.train_config(seed=seed)
    model, history = train(
        tc,
        (train_graphs, [d.label_id for d in corpus.train]),
        ([val_graphs[i] for i in val_keep], [corpus.val[i].label_id for i in val_keep]),
        len(corpus.vocab), len(corpus.labels),
    )
    test_acc = None
    if test_records is not None:
        test_docs = make_documents(list(test_records), corpus.labels, "test")
        preds = predict(model, test_docs, corpus.vocab, topics, None,
                        cfg["hypergraph.sequential"], cfg["semantic.rank_within_doc"])
        test_acc = accuracy(preds, [d.label_id for d in test_docs])
    return RunResult(model, history, corpus, topics, test_acc)


def run_repeated(cfg: Config, train_records, test_records, n: int, base_seed: int) -> RunSummary:
    def run(seed):
        res = run_experiment(cfg, train_records, test_records, seed)
        return res.test_accuracy, {"best_epoch": res.history.best_epoch,
                                   "epochs": len(res.history.epochs)}
    return repeated_runs(run, n, base_seed)


ABLATIONS = {
    "w/o attention": {"variant": "no_attention"},
    "w/o sequential": {"hypergraph.sequential": False},
    "w/o semantic": {"hypergraph.semantic": False},
    "HyperGAT (1 layer)": {"layer_dims": (300,)},
    "HyperGAT": {},
}


def ablation_config(base: Config, name: str) -> Config:
    cfg = Config(base.as_dict())
    for k, v in ABLATIONS[name].items():
        if k == "layer_dims":
            v = (base["layer_dims"][0],)
        cfg.set(k, v)
    return cfg


def mean_graph_size(graphs: Sequence[TextHypergraph | None]) -> tuple[float, float]:
    present = [g for g in graphs if g is not None]
    return float(np.mean([g.n for g in present])), float(np.mean([g.m for g in present]))
