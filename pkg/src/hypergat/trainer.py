"""Mini-batch training with Adam and early stopping, plus inductive prediction."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import numeric as nk
from .corpus import Document, Vocabulary, index_document, is_degenerate, tokenize
from .errors import ConfigError, DataError, NumericalError
from .hypergraph import TextHypergraph, build_hypergraph
from .model import HyperGATModel, VARIANTS, batch_loss, init_model, predict_logits
from .rng import STREAM_DROPOUT, STREAM_SHUFFLE, make_rng

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 8
    l2_lambda: float = 1e-6
    dropout_p: float = 0.3
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    variant: str = "full"
    layer_dims: tuple[int, ...] = (300, 100)

    def validate(self) -> None:
        if self.lr < 0 or self.l2_lambda < 0:
            raise ConfigError("lr and l2_lambda must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be positive")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError("dropout_p must be in [0, 1)")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not self.layer_dims or min(self.layer_dims) < 1:
            raise ConfigError("layer_dims must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    wall_time: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = "max_epochs"

    def to_json(self, wall_time: bool = False) -> dict:
        rows = []
        for e in self.epochs:
            row = asdict(e)
            if not wall_time:
                row.pop("wall_time")
            rows.append(row)
        return {"epochs": rows, "best_epoch": self.best_epoch, "stop_reason": self.stop_reason}


LabeledGraphs = tuple[Sequence[TextHypergraph], Sequence[int]]


def evaluate_accuracy(model: HyperGATModel, graphs: Sequence[TextHypergraph], labels: Sequence[int],
                      batch_size: int = 64) -> float:
    logits = predict_logits(model, graphs, batch_size)
    return float(np.mean(logits.argmax(axis=1) == np.asarray(labels)))


def train(config: TrainConfig, train_set: LabeledGraphs, val_set: LabeledGraphs,
          vocab_size: int, n_classes: int, model: HyperGATModel | None = None):
    """Train and return ``(model at best validation epoch, history)``."""
    config.validate()
    train_graphs, train_labels = list(train_set[0]), np.asarray(train_set[1], dtype=np.int64)
    val_graphs, val_labels = list(val_set[0]), np.asarray(val_set[1], dtype=np.int64)
    if not train_graphs or not val_graphs:
        raise DataError("training and validation sets must be non-empty")
    if model is None:
        model = init_model(vocab_size, config.layer_dims, n_classes, config.seed,
                           config.variant, config.dropout_p)
    names = [n for n, _ in model.named_parameters()]
    states = [nk.AdamState.like(p) for _, p in model.named_parameters()]
    shuffle_rng = make_rng(config.seed, STREAM_SHUFFLE)
    dropout_rng = make_rng(config.seed, STREAM_DROPOUT)

    history = TrainHistory()
    best_acc = -1.0
    best_model = model.copy()
    stale = 0
    n = len(train_graphs)
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            graphs = [train_graphs[i] for i in idx]
            labels = train_labels[idx]
            try:
                loss, grads, cache = batch_loss(model, graphs, labels, train=True, rng=dropout_rng,
                                                l2_lambda=config.l2_lambda)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, batch {bi}: {exc}") from exc
            loss_sum += loss * len(idx)
            correct += int(np.sum(cache.logits.argmax(axis=1) == labels))
            for name, (_, p), g, st in zip(names, model.named_parameters(), grads, states):
                nk.adam_step(p, g, st, config.lr, name)
        val_acc = evaluate_accuracy(model, val_graphs, val_labels)
        stats = EpochStats(epoch, loss_sum / n, correct / n, val_acc, time.perf_counter() - t0)
        history.epochs.append(stats)
        log.info("epoch %d loss %.4f train %.4f val %.4f (%.1fs)", epoch, stats.train_loss,
                 stats.train_acc, val_acc, stats.wall_time)
        if val_acc > best_acc:
            best_acc = val_acc
            best_model = model.copy()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                history.stop_reason = "early"
                break
    return best_model, history


# --------------------------------------------------------------------------
# inductive prediction


def graph_for_text(text: str, vocab: Vocabulary, topics=None, top_k: int | None = None,
                   sequential: bool = True, rank_within_doc: bool = False, doc_id: int = -1):
    """Hypergraph for unseen raw text, or None when no token is in the vocabulary."""
    doc = index_document(Document(doc_id, 0, tokenize(text), "test"), vocab)
    if is_degenerate(doc):
        return None
    return build_hypergraph(doc, topics, top_k, sequential, rank_within_doc)


def predict(model: HyperGATModel, docs: Sequence[Document], vocab: Vocabulary, topics=None,
            top_k: int | None = None, sequential: bool = True, rank_within_doc: bool = False) -> list[int]:
    """Predict class ids for token-string documents against a frozen vocabulary.

    Documents left with no in-vocabulary token get class 0 and a warning.
    """
    preds = []
    for doc in docs:
        indexed = index_document(doc, vocab)
        if is_degenerate(indexed):
            log.warning("document %s has no in-vocabulary tokens; predicting class 0", doc.id)
            preds.append(0)
            continue
        hg = build_hypergraph(indexed, topics, top_k, sequential, rank_within_doc)
        logits = predict_logits(model, [hg])[0]
        preds.append(int(np.argmax(logits)))
    return preds
