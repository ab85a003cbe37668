import logging

import numpy as np
import pytest

from hypergat.config import Config
from hypergat.corpus import Document, RawRecord, Vocabulary, index_document, tokenize
from hypergat.errors import ConfigError, DataError
from hypergat.hypergraph import build_hypergraph
from hypergat.model import GraphBatch, forward, init_model
from hypergat.pipeline import graphs_for, prepare_corpus, run_experiment
from hypergat.synthetic import keyword_corpus
from hypergat.trainer import TrainConfig, evaluate_accuracy, graph_for_text, predict, train

VOCAB = Vocabulary(["good", "bad", "film", "plot", "great", "awful"], {})


def _graphs(texts):
    return [build_hypergraph(index_document(Document(i, 0, tokenize(t)), VOCAB)) for i, t in enumerate(texts)]


TWO = _graphs(["good great film .", "bad awful plot ."])


def _cfg(**kw):
    base = dict(layer_dims=(16, 8), max_epochs=50, patience=50, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_overfits_two_documents():
    model, hist = train(_cfg(lr=0.01), (TWO, [0, 1]), (TWO, [0, 1]), len(VOCAB), 2)
    assert max(e.train_acc for e in hist.epochs) == 1.0
    assert evaluate_accuracy(model, TWO, [0, 1]) == 1.0


def test_frozen_model_stops_after_two_epochs():
    init = init_model(len(VOCAB), (16, 8), 2, seed=0)
    model, hist = train(_cfg(lr=0.0, patience=1), (TWO, [0, 1]), (TWO, [0, 1]), len(VOCAB), 2)
    assert len(hist.epochs) == 2 and hist.stop_reason == "early" and hist.best_epoch == 1
    assert model.digest() == init.digest()


def test_deterministic_history():
    a = train(_cfg(max_epochs=5), (TWO, [0, 1]), (TWO, [0, 1]), len(VOCAB), 2)
    b = train(_cfg(max_epochs=5), (TWO, [0, 1]), (TWO, [0, 1]), len(VOCAB), 2)
    assert a[1].to_json() == b[1].to_json()
    assert a[0].digest() == b[0].digest()


def test_returns_best_validation_checkpoint():
    cfg = Config({"layer_dims": "16,8", "data.val_ratio": 0.7})
    corpus = prepare_corpus(keyword_corpus(40, seed=3, doc_len=6), cfg)
    tr = (graphs_for(corpus.train, None, cfg), [d.label_id for d in corpus.train])
    va = (graphs_for(corpus.val, None, cfg), [d.label_id for d in corpus.val])
    tc = _cfg(max_epochs=12, patience=12, lr=0.02)
    best, hist = train(tc, tr, va, len(corpus.vocab), 2)
    assert hist.best_epoch < len(hist.epochs)
    # replaying the same trajectory up to the best epoch ends on the returned parameters
    tc2 = _cfg(max_epochs=hist.best_epoch, patience=hist.best_epoch, lr=0.02)
    replay, _ = train(tc2, tr, va, len(corpus.vocab), 2)
    assert replay.digest() == best.digest()


def test_rejects_bad_config():
    with pytest.raises(ConfigError):
        TrainConfig(dropout_p=1.0).validate()
    with pytest.raises(DataError):
        train(_cfg(), ([], []), (TWO, [0, 1]), len(VOCAB), 2)


class TestPredict:
    def test_oov_only_predicts_zero_with_warning(self, caplog):
        model = init_model(len(VOCAB), (8,), 2)
        with caplog.at_level(logging.WARNING):
            assert predict(model, [Document(5, 1, [["zzz", "qqq"]], "test")], VOCAB) == [0]
        assert "no in-vocabulary tokens" in caplog.text
        assert graph_for_text("zzz qqq", VOCAB) is None

    def test_reproduces_forward(self):
        model = init_model(len(VOCAB), (8, 4), 2, seed=1)
        doc = Document(0, 0, [["good", "film"], ["awful", "plot"]])
        hg = build_hypergraph(index_document(doc, VOCAB))
        logits = forward(model, GraphBatch.from_graphs([hg])).logits[0]
        assert predict(model, [doc], VOCAB) == [int(np.argmax(logits))]

    def test_independent_of_batch(self):
        model = init_model(len(VOCAB), (8, 4), 3, seed=2)
        docs = [Document(i, 0, [t.split()]) for i, t in enumerate(
            ["good film", "bad plot", "great awful", "film plot good"])]
        together = predict(model, docs, VOCAB)
        alone = [predict(model, [d], VOCAB)[0] for d in docs]
        assert together == alone


def test_test_documents_cannot_influence_training():
    train_recs = keyword_corpus(30, seed=1)
    cfg = Config({"layer_dims": "8,4", "max_epochs": 3, "lda.iterations": 20})
    a = run_experiment(cfg, train_recs, [RawRecord("c0", "class0kw0 common1 .")], seed=0)
    b = run_experiment(cfg, train_recs, [RawRecord("c1", "class1kw2 never seen words .")] * 5, seed=0)
    assert a.corpus.vocab == b.corpus.vocab
    assert np.array_equal(a.topics.phi, b.topics.phi)
    assert a.model.digest() == b.model.digest()
