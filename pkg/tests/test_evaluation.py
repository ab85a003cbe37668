import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypergat.config import Config
from hypergat.errors import DataError
from hypergat.evaluation import RunFailed, RunSummary, accuracy, export_embeddings, repeated_runs
from hypergat.model import document_embeddings, init_model
from hypergat.pipeline import ablation_config, run_repeated
from hypergat.synthetic import keyword_corpus

from conftest import random_hypergraph


def test_accuracy_examples():
    assert accuracy([1, 0, 2], [1, 0, 2]) == 1.0
    assert accuracy([0, 1], [0, 0]) == 0.5
    with pytest.raises(ValueError):
        accuracy([0], [0, 1])


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1), st.randoms(use_true_random=False))
def test_accuracy_permutation_invariant(pairs, rnd):
    p, y = zip(*pairs)
    shuffled = rnd.sample(pairs, len(pairs))
    p2, y2 = zip(*shuffled)
    assert accuracy(p, y) == accuracy(p2, y2)


class TestRunSummary:
    def test_single_run(self):
        s = repeated_runs(lambda seed: 0.8, 1, 5)
        assert s.mean == 0.8 and s.std is None and s.seeds == [5]

    def test_identical_runs_zero_std(self):
        assert repeated_runs(lambda seed: 0.75, 4).std == 0.0

    def test_sample_std(self):
        s = RunSummary([0.7, 0.8, 0.9], [0, 1, 2])
        assert s.std == pytest.approx(0.1)
        assert "n=3" in str(s)

    def test_failure_names_seed(self):
        def run(seed):
            if seed == 2:
                raise DataError("boom")
            return 1.0
        with pytest.raises(RunFailed, match="seed 2") as exc:
            repeated_runs(run, 3)
        assert exc.value.exit_code == DataError.exit_code

    def test_end_to_end_reproducible(self):
        recs = keyword_corpus(40, seed=2)
        cfg = Config({"layer_dims": "8,4", "max_epochs": 3, "lda.iterations": 10})
        a = run_repeated(cfg, recs[:30], recs[30:], 2, 0)
        b = run_repeated(cfg, recs[:30], recs[30:], 2, 0)
        assert a.to_json() == b.to_json() and a.seeds == [0, 1]


def test_export_embeddings(tmp_path):
    model = init_model(20, (6, 4), 2)
    rng = np.random.default_rng(0)
    g = random_hypergraph(rng, vocab_size=20, doc_id=7)
    z = export_embeddings(model, [g, g], [1, 1], tmp_path / "z.tsv")
    assert z.shape == (2, 4) and np.array_equal(z[0], z[1])
    assert np.array_equal(z, document_embeddings(model, [g, g]))
    rows = (tmp_path / "z.tsv").read_text().splitlines()
    assert rows[0].split("\t")[:2] == ["7", "1"] and len(rows[0].split("\t")) == 6


def test_default_embedding_width():
    assert init_model(10, Config()["layer_dims"], 2).dims[-1] == 100


def test_ablation_configs():
    base = Config()
    assert ablation_config(base, "w/o attention")["variant"] == "no_attention"
    assert ablation_config(base, "w/o sequential")["hypergraph.sequential"] is False
    assert ablation_config(base, "w/o semantic")["hypergraph.semantic"] is False
    assert tuple(ablation_config(base, "HyperGAT (1 layer)")["layer_dims"]) == (300,)
    assert ablation_config(base, "HyperGAT").as_dict() == base.as_dict()
