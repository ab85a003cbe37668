import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergat.corpus import (Document, LabelSet, RawRecord, Vocabulary, build_vocabulary, default_min_freq,
                             index_document, is_degenerate, load_dataset, load_documents, make_documents,
                             save_documents, split_train_val, tokenize)
from hypergat.errors import ConfigError, DataError


def _docs(*texts, split="train"):
    return [Document(i, 0, tokenize(t), split) for i, t in enumerate(texts)]


class TestLoadDataset:
    def test_single_line(self, tmp_path):
        p = tmp_path / "train.tsv"
        p.write_text("pos\tgreat movie .\n", encoding="utf-8")
        recs = load_dataset(p)
        assert [(r.label, r.text) for r in recs] == [("pos", "great movie .")]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "train.tsv"
        p.write_text("", encoding="utf-8")
        assert load_dataset(p) == []

    def test_missing_tab_names_line(self, tmp_path):
        p = tmp_path / "train.tsv"
        p.write_text("onlytext\n", encoding="utf-8")
        with pytest.raises(DataError, match=r"train.tsv:1:"):
            load_dataset(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.tsv")


class TestTokenize:
    def test_sentences(self):
        assert tokenize("The team won. Great game!") == [["the", "team", "won"], ["great", "game"]]

    def test_apostrophe(self):
        assert tokenize("don't stop") == [["don't", "stop"]]

    def test_only_punctuation(self):
        assert tokenize("...") == []

    def test_decimal_point_does_not_split(self):
        assert tokenize("pi is 3.14 roughly") == [["pi", "is", "3", "14", "roughly"]]

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_idempotent_on_own_output(self, text):
        for sent in tokenize(text):
            assert tokenize(" ".join(sent)) == [sent]


class TestVocabulary:
    def test_counts_and_tiebreak(self):
        v = build_vocabulary(_docs("a a b", "a c"), 1)
        assert v.words == ["a", "b", "c"]
        assert v.counts == {"a": 3, "b": 1, "c": 1}

    def test_min_freq(self):
        assert build_vocabulary(_docs("a a b", "a c"), 2).words == ["a"]

    def test_empty_is_fatal(self):
        with pytest.raises(ConfigError):
            build_vocabulary(_docs("a a b", "a c"), 4)

    def test_rejects_non_train(self):
        with pytest.raises(DataError):
            build_vocabulary(_docs("a b", split="test"), 1)

    def test_round_trip(self, tmp_path):
        v = build_vocabulary(_docs("x y y z"), 1)
        v.write(tmp_path / "vocab.txt")
        assert (tmp_path / "vocab.txt").read_text().splitlines()[0] == "y\t2"
        assert Vocabulary.read(tmp_path / "vocab.txt") == v

    def test_independent_of_test_documents(self):
        labels = LabelSet(("a", "b"))
        train = make_documents([RawRecord("a", "x y z ."), RawRecord("b", "y w .")], labels, "train")
        before = build_vocabulary(train, 1)
        # test documents never enter vocabulary construction
        make_documents([RawRecord("a", "novel words here")], labels, "test")
        assert build_vocabulary(train, 1) == before

    def test_default_min_freq(self):
        assert default_min_freq(5001) == 5
        assert default_min_freq(5000) == 1


class TestSplit:
    def test_ninety_ten_reproducible(self):
        docs = _docs(*[f"w{i}" for i in range(10)])
        tr, va = split_train_val(docs, 0.9, 7)
        assert (len(tr), len(va)) == (9, 1)
        tr2, va2 = split_train_val(docs, 0.9, 7)
        assert [d.id for d in tr] == [d.id for d in tr2] and [d.id for d in va] == [d.id for d in va2]
        assert va[0].split == "val" and docs[va[0].id].split == "train"

    def test_half(self):
        tr, va = split_train_val(_docs("a", "b"), 0.5, 0)
        assert len(tr) == len(va) == 1

    def test_single_doc_fatal(self):
        with pytest.raises(DataError):
            split_train_val(_docs("a"), 0.9, 0)

    @given(st.integers(2, 60), st.integers(0, 2**32), st.integers(0, 2**32))
    @settings(max_examples=50)
    def test_union_is_full_set(self, n, s1, s2):
        docs = _docs(*[f"w{i}" for i in range(n)])
        for seed in (s1, s2):
            tr, va = split_train_val(docs, 0.5, seed)
            ids = sorted(d.id for d in tr + va)
            assert ids == list(range(n))


class TestIndexing:
    def test_oov_and_degenerate(self):
        v = Vocabulary(["a", "b"], {"a": 1, "b": 1})
        d = index_document(Document(0, 0, [["a", "zz"], ["qq"], ["b"]]), v)
        assert d.sentences == [[0], [1]]
        assert is_degenerate(index_document(Document(1, 0, [["zz"]]), v))


def test_document_store_round_trip(tmp_path):
    labels = LabelSet(("neg", "pos"))
    docs = [Document(3, 1, [[0, 1], [2]], "train"), Document(9, 0, [], "val"), Document(11, 0, [[4]], "val")]
    save_documents(tmp_path / "docs.bin", docs, labels)
    first = (tmp_path / "docs.bin").read_bytes()
    back, lab = load_documents(tmp_path / "docs.bin")
    assert back == docs and lab == labels
    save_documents(tmp_path / "docs.bin", back, lab)
    assert (tmp_path / "docs.bin").read_bytes() == first


def test_labelset_needs_two_classes():
    with pytest.raises(DataError):
        LabelSet.from_records([RawRecord("x", "a"), RawRecord("x", "b")])
