"""Corpus loading, tokenisation, vocabulary and train/validation splits."""

from __future__ import annotations

import json
import struct
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, DataError
from .rng import STREAM_SPLIT, make_rng

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")
_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


@dataclass(frozen=True)
class RawRecord:
    label: str
    text: str
    line: int = 0


@dataclass
class Document:
    id: int
    label_id: int
    sentences: list[list]
    split: str = "train"

    def tokens(self) -> list:
        return [tok for sent in self.sentences for tok in sent]


@dataclass
class Vocabulary:
    words: list[str]
    counts: dict[str, int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word) -> bool:
        return word in self.index

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, dropping out-of-vocabulary words."""
        idx = self.index
        return [idx[t] for t in tokens if t in idx]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w in self.words:
                fh.write(f"{w}\t{self.counts[w]}\n")

    @classmethod
    def read(cls, path) -> "Vocabulary":
        words, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                w, c = line.rstrip("\n").split("\t")
                words.append(w)
                counts[w] = int(c)
        return cls(words, counts)


@dataclass(frozen=True)
class LabelSet:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise DataError(f"need at least 2 classes, found {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise DataError("class names must be unique")

    @classmethod
    def from_records(cls, records: Iterable[RawRecord]) -> "LabelSet":
        return cls(tuple(sorted({r.label for r in records})))

    def __len__(self) -> int:
        return len(self.names)

    def id(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown label {name!r}") from None


def load_dataset(path, split: str = "train") -> list[RawRecord]:
    """Read a ``label<TAB>text`` file. Blank lines are skipped."""
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            label, tab, text = line.partition("\t")
            if not tab:
                raise DataError(f"{path}:{lineno}: expected label<TAB>text")
            label = label.strip()
            if not label:
                raise DataError(f"{path}:{lineno}: empty label")
            if not text.strip():
                raise DataError(f"{path}:{lineno}: empty text")
            records.append(RawRecord(label, text, lineno))
    return records


def tokenize(text: str) -> list[list[str]]:
    """Split into sentences on ``.!?`` + whitespace/end, then into lowercase word tokens.

    >>> tokenize("The team won. Great game!")
    [['the', 'team', 'won'], ['great', 'game']]
    """
    sentences = []
    for chunk in _SENTENCE_END.split(text):
        toks = [t.lower() for t in _TOKEN.findall(chunk)]
        if toks:
            sentences.append(toks)
    return sentences


def make_documents(records: list[RawRecord], labels: LabelSet, split: str, start_id: int = 0) -> list[Document]:
    return [
        Document(start_id + i, labels.id(r.label), tokenize(r.text), split)
        for i, r in enumerate(records)
    ]


def build_vocabulary(train_docs: list[Document], min_freq: int = 1) -> Vocabulary:
    if min_freq < 1:
        raise ConfigError("min_freq must be >= 1")
    counts: Counter = Counter()
    for doc in train_docs:
        if doc.split != "train":
            raise DataError(f"document {doc.id} is from split {doc.split!r}; vocabulary is train-only")
        counts.update(doc.tokens())
    kept = [w for w, c in counts.items() if c >= min_freq]
    if not kept:
        raise ConfigError(f"vocabulary is empty at min_freq={min_freq}")
    kept.sort(key=lambda w: (-counts[w], w))
    return Vocabulary(kept, {w: counts[w] for w in kept})


def default_min_freq(n_train_docs: int) -> int:
    return 5 if n_train_docs > 5000 else 1


def split_train_val(docs: list, ratio: float = 0.9, seed: int = 0):
    """Seeded random partition into ``round(ratio * N)`` train and the rest val."""
    if not 0 < ratio < 1:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    n_train = int(round(ratio * len(docs)))
    if n_train == 0 or n_train == len(docs):
        raise DataError(f"split of {len(docs)} documents at ratio {ratio} leaves a partition empty")
    order = make_rng(seed, STREAM_SPLIT).permutation(len(docs))
    train = [docs[i] for i in sorted(order[:n_train])]
    val = [docs[i] for i in sorted(order[n_train:])]
    val = [replace(d, split="val") if isinstance(d, Document) else d for d in val]
    return train, val


def index_document(doc: Document, vocab: Vocabulary) -> Document:
    """Replace token strings by vocabulary indices; OOV tokens and emptied sentences are dropped."""
    sents = [s for s in (vocab.encode(sent) for sent in doc.sentences) if s]
    return Document(doc.id, doc.label_id, sents, doc.split)


def is_degenerate(doc: Document) -> bool:
    return not any(doc.sentences)


# --------------------------------------------------------------------------
# binary document store: magic, u32 header length, JSON header, raw LE arrays

DOCS_MAGIC = b"HGDOC1"
_SPLIT_CODE = {s: i for i, s in enumerate(SPLITS)}
_ARRAYS = (("ids", "<i8"), ("labels", "<i4"), ("splits", "<i1"), ("n_sents", "<i4"),
           ("sent_lens", "<i4"), ("tokens", "<i4"))


def save_documents(path, docs: list[Document], labels: LabelSet) -> None:
    n_sents, sent_lens, tokens = [], [], []
    for d in docs:
        n_sents.append(len(d.sentences))
        for s in d.sentences:
            sent_lens.append(len(s))
            tokens.extend(s)
    values = dict(ids=[d.id for d in docs], labels=[d.label_id for d in docs],
                  splits=[_SPLIT_CODE[d.split] for d in docs], n_sents=n_sents,
                  sent_lens=sent_lens, tokens=tokens)
    arrays = [np.asarray(values[name], dtype=dt) for name, dt in _ARRAYS]
    header = json.dumps({"label_names": list(labels.names),
                         "lengths": [int(a.size) for a in arrays]}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(DOCS_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for a in arrays:
            fh.write(a.tobytes())


def load_documents(path) -> tuple[list[Document], LabelSet]:
    data = Path(path).read_bytes()
    if not data.startswith(DOCS_MAGIC):
        raise DataError(f"{path}: not a document store")
    off = len(DOCS_MAGIC)
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + n])
    off += n
    arrays = {}
    for (name, dt), length in zip(_ARRAYS, header["lengths"]):
        arrays[name] = np.frombuffer(data, dtype=dt, count=length, offset=off)
        off += np.dtype(dt).itemsize * length
    tokens, sent_lens = arrays["tokens"].tolist(), arrays["sent_lens"].tolist()
    docs = []
    s = t = 0
    for i in range(len(arrays["ids"])):
        sents = []
        for _ in range(int(arrays["n_sents"][i])):
            sents.append(tokens[t:t + sent_lens[s]])
            t += sent_lens[s]
            s += 1
        docs.append(Document(int(arrays["ids"][i]), int(arrays["labels"][i]), sents,
                             SPLITS[int(arrays["splits"][i])]))
    return docs, LabelSet(tuple(header["label_names"]))
