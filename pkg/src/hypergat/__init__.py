"""Inductive text classification with hypergraph attention networks."""

from .config import Config
from .corpus import LabelSet, Vocabulary, load_dataset, tokenize
from .hypergraph import TextHypergraph, build_hypergraph
from .lda import fit_lda
from .model import HyperGATModel, forward, init_model
from .trainer import TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "Config", "LabelSet", "Vocabulary", "load_dataset", "tokenize", "TextHypergraph", "build_hypergraph",
    "fit_lda", "HyperGATModel", "forward", "init_model", "TrainConfig", "predict", "train",
]
