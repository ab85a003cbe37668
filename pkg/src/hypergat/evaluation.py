"""Accuracy, repeated-run summaries and document embedding export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import HyperGATError
from .hypergraph import TextHypergraph
from .model import HyperGATModel, document_embeddings
from .stats import welch_t_test

__all__ = ["accuracy", "RunSummary", "repeated_runs", "export_embeddings", "welch_t_test"]


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(labels)} labels")
    if not len(preds):
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.mean(np.asarray(preds) == np.asarray(labels)))


@dataclass
class RunSummary:
    accuracies: list[float]
    seeds: list[int]
    extra: list[dict] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.accuracies)

    @property
    def mean(self) -> float:
        return math.fsum(self.accuracies) / self.n

    @property
    def std(self) -> float | None:
        if self.n < 2:
            return None
        m = self.mean
        return math.sqrt(math.fsum((a - m) ** 2 for a in self.accuracies) / (self.n - 1))

    def to_json(self) -> dict:
        return {"runs": [{"seed": s, "accuracy": a} for s, a in zip(self.seeds, self.accuracies)],
                "n": self.n, "mean": self.mean, "std": self.std}

    def __str__(self) -> str:
        std = "n/a" if self.std is None else f"{self.std:.4f}"
        return f"{self.mean:.4f} ± {std} (n={self.n})"


class RunFailed(HyperGATError):
    pass


def repeated_runs(run: Callable[[int], float | tuple[float, dict]], n: int, base_seed: int = 0) -> RunSummary:
    """Call ``run(seed)`` for seeds ``base_seed .. base_seed + n - 1``.

    ``run`` returns the test accuracy, optionally paired with a dict of
    extra per-run information.
    """
    if n < 1:
        raise ValueError("need at least one run")
    summary = RunSummary([], [])
    for seed in range(base_seed, base_seed + n):
        try:
            out = run(seed)
        except HyperGATError as exc:
            err = RunFailed(f"run with seed {seed} failed: {exc}")
            err.exit_code = exc.exit_code
            raise err from exc
        acc, extra = out if isinstance(out, tuple) else (out, {})
        summary.accuracies.append(float(acc))
        summary.seeds.append(seed)
        summary.extra.append(extra)
    return summary


def export_embeddings(model: HyperGATModel, graphs: Sequence[TextHypergraph], labels: Sequence[int],
                      path=None) -> np.ndarray:
    """Mean-pooled final-layer document vectors; optionally written as TSV
    ``doc_id<TAB>label<TAB>v1<TAB>...``."""
    z = document_embeddings(model, graphs)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            for g, y, row in zip(graphs, labels, z):
                fh.write("\t".join([str(g.doc_id), str(y)] + [repr(float(v)) for v in row]) + "\n")
    return z
