"""Flat ``key = value`` configuration shared by every command."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .trainer import TrainConfig


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _auto(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(s: str):
        return "auto" if s.strip() == "auto" else conv(s)
    return parse


def _dims(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class Setting:
    default: Any
    parse: Callable[[str], Any]
    help: str


SETTINGS: dict[str, Setting] = {
    "data.min_freq": Setting("auto", _auto(int),
        "minimum training frequency for a vocabulary word; auto = 5 above 5,000 training docs, else 1"),
    "data.val_ratio": Setting(0.9, float,
        "fraction of training documents kept for fitting; the rest validates (reference: 0.9)"),
    "data.split_seed": Setting(0, int, "seed of the train/validation split used by `prepare`"),
    "lda.topics": Setting("auto", _auto(int), "LDA topic count; auto = number of classes (reference setting)"),
    "lda.topk": Setting(10, int, "top words per topic forming semantic hyperedges (reference: top-10)"),
    "lda.alpha": Setting("auto", _auto(float), "document-topic prior; auto = 50 / topics"),
    "lda.beta": Setting(0.01, float, "topic-word prior"),
    "lda.iterations": Setting(200, int, "collapsed Gibbs sweeps"),
    "lda.seed": Setting(0, int, "seed of the Gibbs sampler"),
    "hypergraph.sequential": Setting(True, _bool, "build one hyperedge per sentence"),
    "hypergraph.semantic": Setting(True, _bool, "build one hyperedge per LDA topic"),
    "semantic.rank_within_doc": Setting(False, _bool,
        "rank topic words among the document's own words instead of intersecting the global top-K list"),
    "lr": Setting(0.001, float, "Adam learning rate (reference: 0.001; 0.0005 for MR)"),
    "batch_size": Setting(8, int, "documents per mini-batch (reference: 8)"),
    "l2_lambda": Setting(1e-6, float, "L2 penalty on weights and context vectors (reference: 1e-6)"),
    "dropout_p": Setting(0.3, float, "dropout on node features entering each layer (reference: 0.3)"),
    "max_epochs": Setting(100, int, "epoch limit (reference: 100)"),
    "patience": Setting(5, int, "stop after this many epochs without a validation gain (reference: 5)"),
    "seed": Setting(0, int, "seed for initialisation, shuffling and dropout"),
    "variant": Setting("full", str, "full = dual attention; no_attention = uniform averaging"),
    "layer_dims": Setting((300, 100), _dims, "hidden sizes per layer, comma separated (reference: 300,100)"),
    "precision": Setting("float32", str, "float32 or float64"),
    "eval.runs": Setting(1, int, "independent runs for `eval --runs` and `ablate` (reference: 10)"),
    "eval.seed": Setting(0, int, "first seed of repeated runs"),
}


class Config:
    def __init__(self, values: dict[str, Any] | None = None):
        self._values = {k: s.default for k, s in SETTINGS.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value: Any) -> None:
        if key not in SETTINGS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = SETTINGS[key].parse(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        self._values[key] = value

    def __getitem__(self, key: str):
        return self._values[key]

    def as_dict(self) -> dict[str, Any]:
        out = {}
        for k, v in self._values.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def train_config(self, **overrides) -> TrainConfig:
        tc = TrainConfig(
            lr=self["lr"], batch_size=self["batch_size"], l2_lambda=self["l2_lambda"],
            dropout_p=self["dropout_p"], max_epochs=self["max_epochs"], patience=self["patience"],
            seed=self["seed"], variant=self["variant"], layer_dims=tuple(self["layer_dims"]),
        )
        for k, v in overrides.items():
            setattr(tc, k, v)
        tc.validate()
        return tc

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "Config":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"{source}:{lineno}: expected key = value")
            try:
                cfg.set(key.strip(), value.strip())
            except ConfigError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.parse(path.read_text(encoding="utf-8"), str(path))

    def dumps(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            if isinstance(v, list):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def describe_settings() -> str:
    width = max(map(len, SETTINGS))
    rows = []
    for k, s in SETTINGS.items():
        d = ",".join(map(str, s.default)) if isinstance(s.default, tuple) else s.default
        rows.append(f"  {k:<{width}}  [{d}] {s.help}")
    return "config keys:\n" + "\n".join(rows)
