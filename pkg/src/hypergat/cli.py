"""Command-line entry point: ``hypergat <command> ...``.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import numeric as nk
from .config import Config, describe_settings
from .corpus import (Document, LabelSet, Vocabulary, index_document, is_degenerate, load_dataset,
                     load_documents, make_documents, save_documents, tokenize)
from .errors import ConfigError, DataError, HyperGATError, PrerequisiteError
from .evaluation import accuracy, export_embeddings
from .hypergraph import build_hypergraph, memory_elements
from .lda import TopicLists
from .model import extract_attention, load_checkpoint, predict_logits, save_checkpoint, vocab_hash
from .pipeline import (ABLATIONS, PreparedCorpus, ablation_config, fit_topics, graphs_for, mean_graph_size,
                       predict_graphs, prepare_corpus, run_repeated)
from .stats import welch_t_test
from .trainer import train

log = logging.getLogger("hypergat")

SPEC_VERSION = "1"

# dataset statistics: vocabulary size, documents, average length, classes
TABLE1 = {
    "20NG": (42757, 18846, 221.26, 20),
    "R8": (7688, 7674, 65.72, 8),
    "R52": (8892, 9100, 69.82, 52),
    "Ohsumed": (14157, 7400, 135.82, 23),
    "MR": (18764, 10662, 20.39, 2),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# workdir helpers


def _write_json(path: Path, payload: dict, cfg: Config | None) -> None:
    body = {"spec_version": SPEC_VERSION}
    if cfg is not None:
        body["config"] = cfg.as_dict()
    body.update(payload)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(path: Path, remedy: str) -> Path:
    if not path.exists():
        raise PrerequisiteError(f"missing {path}; run `{remedy}` first")
    return path


def _load_config(workdir: Path, override: str | None) -> Config:
    if override:
        return Config.load(override)
    return Config.load(_require(workdir / "config.txt", "hypergat prepare"))


def _load_vocab(workdir: Path) -> Vocabulary:
    return Vocabulary.read(_require(workdir / "vocab.txt", "hypergat prepare"))


def _load_topics(workdir: Path, cfg: Config, vocab: Vocabulary):
    if not cfg["hypergraph.semantic"]:
        return None
    topics = TopicLists.load(_require(workdir / "topics.json", "hypergat lda"), vocab.index)
    if cfg["semantic.rank_within_doc"]:
        topics.phi = np.load(_require(workdir / "topics_phi.npy", "hypergat lda"))
    return topics


def _load_docs(workdir: Path):
    return load_documents(_require(workdir / "docs.bin", "hypergat prepare"))


def _prepare_meta(workdir: Path) -> dict:
    with open(_require(workdir / "prepare.json", "hypergat prepare"), encoding="utf-8") as fh:
        return json.load(fh)


def _build(docs, topics, cfg):
    return [build_hypergraph(d, topics, None, cfg["hypergraph.sequential"], cfg["semantic.rank_within_doc"])
            for d in docs]


def _load_model(workdir: Path, path: str | None):
    p = _require(Path(path) if path else workdir / "model.hgat", "hypergat train")
    model, header = load_checkpoint(p)
    prec = header.get("config", {}).get("precision", "float32")
    if prec != nk.precision_name():
        # parameters are cast on load, so reload under the training precision
        nk.set_precision(prec)
        model, header = load_checkpoint(p)
    return model, header


def _model_context(workdir: Path, header: dict):
    """Vocabulary, topics, labels and config frozen at training time."""
    cfg = Config(header["config"])
    vocab = _load_vocab(workdir)
    if vocab_hash(vocab.words) != header["vocab_hash"]:
        raise DataError("vocab.txt does not match the model's vocabulary")
    topics = _load_topics(workdir, cfg, vocab)
    return cfg, vocab, topics, LabelSet(tuple(header["labels"]))


def _test_documents(workdir: Path, labels: LabelSet, data: str | None):
    data_dir = Path(data) if data else Path(_prepare_meta(workdir)["data_dir"])
    records = load_dataset(data_dir / "test.tsv", "test")
    return make_documents(records, labels, "test", start_id=1_000_000_000)


# --------------------------------------------------------------------------
# commands


def cmd_prepare(args) -> int:
    data, out = Path(args.data), Path(args.out)
    cfg = Config.load(args.config) if args.config else Config()
    records = load_dataset(data / "train.tsv", "train")
    if not records:
        raise DataError(f"{data / 'train.tsv'} is empty")
    corpus = prepare_corpus(records, cfg)
    out.mkdir(parents=True, exist_ok=True)
    corpus.vocab.write(out / "vocab.txt")
    save_documents(out / "docs.bin", corpus.train + corpus.val, corpus.labels)
    (out / "config.txt").write_text(cfg.dumps(), encoding="utf-8")
    stats = {"n_train": len(corpus.train), "n_val": len(corpus.val), "vocab_size": len(corpus.vocab),
             "classes": list(corpus.labels.names)}
    _write_json(out / "prepare.json", {"data_dir": str(data.resolve()), "stats": stats}, cfg)
    print(f"prepared {stats['n_train']} train / {stats['n_val']} val documents, "
          f"{stats['vocab_size']} words, {len(corpus.labels)} classes -> {out}")
    if args.dump_hypergraph is not None:
        _dump_hypergraph(out, cfg, corpus.vocab, corpus.train + corpus.val, args.dump_hypergraph)
    return 0


def _dump_hypergraph(workdir, cfg, vocab, docs, doc_id) -> None:
    doc = next((d for d in docs if d.id == doc_id), None)
    if doc is None:
        raise DataError(f"no document with id {doc_id}")
    topics = None
    if cfg["hypergraph.semantic"] and (workdir / "topics.json").exists():
        topics = _load_topics(workdir, cfg, vocab)
    hg = build_hypergraph(doc, topics, None, cfg["hypergraph.sequential"], cfg["semantic.rank_within_doc"])
    print(json.dumps(hg.to_json(vocab.words), indent=2))


def cmd_lda(args) -> int:
    workdir = Path(args.workdir)
    cfg = _load_config(workdir, None)
    for key, val in (("lda.topics", args.topics), ("lda.topk", args.topk),
                     ("lda.iterations", args.iters), ("lda.seed", args.seed)):
        if val is not None:
            cfg.set(key, val)
    vocab = _load_vocab(workdir)
    docs, labels = _load_docs(workdir)
    train_docs = [d for d in docs if d.split == "train"]
    corpus = PreparedCorpus(labels, vocab, train_docs, [])
    cfg.set("hypergraph.semantic", True)
    topics = fit_topics(corpus, cfg)
    body = topics.to_json(vocab.words)
    _write_json(workdir / "topics.json", body, cfg)
    np.save(workdir / "topics_phi.npy", topics.phi)
    for t in body["topics"]:
        print(f"topic {t['id']}: {' '.join(t['top_words'])}")
    return 0


def cmd_train(args) -> int:
    workdir = Path(args.workdir)
    cfg = _load_config(workdir, args.config)
    nk.set_precision(cfg["precision"])
    vocab = _load_vocab(workdir)
    docs, labels = _load_docs(workdir)
    topics = _load_topics(workdir, cfg, vocab)
    train_docs = [d for d in docs if d.split == "train"]
    val_docs = [d for d in docs if d.split == "val" and not is_degenerate(d)]
    if not train_docs or not val_docs:
        raise DataError("docs.bin needs both train and val documents")
    tc = cfg.train_config()
    model, history = train(
        tc,
        (_build(train_docs, topics, cfg), [d.label_id for d in train_docs]),
        (_build(val_docs, topics, cfg), [d.label_id for d in val_docs]),
        len(vocab), len(labels),
    )
    out = Path(args.out) if args.out else workdir / "model.hgat"
    save_checkpoint(out, model, vocab_hash(vocab.words),
                    {"labels": list(labels.names), "config": cfg.as_dict()})
    _write_json(workdir / "history.json", history.to_json(), cfg)
    best = history.epochs[history.best_epoch - 1]
    print(f"best epoch {history.best_epoch}/{len(history.epochs)} ({history.stop_reason}): "
          f"val accuracy {best.val_acc:.4f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    workdir = Path(args.workdir)
    if args.runs:
        cfg = _load_config(workdir, args.config)
        data_dir = Path(args.data) if args.data else Path(_prepare_meta(workdir)["data_dir"])
        train_records = load_dataset(data_dir / "train.tsv", "train")
        test_records = load_dataset(data_dir / "test.tsv", "test")
        seed = cfg["eval.seed"] if args.seed is None else args.seed
        summary = run_repeated(cfg, train_records, test_records, args.runs, seed)
        print("run  seed  accuracy")
        for i, (s, a) in enumerate(zip(summary.seeds, summary.accuracies), 1):
            print(f"{i:>3}  {s:>4}  {a:.4f}")
        print(f"mean {summary}")
        _write_json(workdir / "eval.json", summary.to_json(), cfg)
        return 0
    model, header = _load_model(workdir, args.model)
    cfg, vocab, topics, labels = _model_context(workdir, header)
    nk.set_precision(cfg["precision"])
    test_docs = _test_documents(workdir, labels, args.data)
    graphs = graphs_for([index_document(d, vocab) for d in test_docs], topics, cfg)
    n_degenerate = sum(g is None for g in graphs)
    if n_degenerate:
        log.warning("%d test documents have no in-vocabulary tokens; predicting class 0", n_degenerate)
    preds = predict_graphs(model, graphs)
    acc = accuracy(preds, [d.label_id for d in test_docs])
    print("run  seed  accuracy")
    print(f"  1  {model.seed:>4}  {acc:.4f}")
    _write_json(workdir / "eval.json", {
        "runs": [{"seed": model.seed, "accuracy": acc}], "n": 1, "mean": acc, "std": None,
        "n_test": len(test_docs), "predictions": [labels.names[p] for p in preds],
    }, cfg)
    return 0


def cmd_predict(args) -> int:
    workdir = Path(args.workdir)
    model, header = _load_model(workdir, args.model)
    cfg, vocab, topics, labels = _model_context(workdir, header)
    nk.set_precision(cfg["precision"])
    if args.input in (None, "-"):
        lines = sys.stdin.read().splitlines()
    else:
        with open(args.input, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    docs = [Document(i, 0, tokenize(t), "test") for i, t in enumerate(lines) if t.strip()]
    graphs = graphs_for([index_document(d, vocab) for d in docs], topics, cfg)
    for d, g in zip(docs, graphs):
        if g is None:
            log.warning("input line %d has no in-vocabulary tokens; predicting class 0", d.id + 1)
    for p in predict_graphs(model, graphs):
        print(labels.names[p])
    return 0


def cmd_attention(args) -> int:
    workdir = Path(args.workdir)
    model, header = _load_model(workdir, args.model)
    cfg, vocab, topics, labels = _model_context(workdir, header)
    nk.set_precision(cfg["precision"])
    if args.text is not None:
        doc = index_document(Document(-1, 0, tokenize(args.text), "test"), vocab)
    else:
        docs, _ = _load_docs(workdir)
        doc = next((d for d in docs if d.id == args.doc_id), None)
        if doc is None:
            raise DataError(f"no document with id {args.doc_id} in docs.bin")
    if is_degenerate(doc):
        raise DataError("document has no in-vocabulary tokens")
    hg = build_hypergraph(doc, topics, None, cfg["hypergraph.sequential"], cfg["semantic.rank_within_doc"])
    records = [r.to_json(vocab.words) for r in extract_attention(model, hg)]
    if args.word:
        word = args.word.lower()
        for r in records:
            r["nodes"] = [n for n in r["nodes"] if n["node"] == word]
        if not records[0]["nodes"]:
            raise DataError(f"word {args.word!r} is not a node of this document")
    logits = predict_logits(model, [hg])[0]
    _write_json(workdir / "attention.json", {
        "prediction": labels.names[int(np.argmax(logits))], "layers": records}, cfg)
    print(json.dumps(records[-1], indent=2))
    return 0


def cmd_ablate(args) -> int:
    workdir = Path(args.workdir)
    base = _load_config(workdir, args.config)
    data_dir = Path(args.data) if args.data else Path(_prepare_meta(workdir)["data_dir"])
    train_records = load_dataset(data_dir / "train.tsv", "train")
    test_records = load_dataset(data_dir / "test.tsv", "test")
    runs = args.runs or base["eval.runs"]
    seed = base["eval.seed"] if args.seed is None else args.seed
    names = args.variants or list(ABLATIONS)
    if "HyperGAT" not in names:
        names.append("HyperGAT")
    summaries = {}
    for name in names:
        if name not in ABLATIONS:
            raise ConfigError(f"unknown ablation {name!r}; choose from {list(ABLATIONS)}")
        log.info("ablation %s", name)
        summaries[name] = run_repeated(ablation_config(base, name), train_records, test_records, runs, seed)
    full = summaries["HyperGAT"]
    rows = {}
    print(f"{'Model':<20} {'accuracy':>18}  {'p vs HyperGAT':>13}")
    for name in names:
        s = summaries[name]
        p = None
        if name != "HyperGAT" and s.n >= 2:
            p = welch_t_test(full.accuracies, s.accuracies)[1]
        rows[name] = {**s.to_json(), "p_value_vs_full": p}
        ptxt = "" if p is None else f"{p:.4f}"
        print(f"{name:<20} {str(s):>18}  {ptxt:>13}")
    _write_json(workdir / "ablation.json", {"variants": rows}, base)
    return 0


def cmd_memest(args) -> int:
    rows = {}
    if args.workdir:
        workdir = Path(args.workdir)
        cfg = _load_config(workdir, None)
        vocab = _load_vocab(workdir)
        docs, _ = _load_docs(workdir)
        topics = _load_topics(workdir, cfg, vocab) if (workdir / "topics.json").exists() else None
        graphs = graphs_for(docs, topics, cfg)
        n, m = mean_graph_size(graphs)
        meta = _prepare_meta(workdir)
        n_docs = args.docs or meta["stats"]["n_train"] + meta["stats"]["n_val"]
        rows["workdir"] = _mem_row(n, m, args.bsz, args.vocab or len(vocab), n_docs)
    elif args.n and args.m and args.vocab and args.docs:
        rows["custom"] = _mem_row(args.n, args.m, args.bsz, args.vocab, args.docs)
    else:
        names = TABLE1 if args.dataset in (None, "all") else [args.dataset]
        for name in names:
            if name not in TABLE1:
                raise ConfigError(f"unknown dataset {name!r}; known: {', '.join(TABLE1)}")
            n_vocab, n_docs, avg_len, n_cls = TABLE1[name]
            n, m = bound_graph_size(avg_len, n_cls)
            rows[name] = _mem_row(args.n or n, args.m or m, args.bsz, n_vocab, n_docs)
    print(f"{'':<10} {'n':>7} {'m':>7} {'per batch':>12} {'corpus graph':>15} {'ratio':>10}")
    for name, r in rows.items():
        print(f"{name:<10} {r['n']:>7} {r['m']:>7} {r['hypergat_elements']:>12,} "
              f"{r['corpus_graph_elements']:>15,} {r['ratio']:>10.1f}")
    if args.workdir:
        _write_json(Path(args.workdir) / "memest.json", {"rows": rows}, None)
    return 0


def bound_graph_size(avg_len: float, n_classes: int) -> tuple[int, int]:
    """Upper estimates of nodes and hyperedges for a document of average length.

    Distinct words cannot exceed tokens; sentence edges need two words each,
    and there is at most one semantic edge per topic (topics = classes).
    """
    n = int(np.ceil(avg_len))
    return n, n // 2 + n_classes


def _mem_row(n, m, bsz, n_vocab, n_docs) -> dict:
    ni, mi = int(np.ceil(n)), int(np.ceil(m))
    per_batch, corpus = memory_elements(ni, mi, bsz, n_vocab, n_docs)
    return {"n": ni, "m": mi, "bsz": bsz, "vocab_size": n_vocab, "n_docs": n_docs,
            "hypergat_elements": per_batch, "corpus_graph_elements": corpus, "ratio": corpus / per_batch}


def cmd_export(args) -> int:
    workdir = Path(args.workdir)
    model, header = _load_model(workdir, args.model)
    cfg, vocab, topics, labels = _model_context(workdir, header)
    nk.set_precision(cfg["precision"])
    if args.split == "test":
        docs = [index_document(d, vocab) for d in _test_documents(workdir, labels, args.data)]
    else:
        docs = [d for d in _load_docs(workdir)[0] if d.split == args.split]
    docs = [d for d in docs if not is_degenerate(d)]
    graphs = _build(docs, topics, cfg)
    out = Path(args.out) if args.out else workdir / f"embeddings_{args.split}.tsv"
    z = export_embeddings(model, graphs, [d.label_id for d in docs], out)
    print(f"wrote {z.shape[0]} x {z.shape[1]} embeddings -> {out}")
    return 0


def cmd_synth(args) -> int:
    from .synthetic import keyword_corpus, needle_corpus, write_tsv

    out = Path(args.out)
    total = args.n_train + args.n_test
    if args.kind == "needle":
        records = needle_corpus(total, seed=args.seed)
    else:
        records = keyword_corpus(total, seed=args.seed)
    write_tsv(out / "train.tsv", records[:args.n_train])
    write_tsv(out / "test.tsv", records[args.n_train:])
    print(f"wrote {args.n_train} train / {args.n_test} test documents -> {out}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypergat", description="Inductive text classification with hypergraph attention networks.",
                epilog=describe_settings(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prepare", help="tokenise train.tsv, build vocabulary and train/val document store",
                       epilog=describe_settings(), formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--data", required=True, help="directory holding train.tsv (and test.tsv)")
    s.add_argument("--out", required=True, help="experiment workdir")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--dump-hypergraph", type=int, metavar="DOC_ID", help="print one document's hypergraph as JSON")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("lda", help="fit topics on the training split and write topics.json")
    s.add_argument("--workdir", required=True)
    s.add_argument("--topics", type=int, help="topic count (default: number of classes)")
    s.add_argument("--topk", type=int, help="top words per topic (default 10)")
    s.add_argument("--iters", type=int, help="Gibbs sweeps (default 200)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_lda)

    s = sub.add_parser("train", help="train a model on the prepared train/val split",
                       epilog=describe_settings(), formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--workdir", required=True)
    s.add_argument("--config", help="config file (default: the workdir's config.txt)")
    s.add_argument("--out", help="checkpoint path (default: <workdir>/model.hgat)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="test accuracy of a model, or of N fresh runs with --runs")
    s.add_argument("--workdir", required=True)
    s.add_argument("--model")
    s.add_argument("--data", help="dataset directory (default: the one given to prepare)")
    s.add_argument("--config")
    s.add_argument("--runs", type=int, help="retrain from scratch N times with seeds S..S+N-1")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("predict", help="classify raw texts, one per line")
    s.add_argument("--workdir", required=True)
    s.add_argument("--model")
    s.add_argument("--input", help="text file, or - for stdin (default)")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("attention", help="node- and edge-level attention for one document")
    s.add_argument("--workdir", required=True)
    s.add_argument("--model")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--doc-id", type=int)
    g.add_argument("--text")
    s.add_argument("--word", help="keep only this word's node")
    s.set_defaults(func=cmd_attention)

    s = sub.add_parser("ablate", help="compare HyperGAT with its ablated variants")
    s.add_argument("--workdir", required=True)
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--variants", nargs="+", help=f"subset of: {', '.join(ABLATIONS)}")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("memest", help="incidence-matrix vs corpus-graph element counts")
    s.add_argument("--workdir", help="measure mean n, m on a prepared workdir")
    s.add_argument("--dataset", help=f"one of {', '.join(TABLE1)} or all (default)")
    s.add_argument("--n", type=float, help="nodes per document")
    s.add_argument("--m", type=float, help="hyperedges per document")
    s.add_argument("--bsz", type=int, default=8)
    s.add_argument("--vocab", type=int, help="vocabulary size N")
    s.add_argument("--docs", type=int, help="document count M")
    s.set_defaults(func=cmd_memest)

    s = sub.add_parser("export-embeddings", help="write mean-pooled document vectors as TSV")
    s.add_argument("--workdir", required=True)
    s.add_argument("--model")
    s.add_argument("--split", choices=("train", "val", "test"), default="test")
    s.add_argument("--data")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("synth", help="write a synthetic train.tsv / test.tsv pair")
    s.add_argument("--kind", choices=("needle", "keyword"), default="needle")
    s.add_argument("--out", required=True)
    s.add_argument("--n-train", type=int, default=500)
    s.add_argument("--n-test", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HyperGATError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    finally:
        nk.set_precision("float32")


if __name__ == "__main__":
    sys.exit(main())
