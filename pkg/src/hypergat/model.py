"""HyperGAT: dual-attention hypergraph network with hand-derived gradients.

One layer maps node features ``H`` (n x d_prev) to ``H'`` (n x d):

    X      = H W1^T                                   node transform
    s_k    = a1 . LeakyReLU(X_k)
    alpha  = softmax of s over the members of each hyperedge
    F_j    = ReLU(sum_k alpha_jk X_k)                 hyperedge features
    Y_j    = F_j W2^T
    v_ij   = LeakyReLU([Y_j || X_i])
    beta   = softmax of a2 . v_ij over the hyperedges of each node
    H'_i   = ReLU(sum_j beta_ij Y_j)

Documents are mean-pooled and classified by ``softmax(Wc z + bc)``.

A batch of documents is handled as the disjoint union of their
hypergraphs. Incidences are kept twice, grouped by edge ("em" order, for
node-to-edge aggregation) and grouped by node ("nm" order, for
edge-to-node aggregation), so every aggregation is a contiguous segment
reduction.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numeric as nk
from .errors import DataError, NumericalError
from .hypergraph import TextHypergraph
from .rng import STREAM_INIT, make_rng

VARIANTS = ("full", "no_attention")


@dataclass
class LayerParams:
    W1: np.ndarray  # (d, d_prev)
    W2: np.ndarray  # (d, d)
    a1: np.ndarray  # (d,)
    a2: np.ndarray  # (2d,)

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [("W1", self.W1), ("W2", self.W2), ("a1", self.a1), ("a2", self.a2)]


@dataclass
class HyperGATModel:
    layers: list[LayerParams]
    Wc: np.ndarray  # (C, d_L)
    bc: np.ndarray  # (C,)
    variant: str = "full"
    dropout_p: float = 0.3
    seed: int = 0

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].W1.shape[1]] + [lp.W1.shape[0] for lp in self.layers]

    @property
    def n_classes(self) -> int:
        return self.Wc.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.layers[0].W1.shape[1]

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, lp in enumerate(self.layers):
            out.extend((f"layers.{i}.{n}", a) for n, a in lp.arrays())
        out.append(("Wc", self.Wc))
        out.append(("bc", self.bc))
        return out

    def copy(self) -> "HyperGATModel":
        return HyperGATModel(
            [LayerParams(*(a.copy() for _, a in lp.arrays())) for lp in self.layers],
            self.Wc.copy(),
            self.bc.copy(),
            self.variant,
            self.dropout_p,
            self.seed,
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for _, a in self.named_parameters():
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def init_model(vocab_size: int, dims: Sequence[int], n_classes: int, seed: int = 0,
               variant: str = "full", dropout_p: float = 0.3) -> HyperGATModel:
    """Glorot-uniform weights and context vectors, zero classifier bias.

    ``dims`` lists the hidden sizes per layer, e.g. ``[300, 100]``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if vocab_size < 1 or n_classes < 2 or not dims or min(dims) < 1:
        raise ValueError("invalid model dimensions")
    init = nk.Glorot(make_rng(seed, STREAM_INIT))
    layers = []
    prev = vocab_size
    for d in dims:
        layers.append(LayerParams(
            W1=init((d, prev), prev, d),
            W2=init((d, d), d, d),
            a1=init((d,), d, 1),
            a2=init((2 * d,), 2 * d, 1),
        ))
        prev = d
    wc = init((n_classes, prev), prev, n_classes)
    bc = np.zeros(n_classes, dtype=nk.get_dtype())
    return HyperGATModel(layers, wc, bc, variant, dropout_p, seed)


# --------------------------------------------------------------------------
# batched incidence structure


@dataclass
class GraphBatch:
    graphs: list[TextHypergraph]
    attr: np.ndarray          # (N,) vocabulary id per node
    graph_offsets: np.ndarray  # (B+1,) node ranges per graph
    edge_offsets: np.ndarray  # (E+1,) incidence ranges per edge, em order
    node_offsets: np.ndarray  # (N+1,) incidence ranges per node, nm order
    em_node: np.ndarray
    em_edge: np.ndarray
    nm_node: np.ndarray
    nm_edge: np.ndarray
    em_of_nm: np.ndarray      # nm position -> em position
    nm_of_em: np.ndarray      # em position -> nm position
    inv_sigma: np.ndarray     # (P,) em order, 1/|e_j|
    inv_degree: np.ndarray    # (P,) nm order, 1/|E_i|

    @property
    def n_nodes(self) -> int:
        return self.attr.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_offsets.shape[0] - 1

    @classmethod
    def from_graphs(cls, graphs: Sequence[TextHypergraph]) -> "GraphBatch":
        attr, em_node, em_edge, sizes = [], [], [], []
        graph_offsets = [0]
        nb = eb = 0
        for g in graphs:
            if g.n == 0 or g.m == 0:
                raise DataError(f"document {g.doc_id}: empty hypergraph")
            attr.extend(g.nodes)
            for j, e in enumerate(g.edges):
                if not e.members:
                    raise DataError(f"document {g.doc_id}: empty hyperedge")
                em_node.extend(nb + k for k in e.members)
                em_edge.extend([eb + j] * len(e.members))
                sizes.append(len(e.members))
            nb += g.n
            eb += g.m
            graph_offsets.append(nb)
        em_node = np.asarray(em_node, dtype=np.int64)
        em_edge = np.asarray(em_edge, dtype=np.int64)
        edge_offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        em_of_nm = np.lexsort((em_edge, em_node))
        nm_node = em_node[em_of_nm]
        nm_edge = em_edge[em_of_nm]
        degree = np.bincount(nm_node, minlength=nb)
        if np.any(degree == 0):
            raise DataError("hypergraph has a node without incident hyperedge")
        node_offsets = np.concatenate([[0], np.cumsum(degree)]).astype(np.int64)
        nm_of_em = np.empty_like(em_of_nm)
        nm_of_em[em_of_nm] = np.arange(em_of_nm.size)
        sigma = np.asarray(sizes, dtype=np.float64)
        return cls(
            list(graphs),
            np.asarray(attr, dtype=np.int64),
            np.asarray(graph_offsets, dtype=np.int64),
            edge_offsets,
            node_offsets,
            em_node, em_edge, nm_node, nm_edge,
            em_of_nm, nm_of_em,
            1.0 / sigma[em_edge],
            1.0 / degree[nm_node].astype(np.float64),
        )

    @property
    def em_seg(self) -> np.ndarray:
        return self.em_edge

    @property
    def nm_seg(self) -> np.ndarray:
        return self.nm_node


# --------------------------------------------------------------------------
# forward


@dataclass
class LayerCache:
    inp: np.ndarray | None     # dropped-out input features (None for layer 0)
    mask: np.ndarray | None    # dropout mask (per node for layer 0)
    X: np.ndarray
    U: np.ndarray
    alpha: np.ndarray          # em order
    Fpre: np.ndarray
    F: np.ndarray
    Y: np.ndarray
    LY: np.ndarray
    beta: np.ndarray           # nm order
    Hpre: np.ndarray
    H: np.ndarray


@dataclass
class ForwardCache:
    batch: GraphBatch
    layers: list[LayerCache] = field(default_factory=list)
    z: np.ndarray | None = None
    logits: np.ndarray | None = None

    def min_kink_distance(self) -> float:
        """Smallest non-zero |pre-activation| over every ReLU / LeakyReLU input.

        Exact zeros come from rows whose inputs are all zero (dead units), so
        no parameter perturbation can move them across the kink.
        """
        best = np.inf
        for c in self.layers:
            for a in (c.X, c.Fpre, c.Y, c.Hpre):
                nz = np.abs(a[a != 0])
                if nz.size:
                    best = min(best, float(nz.min()))
        return best


def node_level_attention(lp: LayerParams, batch: GraphBatch, X: np.ndarray, attention: bool = True):
    """Aggregate member nodes into hyperedges. Returns ``(F, Fpre, alpha, U)``."""
    U = nk.leaky_relu(X)
    if attention:
        s = U @ lp.a1
        alpha = nk.segment_softmax(s[batch.em_node], batch.edge_offsets, batch.em_seg)
    else:
        alpha = batch.inv_sigma.astype(X.dtype)
    Fpre = nk.segment_sum(X[batch.em_node] * alpha[:, None], batch.edge_offsets)
    return nk.relu(Fpre), Fpre, alpha, U


def edge_level_attention(lp: LayerParams, batch: GraphBatch, U: np.ndarray, F: np.ndarray, attention: bool = True):
    """Aggregate incident hyperedges into nodes. Returns ``(H, Hpre, beta, Y, LY)``.

    ``U`` is LeakyReLU of the node transform, i.e. the node half of the
    concatenated attention input.
    """
    Y = F @ lp.W2.T
    LY = nk.leaky_relu(Y)
    if attention:
        d = Y.shape[1]
        score = (LY @ lp.a2[:d])[batch.nm_edge] + (U @ lp.a2[d:])[batch.nm_node]
        beta = nk.segment_softmax(score, batch.node_offsets, batch.nm_seg)
    else:
        beta = batch.inv_degree.astype(Y.dtype)
    Hpre = nk.segment_sum(Y[batch.nm_edge] * beta[:, None], batch.node_offsets)
    return nk.relu(Hpre), Hpre, beta, Y, LY


def _graph_sizes(batch: GraphBatch, dtype) -> np.ndarray:
    return np.diff(batch.graph_offsets).astype(dtype)


def forward(model: HyperGATModel, batch: GraphBatch, train: bool = False,
            rng: np.random.Generator | None = None) -> ForwardCache:
    """Run all layers, readout and classifier. Eval mode draws no random numbers."""
    if batch.n_nodes and batch.attr.max() >= model.vocab_size:
        raise DataError(f"node id {batch.attr.max()} outside model vocabulary of {model.vocab_size}")
    attention = model.variant == "full"
    p = model.dropout_p if train else 0.0
    if p > 0 and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    cache = ForwardCache(batch)
    H = None
    for li, lp in enumerate(model.layers):
        if li == 0:
            # dropout on a one-hot row only touches its single non-zero entry
            X = nk.one_hot_linear(lp.W1, batch.attr)
            mask = None
            if p > 0:
                keep = rng.random(batch.n_nodes) >= p
                mask = keep.astype(X.dtype) / X.dtype.type(1 - p)
                X = X * mask[:, None]
            inp = None
        else:
            inp, mask = nk.dropout(H, p, p > 0, rng)
            X = inp @ lp.W1.T
        F, Fpre, alpha, U = node_level_attention(lp, batch, X, attention)
        H, Hpre, beta, Y, LY = edge_level_attention(lp, batch, U, F, attention)
        cache.layers.append(LayerCache(inp, mask, X, U, alpha, Fpre, F, Y, LY, beta, Hpre, H))
    z = nk.segment_sum(H, batch.graph_offsets) / _graph_sizes(batch, H.dtype)[:, None]
    logits = z @ model.Wc.T + model.bc
    if not np.all(np.isfinite(logits)):
        bad = [g.doc_id for g, row in zip(batch.graphs, logits) if not np.all(np.isfinite(row))]
        raise NumericalError(f"non-finite logits for document(s) {bad}")
    cache.z = z
    cache.logits = logits
    return cache


# --------------------------------------------------------------------------
# backward


def _layer_backward(lp: LayerParams, batch: GraphBatch, c: LayerCache, dH: np.ndarray, attention: bool, first: bool):
    d = c.Y.shape[1]
    dHpre = nk.relu_backward(c.Hpre, dH)
    g_nm = dHpre[batch.nm_node]
    dY = nk.segment_sum((c.beta[:, None] * g_nm)[batch.nm_of_em], batch.edge_offsets)
    dU = np.zeros_like(c.U)
    da1 = np.zeros_like(lp.a1)
    da2 = np.zeros_like(lp.a2)
    if attention:
        dbeta = np.einsum("ij,ij->i", c.Y[batch.nm_edge], g_nm)
        dscore = nk.segment_softmax_backward(c.beta, dbeta, batch.node_offsets, batch.nm_seg)
        dp = nk.segment_sum(dscore[batch.nm_of_em], batch.edge_offsets)
        dq = nk.segment_sum(dscore, batch.node_offsets)
        da2[:d] = c.LY.T @ dp
        da2[d:] = c.U.T @ dq
        dY += nk.leaky_relu_backward(c.Y, dp[:, None] * lp.a2[:d])
        dU += dq[:, None] * lp.a2[d:]
    dW2 = dY.T @ c.F
    dF = dY @ lp.W2
    dFpre = nk.relu_backward(c.Fpre, dF)
    g_em = dFpre[batch.em_edge]
    dX = nk.segment_sum((c.alpha[:, None] * g_em)[batch.em_of_nm], batch.node_offsets)
    if attention:
        dalpha = np.einsum("ij,ij->i", c.X[batch.em_node], g_em)
        ds_em = nk.segment_softmax_backward(c.alpha, dalpha, batch.edge_offsets, batch.em_seg)
        ds = nk.segment_sum(ds_em[batch.em_of_nm], batch.node_offsets)
        da1 = c.U.T @ ds
        dU += ds[:, None] * lp.a1
    dX += nk.leaky_relu_backward(c.X, dU)
    if first:
        if c.mask is not None:
            dX = dX * c.mask[:, None]
        dW1 = nk.one_hot_linear_backward(lp.W1.shape, batch.attr, dX)
        dH_prev = None
    else:
        dW1 = dX.T @ c.inp
        dH_prev = nk.dropout_backward(dX @ lp.W1, c.mask)
    return LayerParams(dW1, dW2, da1, da2), dH_prev


def backward(model: HyperGATModel, cache: ForwardCache, dlogits: np.ndarray):
    """Gradients of ``sum(dlogits * logits)`` for every parameter, in declared order."""
    batch = cache.batch
    attention = model.variant == "full"
    dWc = dlogits.T @ cache.z
    dbc = dlogits.sum(axis=0)
    dz = dlogits @ model.Wc
    sizes = _graph_sizes(batch, dz.dtype)
    graph_of_node = np.repeat(np.arange(len(batch.graphs)), np.diff(batch.graph_offsets))
    dH = (dz / sizes[:, None])[graph_of_node]
    layer_grads = [None] * len(model.layers)
    for li in range(len(model.layers) - 1, -1, -1):
        layer_grads[li], dH = _layer_backward(
            model.layers[li], batch, cache.layers[li], dH, attention, first=(li == 0))
    grads = []
    for lg in layer_grads:
        grads.extend(a for _, a in lg.arrays())
    grads.extend([dWc, dbc])
    return grads


def batch_loss(model: HyperGATModel, graphs: Sequence[TextHypergraph], labels: Sequence[int],
               train: bool = False, rng: np.random.Generator | None = None, l2_lambda: float = 0.0,
               batch: GraphBatch | None = None):
    """Mean cross-entropy plus ``l2_lambda * sum ||theta||^2`` (bias excluded).

    Returns ``(loss, grads, cache)``; ``grads`` follows ``named_parameters`` order.
    """
    if not graphs:
        raise ValueError("empty batch")
    if batch is None:
        batch = GraphBatch.from_graphs(graphs)
    cache = forward(model, batch, train, rng)
    labels = np.asarray(labels, dtype=np.int64)
    n_cls = model.n_classes
    if labels.min() < 0 or labels.max() >= n_cls:
        raise IndexError("label out of range")
    logp = nk.log_softmax(cache.logits)
    b = len(graphs)
    ce = -logp[np.arange(b), labels]
    dlogits = np.exp(logp)
    dlogits[np.arange(b), labels] -= 1
    dlogits /= dlogits.dtype.type(b)
    grads = backward(model, cache, dlogits)
    loss = float(ce.mean())
    if l2_lambda:
        params = model.named_parameters()
        for i, (name, p) in enumerate(params):
            if name == "bc":
                continue
            loss += l2_lambda * float(np.sum(p.astype(np.float64) ** 2))
            grads[i] = grads[i] + p.dtype.type(2 * l2_lambda) * p
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss for batch of documents {[g.doc_id for g in graphs]}")
    for (name, _), g in zip(model.named_parameters(), grads):
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name} in batch of documents {[g_.doc_id for g_ in graphs]}")
    return loss, grads, cache


def predict_logits(model: HyperGATModel, graphs: Sequence[TextHypergraph], batch_size: int = 1) -> np.ndarray:
    """Eval-mode logits, one row per graph."""
    out = []
    for i in range(0, len(graphs), batch_size):
        out.append(forward(model, GraphBatch.from_graphs(graphs[i:i + batch_size])).logits)
    if not out:
        return np.zeros((0, model.n_classes), dtype=nk.get_dtype())
    return np.concatenate(out, axis=0)


def document_embeddings(model: HyperGATModel, graphs: Sequence[TextHypergraph], batch_size: int = 1) -> np.ndarray:
    out = [forward(model, GraphBatch.from_graphs(graphs[i:i + batch_size])).z
           for i in range(0, len(graphs), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.dims[-1]))


# --------------------------------------------------------------------------
# attention inspection


@dataclass
class AttentionRecord:
    """Per-node view of one layer's attention on one document."""

    layer: int
    doc_id: int
    nodes: list[dict]

    def to_json(self, words: Sequence[str] | None = None) -> dict:
        if words is None:
            return {"layer": self.layer, "doc_id": self.doc_id, "nodes": self.nodes}
        def name(v):
            return words[v]
        nodes = []
        for rec in self.nodes:
            nodes.append({
                "node": name(rec["node"]),
                "edges": [
                    {**e, "members": [{"node": name(m["node"]), "alpha": m["alpha"]} for m in e["members"]]}
                    for e in rec["edges"]
                ],
            })
        return {"layer": self.layer, "doc_id": self.doc_id, "nodes": nodes}


def attention_records(cache: ForwardCache, graph_index: int = 0) -> list[AttentionRecord]:
    """Collect alpha / beta of one graph in the batch, one record per layer."""
    batch = cache.batch
    g = batch.graphs[graph_index]
    nb = int(batch.graph_offsets[graph_index])
    eb = sum(h.m for h in batch.graphs[:graph_index])
    records = []
    for li, c in enumerate(cache.layers):
        nodes = []
        for i in range(g.n):
            gi = nb + i
            edges = []
            for p in range(batch.node_offsets[gi], batch.node_offsets[gi + 1]):
                ge = int(batch.nm_edge[p])
                j = ge - eb
                lo, hi = batch.edge_offsets[ge], batch.edge_offsets[ge + 1]
                members = [
                    {"node": g.nodes[int(batch.em_node[q]) - nb], "alpha": float(c.alpha[q])}
                    for q in range(lo, hi)
                ]
                edges.append({"edge": j, "kind": g.edges[j].kind, "beta": float(c.beta[p]), "members": members})
            nodes.append({"node": g.nodes[i], "edges": edges})
        records.append(AttentionRecord(li, g.doc_id, nodes))
    return records


def extract_attention(model: HyperGATModel, hg: TextHypergraph) -> list[AttentionRecord]:
    return attention_records(forward(model, GraphBatch.from_graphs([hg])))


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"HGAT1"


def vocab_hash(words: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(words).encode("utf-8")).hexdigest()[:16]


def save_checkpoint(path, model: HyperGATModel, vocab_digest: str = "", extra: dict | None = None) -> None:
    header = {
        "dims": model.dims,
        "C": model.n_classes,
        "variant": model.variant,
        "vocab_hash": vocab_digest,
        "seed": model.seed,
        "dropout_p": model.dropout_p,
        "params": [[n, list(a.shape)] for n, a in model.named_parameters()],
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, a in model.named_parameters():
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[HyperGATModel, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a HyperGAT checkpoint")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + n].decode("utf-8"))
    off += n
    arrays = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape)
        arrays[name] = a.astype(nk.get_dtype())
        off += 4 * count
    if off != len(data):
        raise DataError(f"{path}: trailing or missing bytes")
    layers = []
    for i in range(len(header["dims"]) - 1):
        layers.append(LayerParams(*(arrays[f"layers.{i}.{k}"] for k in ("W1", "W2", "a1", "a2"))))
    model = HyperGATModel(layers, arrays["Wc"], arrays["bc"], header["variant"],
                          header.get("dropout_p", 0.3), header["seed"])
    return model, header
