"""Numerical kernels with hand-written backward passes.

Matrices are plain 2-D numpy arrays. Every kernel comes as a forward
function plus a ``*_backward`` partner; the model composes them by hand,
there is no tape.

Floating point precision is a run-wide switch (``set_precision``): 32-bit
for training, 64-bit for gradient checks.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError

LEAKY_SLOPE = 0.2

_DTYPES = {"float32": np.float32, "float64": np.float64}
_dtype = np.float32


def set_precision(name: str) -> None:
    global _dtype
    try:
        _dtype = _DTYPES[name]
    except KeyError:
        raise ValueError(f"precision must be one of {sorted(_DTYPES)}, got {name!r}") from None


def get_dtype():
    return _dtype


def precision_name() -> str:
    return np.dtype(_dtype).name


@contextlib.contextmanager
def precision(name: str):
    previous = precision_name()
    set_precision(name)
    try:
        yield
    finally:
        set_precision(previous)


def check_finite(x, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite value in {what}")


# --------------------------------------------------------------------------
# dense products


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    check_finite(out, "matmul")
    return out


def matmul_backward(a: np.ndarray, b: np.ndarray, dc: np.ndarray):
    return dc @ b.T, a.T @ dc


def one_hot_linear(w: np.ndarray, ids) -> np.ndarray:
    """Rows of ``onehot(ids) @ w.T``, computed by column selection.

    ``w`` has shape ``(d_out, vocab)``; the result has one row per id.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= w.shape[1]):
        raise IndexError(f"one-hot id out of range [0, {w.shape[1]})")
    return w[:, ids].T.copy()


def one_hot_linear_backward(w_shape, ids, dout: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``w``; columns never selected stay exactly zero."""
    dw = np.zeros(w_shape, dtype=dout.dtype)
    np.add.at(dw.T, np.asarray(ids, dtype=np.int64), dout)
    return dw


# --------------------------------------------------------------------------
# segments


def validate_offsets(offsets, length: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.ndim != 1 or offsets.size < 2:
        raise ValueError("offsets need at least two entries")
    if offsets[0] != 0 or offsets[-1] != length:
        raise ValueError(f"offsets must span [0, {length}]")
    if np.any(np.diff(offsets) <= 0):
        raise ValueError("offsets must be strictly increasing (segments non-empty)")
    return offsets


def segment_ids(offsets: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(offsets.size - 1), np.diff(offsets))


def segment_sum(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Sum contiguous groups of ``values`` along axis 0. Segments must be non-empty."""
    return np.add.reduceat(values, offsets[:-1], axis=0)


def segment_softmax(scores: np.ndarray, offsets, seg: np.ndarray | None = None) -> np.ndarray:
    """Softmax within each segment. Callers passing ``seg`` vouch for valid offsets."""
    if seg is None:
        offsets = validate_offsets(offsets, scores.shape[0])
        seg = segment_ids(offsets)
    offsets = np.asarray(offsets, dtype=np.int64)
    seg_max = np.maximum.reduceat(scores, offsets[:-1])
    e = np.exp(scores - seg_max[seg])
    w = e / np.add.reduceat(e, offsets[:-1])[seg]
    check_finite(w, "segment_softmax")
    return w


def segment_softmax_backward(w: np.ndarray, dw: np.ndarray, offsets, seg: np.ndarray | None = None):
    offsets = np.asarray(offsets, dtype=np.int64)
    if seg is None:
        seg = segment_ids(offsets)
    dot = np.add.reduceat(w * dw, offsets[:-1])
    return w * (dw - dot[seg])


# --------------------------------------------------------------------------
# activations


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x, dy, slope: float = LEAKY_SLOPE):
    # derivative at exactly 0 is taken as ``slope``
    return np.where(x > 0, dy, slope * dy)


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, dy):
    # derivative at exactly 0 is taken as 0
    return np.where(x > 0, dy, 0)


def dropout(x: np.ndarray, p: float, train: bool, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is None when nothing was dropped."""
    if not 0 <= p < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0:
        return x, None
    keep = rng.random(x.shape) >= p
    mask = keep.astype(x.dtype) / x.dtype.type(1 - p)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# --------------------------------------------------------------------------
# readout and loss


def mean_pool_rows(h: np.ndarray) -> np.ndarray:
    if h.shape[0] == 0:
        raise ValueError("mean_pool_rows needs at least one row")
    return h.mean(axis=0)


def mean_pool_rows_backward(dz: np.ndarray, n_rows: int) -> np.ndarray:
    return np.broadcast_to(dz / n_rows, (n_rows, dz.shape[-1])).copy()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, label: int):
    """Return ``(loss, dlogits)`` for a single example."""
    if not 0 <= label < logits.shape[-1]:
        raise IndexError(f"label {label} out of range for {logits.shape[-1]} classes")
    logp = log_softmax(logits)
    loss = -logp[label]
    grad = np.exp(logp)
    grad[label] -= 1
    return loss, grad


# --------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, param: np.ndarray, **kw) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), **kw)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float, name: str = "param") -> None:
    """Bias-corrected Adam update, applied to ``param`` in place."""
    if param.shape != grad.shape:
        raise ValueError(f"{name}: gradient shape {grad.shape} != parameter shape {param.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite gradient for parameter {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1 - b1) * grad
    state.v *= b2
    state.v += (1 - b2) * (grad * grad)
    m_hat = state.m / (1 - b1 ** state.step)
    v_hat = state.v / (1 - b2 ** state.step)
    param -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.dtype, copy=False)


# --------------------------------------------------------------------------
# finite differences


def grad_check(
    f: Callable[..., tuple[float, Sequence[np.ndarray]]],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Largest per-coordinate relative error between analytic and numeric gradients.

    ``f(*inputs)`` must return ``(scalar, grads)`` with one gradient array per
    input. Inputs are perturbed in place and restored. Relative error is
    ``|a - n| / max(1e-8, |a| + |n|)`` with central differences for ``n``.
    """
    _, analytic = f(*inputs)
    analytic = [np.array(g, dtype=np.float64, copy=True) for g in analytic]
    worst = 0.0
    for x, g in zip(inputs, analytic):
        flat = x.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up, _ = f(*inputs)
            flat[i] = orig - eps
            down, _ = f(*inputs)
            flat[i] = orig
            num = (float(up) - float(down)) / (2 * eps)
            err = abs(gflat[i] - num) / max(1e-8, abs(gflat[i]) + abs(num))
            worst = max(worst, err)
    return worst


@dataclass
class Glorot:
    """Glorot-uniform initialiser bound to a generator."""

    rng: np.random.Generator
    dtype: type = field(default_factory=get_dtype)

    @staticmethod
    def bound(fan_in: int, fan_out: int) -> float:
        return math.sqrt(6.0 / (fan_in + fan_out))

    def __call__(self, shape, fan_in: int, fan_out: int) -> np.ndarray:
        b = self.bound(fan_in, fan_out)
        return self.rng.uniform(-b, b, size=shape).astype(self.dtype)
