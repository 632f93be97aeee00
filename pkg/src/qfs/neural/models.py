"""The two sentence classifiers: BiLSTM interaction model and pooled model.

The interaction model ("nnc") encodes question and candidate sentence
with one shared bidirectional LSTM, multiplies the two sentence
embeddings elementwise, concatenates [sentence ; interaction ;
position], and classifies through a relu hidden layer and a sigmoid
output. The pooled model skips all of that: its input is the mean of
the externally produced contextual embeddings of the candidate-sentence
tokens, concatenated with the position feature.

The position feature encodes a 0-based candidate position as
1 / (1 + position), bounded in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..embeddings import ContextEmbeddingRecord
from ..errors import EmptySequence
from .lstm import BiLstmCache, LstmParams, bilstm_backward, bilstm_encode, lstm_backward
from .ops import relu, sigmoid

NNC_KIND = "nnc"
POOLED_KIND = "pooled"

DEFAULT_EMBEDDING_DIM = 100
DEFAULT_LSTM_HIDDEN = 100
DEFAULT_DENSE_HIDDEN = 50


def position_feature(position: int) -> float:
    """Bounded encoding of a 0-based list position."""
    if position < 0:
        raise ValueError("position must be >= 0")
    return 1.0 / (1.0 + position)


@dataclass
class DenseParams:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class NncParams:
    """Shared BiLSTM encoder plus the interaction classifier head."""

    lstm_fwd: LstmParams
    lstm_bwd: LstmParams
    hidden: DenseParams  # (dense_hidden, 4H + 1)
    output: DenseParams  # (1, dense_hidden)
    seed: int = 0

    kind = NNC_KIND

    @property
    def embedding_dim(self) -> int:
        return self.lstm_fwd.input_dim

    @property
    def lstm_hidden(self) -> int:
        return self.lstm_fwd.hidden_dim

    @property
    def dense_hidden(self) -> int:
        return self.hidden.w.shape[0]

    def flat(self) -> dict[str, np.ndarray]:
        return {
            "lstm_fwd.w_x": self.lstm_fwd.w_x,
            "lstm_fwd.w_h": self.lstm_fwd.w_h,
            "lstm_fwd.b": self.lstm_fwd.b,
            "lstm_bwd.w_x": self.lstm_bwd.w_x,
            "lstm_bwd.w_h": self.lstm_bwd.w_h,
            "lstm_bwd.b": self.lstm_bwd.b,
            "hidden.w": self.hidden.w,
            "hidden.b": self.hidden.b,
            "output.w": self.output.w,
            "output.b": self.output.b,
        }


@dataclass
class PooledClassifierParams:
    """Classifier over mean-pooled contextual embeddings plus position."""

    hidden: DenseParams  # (dense_hidden, D + 1)
    output: DenseParams  # (1, dense_hidden)
    seed: int = 0

    kind = POOLED_KIND

    @property
    def input_dim(self) -> int:
        return self.hidden.w.shape[1] - 1

    @property
    def dense_hidden(self) -> int:
        return self.hidden.w.shape[0]

    def flat(self) -> dict[str, np.ndarray]:
        return {
            "hidden.w": self.hidden.w,
            "hidden.b": self.hidden.b,
            "output.w": self.output.w,
            "output.b": self.output.b,
        }


def _init_lstm(rng: np.random.Generator, emb_dim: int, hidden_dim: int) -> LstmParams:
    w_x = rng.uniform(-0.05, 0.05, size=(4 * hidden_dim, emb_dim))
    w_h = rng.uniform(-0.05, 0.05, size=(4 * hidden_dim, hidden_dim))
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim : 2 * hidden_dim] = 1.0  # forget-gate bias
    return LstmParams(w_x=w_x, w_h=w_h, b=b)


def init_nnc(
    emb_dim: int = DEFAULT_EMBEDDING_DIM,
    lstm_hidden: int = DEFAULT_LSTM_HIDDEN,
    dense_hidden: int = DEFAULT_DENSE_HIDDEN,
    seed: int = 0,
) -> NncParams:
    rng = np.random.default_rng(seed)
    return NncParams(
        lstm_fwd=_init_lstm(rng, emb_dim, lstm_hidden),
        lstm_bwd=_init_lstm(rng, emb_dim, lstm_hidden),
        hidden=DenseParams(
            w=rng.uniform(-0.05, 0.05, size=(dense_hidden, 4 * lstm_hidden + 1)),
            b=np.zeros(dense_hidden),
        ),
        output=DenseParams(
            w=rng.uniform(-0.05, 0.05, size=(1, dense_hidden)), b=np.zeros(1)
        ),
        seed=seed,
    )


def init_pooled(
    input_dim: int, dense_hidden: int = DEFAULT_DENSE_HIDDEN, seed: int = 0
) -> PooledClassifierParams:
    rng = np.random.default_rng(seed)
    return PooledClassifierParams(
        hidden=DenseParams(
            w=rng.uniform(-0.05, 0.05, size=(dense_hidden, input_dim + 1)),
            b=np.zeros(dense_hidden),
        ),
        output=DenseParams(
            w=rng.uniform(-0.05, 0.05, size=(1, dense_hidden)), b=np.zeros(1)
        ),
        seed=seed,
    )


@dataclass
class _HeadCache:
    """Values saved by the classifier head for the backward pass."""

    x: np.ndarray
    a1: np.ndarray
    h: np.ndarray
    prob: float
    dropout_mask: np.ndarray | None


def _head_forward(
    hidden: DenseParams,
    output: DenseParams,
    x: np.ndarray,
    dropout_mask: np.ndarray | None,
) -> _HeadCache:
    a1 = hidden.w @ x + hidden.b
    h = relu(a1)
    if dropout_mask is not None:
        h = h * dropout_mask
    z = float(output.w @ h + output.b)
    return _HeadCache(x=x, a1=a1, h=h, prob=float(sigmoid(z)), dropout_mask=dropout_mask)


def _head_backward(
    hidden: DenseParams, output: DenseParams, cache: _HeadCache, label: int
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of BCE(prob, label) w.r.t. head params and head input."""
    dz = cache.prob - label
    g_out_w = np.outer([dz], cache.h)
    g_out_b = np.array([dz])
    dh = output.w[0] * dz
    if cache.dropout_mask is not None:
        dh = dh * cache.dropout_mask
    da1 = dh * (cache.a1 > 0.0)
    g_hid_w = np.outer(da1, cache.x)
    g_hid_b = da1
    dx = hidden.w.T @ da1
    grads = {
        "hidden.w": g_hid_w,
        "hidden.b": g_hid_b,
        "output.w": g_out_w,
        "output.b": g_out_b,
    }
    return grads, dx


@dataclass
class NncCache:
    q_vec: np.ndarray
    s_vec: np.ndarray
    q_cache: BiLstmCache
    s_cache: BiLstmCache
    head: _HeadCache


def _nnc_apply(
    params: NncParams,
    q_matrix: np.ndarray,
    s_matrix: np.ndarray,
    pos_feature: float,
    dropout_mask: np.ndarray | None = None,
) -> NncCache:
    if q_matrix.shape[0] == 0 or s_matrix.shape[0] == 0:
        raise EmptySequence("question and sentence matrices must be non-empty")
    q_vec, q_cache = bilstm_encode(params.lstm_fwd, params.lstm_bwd, q_matrix)
    s_vec, s_cache = bilstm_encode(params.lstm_fwd, params.lstm_bwd, s_matrix)
    inter = s_vec * q_vec
    x = np.concatenate([s_vec, inter, [pos_feature]])
    head = _head_forward(params.hidden, params.output, x, dropout_mask)
    return NncCache(q_vec=q_vec, s_vec=s_vec, q_cache=q_cache, s_cache=s_cache, head=head)


def nnc_forward(
    params: NncParams,
    q_matrix: np.ndarray,
    s_matrix: np.ndarray,
    pos_feature: float,
) -> float:
    """Probability that the sentence belongs to the ideal answer."""
    return _nnc_apply(params, q_matrix, s_matrix, pos_feature).head.prob


def _nnc_backward(
    params: NncParams, cache: NncCache, label: int
) -> dict[str, np.ndarray]:
    """Gradients of BCE(prob, label) for every parameter."""
    grads, dx = _head_backward(params.hidden, params.output, cache.head, label)
    two_h = cache.s_vec.shape[0]
    d_s = dx[:two_h] + dx[two_h : 2 * two_h] * cache.q_vec
    d_q = dx[two_h : 2 * two_h] * cache.s_vec
    gq_f, gq_b = bilstm_backward(params.lstm_fwd, params.lstm_bwd, cache.q_cache, d_q)
    gs_f, gs_b = bilstm_backward(params.lstm_fwd, params.lstm_bwd, cache.s_cache, d_s)
    for name, gq, gs in (
        ("w_x", gq_f["w_x"], gs_f["w_x"]),
        ("w_h", gq_f["w_h"], gs_f["w_h"]),
        ("b", gq_f["b"], gs_f["b"]),
    ):
        grads[f"lstm_fwd.{name}"] = gq + gs
    for name, gq, gs in (
        ("w_x", gq_b["w_x"], gs_b["w_x"]),
        ("w_h", gq_b["w_h"], gs_b["w_h"]),
        ("b", gq_b["b"], gs_b["b"]),
    ):
        grads[f"lstm_bwd.{name}"] = gq + gs
    return grads


@dataclass
class PooledCache:
    head: _HeadCache


def _pooled_apply(
    params: PooledClassifierParams,
    record: ContextEmbeddingRecord,
    pos_feature: float,
    dropout_mask: np.ndarray | None = None,
) -> PooledCache:
    pooled = record.pooled()
    x = np.concatenate([pooled, [pos_feature]])
    return PooledCache(head=_head_forward(params.hidden, params.output, x, dropout_mask))


def pooled_forward(
    params: PooledClassifierParams,
    record: ContextEmbeddingRecord,
    pos_feature: float,
) -> float:
    """Probability from the mean-pooled candidate-sentence embedding."""
    return _pooled_apply(params, record, pos_feature).head.prob


def _pooled_backward(
    params: PooledClassifierParams, cache: PooledCache, label: int
) -> dict[str, np.ndarray]:
    grads, _ = _head_backward(params.hidden, params.output, cache.head, label)
    return grads
