"""Central finite-difference verification of the analytic gradients.

Used with dropout disabled and in double precision. For parameters with
near-zero gradients (dead relu paths, clamped losses) the comparison
falls back to an absolute tolerance of 1e-8, since relative error on a
tiny denominator only measures finite-difference noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embeddings import ContextEmbeddingRecord
from .models import (
    NncParams,
    PooledClassifierParams,
    _nnc_apply,
    _nnc_backward,
    _pooled_apply,
    _pooled_backward,
)
from .ops import bce_loss

# Central differences carry an absolute noise floor around 1e-11 (machine
# epsilon over 2*epsilon plus truncation), so relative error is meaningless
# for gradients below _SMALL_GRAD; those fall back to an absolute check.
_SMALL_GRAD = 1e-6
_ABS_TOL = 1e-8


@dataclass(frozen=True)
class NncExample:
    q_matrix: np.ndarray
    s_matrix: np.ndarray
    pos_feature: float
    label: int


@dataclass(frozen=True)
class PooledExample:
    record: ContextEmbeddingRecord
    pos_feature: float
    label: int


def _max_relative_error(
    analytic: dict[str, np.ndarray],
    flat: dict[str, np.ndarray],
    loss_fn,
    epsilon: float,
) -> float:
    worst = 0.0
    for name, param in flat.items():
        grad = analytic[name]
        it = np.nditer(param, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = param[idx]
            param[idx] = original + epsilon
            loss_plus = loss_fn()
            param[idx] = original - epsilon
            loss_minus = loss_fn()
            param[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            a = float(grad[idx])
            scale = max(abs(a), abs(numeric))
            if scale < _SMALL_GRAD:
                err = 0.0 if abs(a - numeric) < _ABS_TOL else abs(a - numeric) / scale
            else:
                err = abs(a - numeric) / scale
            worst = max(worst, err)
            it.iternext()
    return worst


def grad_check(
    params: NncParams | PooledClassifierParams,
    example: NncExample | PooledExample,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic and finite-difference gradients."""
    if isinstance(params, NncParams):
        assert isinstance(example, NncExample)
        cache = _nnc_apply(params, example.q_matrix, example.s_matrix, example.pos_feature)
        analytic = _nnc_backward(params, cache, example.label)

        def loss_fn() -> float:
            c = _nnc_apply(
                params, example.q_matrix, example.s_matrix, example.pos_feature
            )
            return bce_loss(c.head.prob, example.label)

    else:
        assert isinstance(example, PooledExample)
        cache = _pooled_apply(params, example.record, example.pos_feature)
        analytic = _pooled_backward(params, cache, example.label)

        def loss_fn() -> float:
            c = _pooled_apply(params, example.record, example.pos_feature)
            return bce_loss(c.head.prob, example.label)

    return _max_relative_error(analytic, params.flat(), loss_fn, epsilon)
