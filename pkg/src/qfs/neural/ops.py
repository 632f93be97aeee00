"""Elementwise activations and the binary cross-entropy loss.

Everything computes in float64; training and gradient checking rely on
that precision.
"""

from __future__ import annotations

import math

import numpy as np

BCE_EPS = 1e-7


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return float(out) if out.ndim == 0 else out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def bce_loss(pred: float, label: int) -> float:
    """Binary cross-entropy with the prediction clamped to [eps, 1-eps]."""
    p = min(max(pred, BCE_EPS), 1.0 - BCE_EPS)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))
