"""From-scratch differentiable sentence classifiers and their training."""

from .gradcheck import NncExample, PooledExample, grad_check
from .lstm import LstmParams, bilstm_encode, lstm_forward
from .models import (
    NNC_KIND,
    POOLED_KIND,
    DenseParams,
    NncParams,
    PooledClassifierParams,
    init_nnc,
    init_pooled,
    nnc_forward,
    pooled_forward,
    position_feature,
)
from .ops import bce_loss, sigmoid
from .serialize import load_params, save_params
from .training import (
    NNC_TRAIN_DEFAULTS,
    POOLED_TRAIN_DEFAULTS,
    Adam,
    LabeledExample,
    TrainConfig,
    TrainResult,
    train,
)

__all__ = [
    "NNC_KIND",
    "POOLED_KIND",
    "NNC_TRAIN_DEFAULTS",
    "POOLED_TRAIN_DEFAULTS",
    "Adam",
    "DenseParams",
    "LabeledExample",
    "LstmParams",
    "NncExample",
    "NncParams",
    "PooledClassifierParams",
    "PooledExample",
    "TrainConfig",
    "TrainResult",
    "bce_loss",
    "bilstm_encode",
    "grad_check",
    "init_nnc",
    "init_pooled",
    "load_params",
    "lstm_forward",
    "nnc_forward",
    "pooled_forward",
    "position_feature",
    "save_params",
    "sigmoid",
    "train",
]
