"""Seeded, deterministic training for both classifier kinds.

Training for the interaction model embeds tokens through a static word
vector table; the pooled classifier joins examples to precomputed
contextual-embedding records by pair id. Either way the per-example
inputs are precomputed once, then Adam runs over shuffled minibatches.
Dropout (inverted, scale 1/(1-rate)) hits the hidden-layer activation
during training only, with masks drawn from a dedicated stream so a
dropout rate of zero is invariant to that stream's seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ..embeddings import ContextEmbeddingRecord, EmbeddingTable, embed_tokens
from ..errors import EmptyDataset, NonFiniteLoss, ScorerInputMissing
from .models import (
    NNC_KIND,
    POOLED_KIND,
    NncParams,
    PooledClassifierParams,
    _nnc_apply,
    _nnc_backward,
    _pooled_apply,
    _pooled_backward,
    init_nnc,
    init_pooled,
    position_feature,
)
from .ops import bce_loss


@dataclass(frozen=True)
class LabeledExample:
    """One (question, candidate sentence) training unit."""

    question_tokens: tuple[str, ...]
    sentence_tokens: tuple[str, ...]
    position: int
    label: int
    pair_id: str | None = None
    question_text: str = ""
    sentence_text: str = ""

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.position < 0:
            raise ValueError("position must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    dropout_rate: float = 0.0
    learning_rate: float = 1e-3
    seed: int = 0
    clip_len: int = 300
    dropout_seed: int | None = None  # defaults to a stream derived from seed

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.clip_len < 1:
            raise ValueError("clip_len must be >= 1")


# Hyperparameters used for the two architectures in their original runs.
NNC_TRAIN_DEFAULTS = TrainConfig(
    epochs=10, batch_size=1024, dropout_rate=0.7, clip_len=300
)
POOLED_TRAIN_DEFAULTS = TrainConfig(
    epochs=5, batch_size=32, dropout_rate=0.5, clip_len=250
)


class Adam:
    """Adam with the usual bias correction; state keyed by parameter name."""

    def __init__(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]
    ) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(p))
            v = self._v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _nnc_inputs(
    examples: Sequence[LabeledExample], table: EmbeddingTable, clip_len: int
) -> list[tuple[np.ndarray, np.ndarray, float]]:
    inputs = []
    for ex in examples:
        q = embed_tokens(table, ex.question_tokens, clip_len)
        s = embed_tokens(table, ex.sentence_tokens, clip_len)
        inputs.append((q, s, position_feature(ex.position)))
    return inputs


def _pooled_inputs(
    examples: Sequence[LabeledExample],
    records: Mapping[str, ContextEmbeddingRecord],
) -> list[tuple[ContextEmbeddingRecord, float]]:
    inputs = []
    for ex in examples:
        if ex.pair_id is None or ex.pair_id not in records:
            raise ScorerInputMissing(
                f"no context-embedding record for pair id {ex.pair_id!r}"
            )
        inputs.append((records[ex.pair_id], position_feature(ex.position)))
    return inputs


@dataclass
class TrainResult:
    params: NncParams | PooledClassifierParams
    loss_history: list[float] = field(default_factory=list)


def train(
    model: str,
    examples: Sequence[LabeledExample],
    source: EmbeddingTable | Mapping[str, ContextEmbeddingRecord],
    config: TrainConfig,
    lstm_hidden: int = 100,
    dense_hidden: int = 50,
) -> TrainResult:
    """Train a classifier; deterministic given the config seed.

    ``source`` is a word-vector table for the interaction model or a
    pair_id -> record mapping for the pooled classifier.
    """
    if not examples:
        raise EmptyDataset("training requires at least one example")

    if model == NNC_KIND:
        assert isinstance(source, EmbeddingTable)
        params: NncParams | PooledClassifierParams = init_nnc(
            emb_dim=source.dim,
            lstm_hidden=lstm_hidden,
            dense_hidden=dense_hidden,
            seed=config.seed,
        )
        inputs: list = _nnc_inputs(examples, source, config.clip_len)
    elif model == POOLED_KIND:
        pooled_inputs = _pooled_inputs(examples, source)  # type: ignore[arg-type]
        params = init_pooled(
            input_dim=pooled_inputs[0][0].dim, dense_hidden=dense_hidden, seed=config.seed
        )
        inputs = pooled_inputs
    else:
        raise ValueError(f"unknown model kind {model!r}")

    labels = [ex.label for ex in examples]
    flat = params.flat()
    optimizer = Adam(learning_rate=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    dropout_seed = (
        config.dropout_seed if config.dropout_seed is not None else config.seed + 0x9E37
    )
    drop_rng = np.random.default_rng(dropout_seed)
    rate = config.dropout_rate

    n = len(examples)
    loss_history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            batch_grads: dict[str, np.ndarray] = {
                k: np.zeros_like(v) for k, v in flat.items()
            }
            batch_loss = 0.0
            for idx in batch:
                mask = None
                if rate > 0.0:
                    keep = drop_rng.random(dense_hidden) >= rate
                    mask = keep.astype(np.float64) / (1.0 - rate)
                if model == NNC_KIND:
                    q, s, pos = inputs[idx]
                    cache = _nnc_apply(params, q, s, pos, dropout_mask=mask)  # type: ignore[arg-type]
                    grads = _nnc_backward(params, cache, labels[idx])  # type: ignore[arg-type]
                    prob = cache.head.prob
                else:
                    rec, pos = inputs[idx]
                    cache = _pooled_apply(params, rec, pos, dropout_mask=mask)  # type: ignore[arg-type]
                    grads = _pooled_backward(params, cache, labels[idx])  # type: ignore[arg-type]
                    prob = cache.head.prob
                batch_loss += bce_loss(prob, labels[idx])
                for k, g in grads.items():
                    batch_grads[k] += g
            scale = 1.0 / len(batch)
            for k in batch_grads:
                batch_grads[k] *= scale
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch + 1}, "
                    f"batch starting at example {start}"
                )
            optimizer.step(flat, batch_grads)
            epoch_loss += batch_loss
        loss_history.append(epoch_loss / n)
    return TrainResult(params=params, loss_history=loss_history)
