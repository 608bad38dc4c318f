"""Conditional pseudo-log-likelihood training of the dependency layer.

Plain mini-batch SGD on the mean CPLL loss, with an l1 penalty on w and v
handled by a proximal soft-threshold after each step.  Biases are not
penalized and the diagonal of v is never a parameter.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import DdnModel, Instance, softplus, sigmoid
from .rng import stream

log = logging.getLogger(__name__)

CONSTANT = "constant"
STEP_DECAY = "step"


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    l1_lambda: float = 0.0
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    lr_schedule: str = CONSTANT
    decay_factor: float = 0.5
    decay_every: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr_schedule not in (CONSTANT, STEP_DECAY):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.lr_schedule == STEP_DECAY and not (0 < self.decay_factor <= 1 and self.decay_every >= 1):
            raise ValueError("step decay needs 0 < decay_factor <= 1 and decay_every >= 1")

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == STEP_DECAY:
            return self.learning_rate * self.decay_factor ** (epoch // self.decay_every)
        return self.learning_rate


@dataclass
class TrainResult:
    model: DdnModel
    initial_loss: float
    loss_trace: list[float] = field(default_factory=list)


def _stack(model: DdnModel, batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple):
        E, X = batch
        return np.asarray(E, dtype=float), np.asarray(X, dtype=float)
    if not batch:
        raise ValueError("empty batch")
    for k, inst in enumerate(batch):
        if inst.labels is None:
            raise ValueError(f"instance {k} has no labels")
    E = np.stack([inst.features for inst in batch])
    X = np.stack([inst.labels for inst in batch]).astype(float)
    if E.shape[1] != model.n_features or X.shape[1] != model.n_labels:
        raise ValueError(
            f"batch shape features={E.shape[1]}, labels={X.shape[1]} does not match the model "
            f"({model.n_features}, {model.n_labels})"
        )
    return E, X


def l1_penalty(model: DdnModel) -> float:
    return float(np.abs(model.w).sum() + np.abs(model.v).sum())


def cpll_loss(model: DdnModel, batch: Sequence[Instance] | tuple, l1_lambda: float = 0.0) -> float:
    """Mean over instances of -sum_i log P_i(x_i | e, x_-i), labels clamped to the truth.

    ``batch`` is a list of labelled instances or a ``(features, labels)``
    pair of stacked arrays.
    """
    E, X = _stack(model, batch)
    Z = E @ model.w.T + X @ model.v.T + model.b
    loss = float(np.mean(np.sum(softplus(Z) - X * Z, axis=1)))
    if l1_lambda:
        loss += l1_lambda * l1_penalty(model)
    return loss


def cpll_gradient(model: DdnModel, batch: Sequence[Instance] | tuple):
    """Gradients of the unregularized mean CPLL loss w.r.t. (w, v, b)."""
    E, X = _stack(model, batch)
    m = E.shape[0]
    Z = E @ model.w.T + X @ model.v.T + model.b
    R = sigmoid(Z) - X  # dloss/dz per instance and label
    grad_w = R.T @ E / m
    grad_v = R.T @ X / m
    np.fill_diagonal(grad_v, 0.0)
    grad_b = R.mean(axis=0)
    return grad_w, grad_v, grad_b


def soft_threshold(a: np.ndarray, t: float) -> np.ndarray:
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def train(
    dataset: Sequence[Instance] | tuple,
    config: TrainConfig,
    init: DdnModel | None = None,
    freeze_v: bool = False,
) -> TrainResult:
    """Fit a model by SGD; ``loss_trace[k]`` is the full-data objective after epoch k.

    ``freeze_v`` keeps v at zero, which trains independent per-label
    logistic regressions (the no-dependency baseline).
    """
    if isinstance(dataset, tuple):
        E, X = (np.asarray(a, dtype=float) for a in dataset)
        if E.shape[0] == 0:
            raise ValueError("empty dataset")
    else:
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        for k, inst in enumerate(dataset):
            if inst.labels is None:
                raise ValueError(f"instance {k} has no labels")
        E = np.stack([inst.features for inst in dataset])
        X = np.stack([inst.labels for inst in dataset]).astype(float)
    m, f = E.shape
    n = X.shape[1]
    model = init if init is not None else DdnModel.zeros(n, f)
    if (model.n_labels, model.n_features) != (n, f):
        raise ValueError("initial model does not match the dataset dimensions")

    w = model.w.copy()
    v = np.zeros((n, n)) if freeze_v else model.v.copy()
    b = model.b.copy()
    offdiag = ~np.eye(n, dtype=bool)
    lam = config.l1_lambda

    def objective() -> float:
        Z = E @ w.T + X @ v.T + b
        val = float(np.mean(np.sum(softplus(Z) - X * Z, axis=1)))
        return val + lam * float(np.abs(w).sum() + np.abs(v).sum())

    initial = objective()
    trace: list[float] = []
    rng = stream(config.seed, 0)
    # overflow is caught by the finiteness checks, which name the epoch and batch
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            lr = config.lr_at(epoch)
            order = rng.permutation(m)
            for bi, lo in enumerate(range(0, m, config.batch_size)):
                idx = order[lo : lo + config.batch_size]
                Eb, Xb = E[idx], X[idx]
                Z = Eb @ w.T + Xb @ v.T + b
                R = sigmoid(Z) - Xb
                gw = R.T @ Eb / len(idx)
                gb = R.mean(axis=0)
                w -= lr * gw
                b -= lr * gb
                if not freeze_v:
                    gv = R.T @ Xb / len(idx)
                    v[offdiag] -= lr * gv[offdiag]
                if lam:
                    w = soft_threshold(w, lr * lam)
                    if not freeze_v:
                        v = soft_threshold(v, lr * lam)
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v)) and np.all(np.isfinite(b))):
                    raise TrainingError(f"non-finite parameters at epoch {epoch}, batch {bi}")
            loss = objective()
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            trace.append(loss)
            log.debug("epoch %d lr %.4g loss %.6f", epoch, lr, loss)
    if config.epochs == 0 and not freeze_v:
        return TrainResult(model, initial, trace)
    return TrainResult(DdnModel(w=w, v=v, b=b), initial, trace)
