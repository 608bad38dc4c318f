"""Conditional dependency network parameterization and the exact MPE score.

Every label i has a logistic conditional

    P_i(x_i = 1 | x_-i, e) = sigmoid(z_i),   z_i = b_i + w_i . e + sum_{k != i} v_ik x_k

and every inference engine in this package maximizes

    score(x) = sum_i log P_i(x_i | x_-i, e) = sum_i [x_i z_i - softplus(z_i)].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

FORMAT_VERSION = 1


class DimensionError(ValueError):
    """Raised when arrays disagree with the model's label/feature axes."""

    def __init__(self, axis: str, expected: int, got: int):
        self.axis = axis
        self.expected = expected
        self.got = got
        super().__init__(f"{axis}: expected length {expected}, got {got}")


class ModelFormatError(ValueError):
    pass


def softplus(z):
    """log(1 + exp(z)) without overflow for large |z|."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class DdnModel:
    """Weights of the dependency layer.

    ``w`` is (n_labels, n_features), ``v`` is (n_labels, n_labels) with a zero
    diagonal and ``b`` has length n_labels.  Arrays are copied and made
    read-only on construction so a model can be shared between threads.
    """

    w: np.ndarray
    v: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float, copy=True)
        v = np.array(self.v, dtype=float, copy=True)
        b = np.array(self.b, dtype=float, copy=True).reshape(-1)
        if w.ndim != 2:
            raise ModelFormatError(f"w must be 2-D, got shape {w.shape}")
        n, _ = w.shape
        if n < 1:
            raise ModelFormatError("n_labels must be positive")
        if w.shape[1] < 1:
            raise ModelFormatError("n_features must be positive")
        if v.shape != (n, n):
            raise ModelFormatError(f"v must have shape {(n, n)}, got {v.shape}")
        if b.shape != (n,):
            raise ModelFormatError(f"b must have length {n}, got {b.shape[0]}")
        for name, arr in (("w", w), ("v", v), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ModelFormatError(f"{name} contains non-finite entries")
        if np.any(np.diag(v) != 0.0):
            raise ModelFormatError("diagonal of v must be exactly zero")
        for arr in (w, v, b):
            arr.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "b", b)

    @property
    def n_labels(self) -> int:
        return self.w.shape[0]

    @property
    def n_features(self) -> int:
        return self.w.shape[1]

    @classmethod
    def zeros(cls, n_labels: int, n_features: int) -> "DdnModel":
        return cls(
            w=np.zeros((n_labels, n_features)),
            v=np.zeros((n_labels, n_labels)),
            b=np.zeros(n_labels),
        )

    def replace(self, **changes) -> "DdnModel":
        fields = {"w": self.w, "v": self.v, "b": self.b}
        fields.update(changes)
        return DdnModel(**fields)

    def offsets(self, features) -> np.ndarray:
        """c_i = b_i + w_i . e, the part of z that does not depend on x."""
        e = check_features(self, features)
        return self.b + self.w @ e

    # serialization

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "n_labels": self.n_labels,
            "n_features": self.n_features,
            "w": self.w.reshape(-1).tolist(),
            "v": self.v.reshape(-1).tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "DdnModel":
        try:
            version = doc["format_version"]
            n = int(doc["n_labels"])
            f = int(doc["n_features"])
            w, v, b = doc["w"], doc["v"], doc["b"]
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"missing model field: {exc}") from None
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported format_version {version!r}")
        if n < 1 or f < 1:
            raise ModelFormatError("n_labels and n_features must be positive")
        try:
            w = np.asarray(w, dtype=float)
            v = np.asarray(v, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad weight array: {exc}") from None
        if w.size != n * f:
            raise ModelFormatError(f"w has {w.size} entries, expected {n * f}")
        if v.size != n * n:
            raise ModelFormatError(f"v has {v.size} entries, expected {n * n}")
        return cls(w=w.reshape(n, f), v=v.reshape(n, n), b=b)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "DdnModel":
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc)


@dataclass
class Instance:
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be a 0/1 vector")
            self.labels = labels.astype(np.int8)


@dataclass
class InferenceResult:
    """Output of every MPE engine.

    ``score`` is always the exact score of ``assignment``; ``objective`` holds
    the engine's own surrogate value where one exists (MILP objective).
    """

    assignment: np.ndarray
    score: float
    engine: str
    elapsed_s: float = 0.0
    marginals: np.ndarray | None = None
    optimal: bool | None = None
    objective: float | None = None
    fallback: bool = False
    stats: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "assignment": [int(a) for a in self.assignment],
            "score": float(self.score),
            "marginals": None if self.marginals is None else [float(p) for p in self.marginals],
            "engine": self.engine,
            "elapsed_s": float(self.elapsed_s),
            "optimal": self.optimal,
        }


def check_features(model: DdnModel, features) -> np.ndarray:
    e = np.asarray(features, dtype=float).reshape(-1)
    if e.shape[0] != model.n_features:
        raise DimensionError("features", model.n_features, e.shape[0])
    return e


def check_assignment(model: DdnModel, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != model.n_labels:
        raise DimensionError("labels", model.n_labels, x.reshape(-1).shape[0])
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return x.astype(float)


def compute_logits(model: DdnModel, features, x) -> np.ndarray:
    e = check_features(model, features)
    xf = check_assignment(model, x)
    return model.b + model.w @ e + model.v @ xf


def conditional_probability(model: DdnModel, features, x, i: int) -> float:
    """P_i(x_i = 1 | x_-i, e)."""
    if not 0 <= i < model.n_labels:
        raise IndexError(f"label index {i} out of range [0, {model.n_labels})")
    z = compute_logits(model, features, x)
    return float(sigmoid(z[i]))


def score_from_logits(z, x) -> float:
    z = np.asarray(z, dtype=float)
    return float(np.sum(np.asarray(x, dtype=float) * z - softplus(z)))


def score(model: DdnModel, features, x) -> float:
    """sum_i log P_i(x_i | x_-i, e) evaluated as sum_i [x_i z_i - softplus(z_i)]."""
    z = compute_logits(model, features, x)
    return score_from_logits(z, x)


def score_logprob(model: DdnModel, features, x) -> float:
    """Same quantity as :func:`score`, summed from per-label log-probabilities.

    1 - sigmoid(z) is taken as sigmoid(-z) so large positive z does not cancel.
    """
    z = compute_logits(model, features, x)
    xf = np.asarray(x, dtype=float)
    p1 = sigmoid(z)
    p0 = sigmoid(-z)
    return float(np.sum(xf * np.log(p1) + (1.0 - xf) * np.log(p0)))


def score_many(offsets: np.ndarray, v: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Exact scores for a batch of assignments (rows of ``xs``) sharing offsets."""
    xs = np.asarray(xs, dtype=float)
    z = offsets[None, :] + xs @ v.T
    return np.sum(xs * z - softplus(z), axis=1)


def flip_deltas(v: np.ndarray, z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Score change from flipping each label individually.

    Flipping label i by d = 1 - 2 x_i leaves z_i unchanged and shifts every
    other z_k by d * v_ki.
    """
    d = 1.0 - 2.0 * x
    shift = d[:, None] * v.T  # shift[i, k] = d_i v_ki, zero on the diagonal
    sp_old = softplus(z)
    sp_new = softplus(z[None, :] + shift)
    return d * z + shift @ x - (sp_new - sp_old[None, :]).sum(axis=1)


def apply_flip(v: np.ndarray, z: np.ndarray, x: np.ndarray, i: int) -> None:
    """Flip label i in place, updating the logits incrementally."""
    d = 1.0 - 2.0 * x[i]
    x[i] = 1.0 - x[i]
    z += d * v[:, i]


# Incremental logit updates are recomputed from scratch this often.
RECOMPUTE_EVERY = 1024


def as_assignment(x: Sequence[int] | np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.int8)
