"""JSONL datasets and a synthetic correlated-label generator.

One instance per line::

    {"features": [0.1, -2.0], "labels": [0, 1, 1]}

``labels`` may be omitted (inference-only data).  An optional first line
``{"schema": "ddn-dataset-v1"}`` marks the format version.  Floats are
written with Python's shortest round-trip repr, so save then load is
bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import DdnModel, Instance
from .oracle import enumerate_states
from .rng import stream

SCHEMA = "ddn-dataset-v1"

MAX_SYNTH_LABELS = 20
EXACT_SYNTH_LABELS = 12
SYNTH_GIBBS_SWEEPS = 500
# feature weights are drawn N(0, (SYNTH_FEATURE_SCALE**2) / n_features)
SYNTH_FEATURE_SCALE = 2.0


class DataError(ValueError):
    """Malformed dataset file; the message names the path and line."""


@dataclass
class Dataset:
    instances: list[Instance] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return Dataset(self.instances[k])
        return self.instances[k]

    @property
    def n_features(self) -> int:
        if not self.instances:
            raise DataError("empty dataset has no feature dimension")
        return self.instances[0].features.shape[0]

    @property
    def n_labels(self) -> int | None:
        for inst in self.instances:
            if inst.labels is not None:
                return inst.labels.shape[0]
        return None

    @property
    def labelled(self) -> bool:
        return bool(self.instances) and all(inst.labels is not None for inst in self.instances)

    def features(self) -> np.ndarray:
        return np.stack([inst.features for inst in self.instances]).reshape(len(self), self.n_features)

    def labels(self) -> np.ndarray:
        if not self.labelled:
            raise DataError("dataset has unlabelled instances")
        return np.stack([inst.labels for inst in self.instances])


def _parse_line(text: str, where: str, dims: dict) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{where}: malformed JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or "features" not in doc:
        raise DataError(f"{where}: expected an object with a 'features' list")
    feats = doc["features"]
    if not isinstance(feats, list) or not all(
        isinstance(a, (int, float)) and not isinstance(a, bool) for a in feats
    ):
        raise DataError(f"{where}: 'features' must be a list of numbers")
    if not all(math.isfinite(a) for a in feats):
        raise DataError(f"{where}: 'features' contains a non-finite value")
    if dims.setdefault("features", len(feats)) != len(feats):
        raise DataError(f"{where}: expected {dims['features']} features, got {len(feats)}")
    labels = doc.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(
            isinstance(a, int) and not isinstance(a, bool) and a in (0, 1) for a in labels
        ):
            raise DataError(f"{where}: 'labels' must be a list of 0/1 integers")
        if dims.setdefault("labels", len(labels)) != len(labels):
            raise DataError(f"{where}: expected {dims['labels']} labels, got {len(labels)}")
    return Instance(np.array(feats, dtype=float), None if labels is None else np.array(labels))


def iter_dataset(path) -> Iterator[Instance]:
    """Stream instances from a JSONL file, validating each line as it is read."""
    dims: dict[str, int] = {}
    first = True
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            if first:
                first = False
                try:
                    head = json.loads(text)
                except json.JSONDecodeError:
                    head = None
                if isinstance(head, dict) and "schema" in head:
                    if head["schema"] != SCHEMA:
                        raise DataError(f"{path}:{lineno}: unsupported schema {head['schema']!r}")
                    continue
            yield _parse_line(text, f"{path}:{lineno}", dims)


def load_dataset(path) -> Dataset:
    return Dataset(list(iter_dataset(path)))


def save_dataset(dataset: Dataset, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(json.dumps({"schema": SCHEMA}) + "\n")
        for inst in dataset:
            doc = {"features": inst.features.tolist()}
            if inst.labels is not None:
                doc["labels"] = [int(a) for a in inst.labels]
            fh.write(json.dumps(doc) + "\n")


def load_jsonl(path) -> list[dict]:
    """Plain JSONL reader for result files; errors name the path and line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rows.append(json.loads(text))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
    return rows


# synthetic data


def synth_model(n_labels: int, n_features: int, coupling_strength: float, seed: int) -> DdnModel:
    """Random model with symmetric, nonnegative couplings.

    Couplings are |N(0, 1)| scaled by coupling_strength / sqrt(n - 1), so
    labels tend to co-occur.  Biases are set to -sum_k v_ik / 2, which
    centers every label near probability 1/2 before features act.
    """
    rng = stream(seed, 0)
    n = n_labels
    a = np.triu(np.abs(rng.normal(size=(n, n))), 1)
    v = coupling_strength * (a + a.T) / math.sqrt(max(n - 1, 1))
    w = rng.normal(size=(n, n_features)) * SYNTH_FEATURE_SCALE / math.sqrt(n_features)
    b = -0.5 * v.sum(axis=1)
    return DdnModel(w=w, v=v, b=b)


def _sample_exact(model: DdnModel, E: np.ndarray, seed: int) -> np.ndarray:
    # with symmetric v the conditionals are those of the Boltzmann law
    # P(x) ~ exp(c.x + sum_{i<k} v_ik x_i x_k), which Gibbs sampling converges to
    n = model.n_labels
    states = enumerate_states(n).astype(float)
    pair = 0.5 * np.einsum("si,ik,sk->s", states, model.v, states)
    out = np.empty((E.shape[0], n), dtype=np.int8)
    chunk = max(1, (1 << 20) // states.shape[0])
    for lo in range(0, E.shape[0], chunk):
        C = E[lo : lo + chunk] @ model.w.T + model.b
        logp = C @ states.T + pair[None, :]
        logp -= logp.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(logp), axis=1)
        for r in range(C.shape[0]):
            u = stream(seed, 1, lo + r).random() * cdf[r, -1]
            out[lo + r] = states[min(int(np.searchsorted(cdf[r], u, side="right")), states.shape[0] - 1)]
    return out


def _sample_gibbs(model: DdnModel, E: np.ndarray, seed: int) -> np.ndarray:
    # one long random-scan chain per instance, run side by side
    rng = stream(seed, 2)
    m, n = E.shape[0], model.n_labels
    v = model.v
    C = E @ model.w.T + model.b
    X = rng.integers(0, 2, size=(m, n)).astype(float)
    Z = C + X @ v.T
    for _ in range(SYNTH_GIBBS_SWEEPS):
        for i in rng.permutation(n):
            p = 1.0 / (1.0 + np.exp(-Z[:, i]))
            new = (rng.random(m) < p).astype(float)
            Z += (new - X[:, i])[:, None] * v[:, i][None, :]
            X[:, i] = new
        Z = C + X @ v.T
    return X.astype(np.int8)


def gen_synth(
    n_labels: int,
    n_features: int,
    n_instances: int,
    coupling_strength: float,
    seed: int,
) -> tuple[Dataset, DdnModel]:
    """Draw a generating model, standard-normal features and correlated labels.

    Labels are sampled exactly for up to 12 labels and from long Gibbs
    chains beyond that.
    """
    if not 1 <= n_labels <= MAX_SYNTH_LABELS:
        raise ValueError(f"n_labels must lie in [1, {MAX_SYNTH_LABELS}], got {n_labels}")
    if n_features < 1:
        raise ValueError("n_features must be positive")
    if n_instances < 0:
        raise ValueError("n_instances must be nonnegative")
    if not (math.isfinite(coupling_strength) and coupling_strength >= 0):
        raise ValueError("coupling_strength must be finite and nonnegative")
    model = synth_model(n_labels, n_features, coupling_strength, seed)
    E = stream(seed, 3).normal(size=(n_instances, n_features))
    if n_instances == 0:
        X = np.zeros((0, n_labels), dtype=np.int8)
    elif n_labels <= EXACT_SYNTH_LABELS:
        X = _sample_exact(model, E, seed)
    else:
        X = _sample_gibbs(model, E, seed)
    return Dataset([Instance(E[k], X[k]) for k in range(n_instances)]), model
