"""Brute-force references for small instances: exact MPE by enumeration and
the stationary distribution of random-scan Gibbs sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import DdnModel, score_many, sigmoid

MAX_BRUTE_FORCE_LABELS = 24
MAX_STATIONARY_LABELS = 12

_CHUNK = 1 << 16


class OracleSizeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def enumerate_states(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are assignments in lexicographic order; x_0 is the most significant bit."""
    stop = (1 << n) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def brute_force_mpe(model: DdnModel, features) -> tuple[np.ndarray, float]:
    """Score-maximal assignment over all 2^n states.

    Ties go to the lexicographically smallest assignment.
    """
    n = model.n_labels
    if n > MAX_BRUTE_FORCE_LABELS:
        raise OracleSizeError(f"brute force limited to {MAX_BRUTE_FORCE_LABELS} labels, got {n}")
    c = model.offsets(features)
    best_score = -np.inf
    best_idx = -1
    total = 1 << n
    for start in range(0, total, _CHUNK):
        xs = enumerate_states(n, start, min(total, start + _CHUNK))
        scores = score_many(c, model.v, xs)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score = float(scores[j])
            best_idx = start + j
    return enumerate_states(n, best_idx, best_idx + 1)[0], best_score


def all_scores(model: DdnModel, features) -> tuple[np.ndarray, np.ndarray]:
    n = model.n_labels
    if n > 16:
        raise OracleSizeError("all_scores is meant for n <= 16")
    xs = enumerate_states(n)
    return xs, score_many(model.offsets(features), model.v, xs)


@dataclass
class StationaryResult:
    states: np.ndarray          # (2^n, n) lexicographic
    distribution: np.ndarray    # (2^n,)
    marginals: np.ndarray       # (n,) P(x_i = 1)
    residual: float


def gibbs_transition_matrix(model: DdnModel, features) -> sp.csr_matrix:
    """Random-scan kernel: pick a label uniformly, resample it from its conditional."""
    n = model.n_labels
    states = enumerate_states(n)
    c = model.offsets(features)
    z = c[None, :] + states.astype(float) @ model.v.T
    p1 = sigmoid(z)
    m = states.shape[0]
    idx = np.arange(m)
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    for i in range(n):
        bit = 1 << (n - 1 - i)
        xi = states[:, i]
        p_same = np.where(xi == 1, p1[:, i], 1.0 - p1[:, i])
        diag += p_same / n
        rows.append(idx)
        cols.append(idx ^ bit)
        vals.append((1.0 - p_same) / n)
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )


def gibbs_stationary(
    model: DdnModel,
    features,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> StationaryResult:
    """Stationary distribution of the random-scan Gibbs chain.

    Solved directly as a sparse linear system, then polished by power
    iteration until the L1 residual ||pi P - pi|| is at most ``tol``.
    """
    n = model.n_labels
    if n > MAX_STATIONARY_LABELS:
        raise OracleSizeError(f"stationary oracle limited to {MAX_STATIONARY_LABELS} labels, got {n}")
    P = gibbs_transition_matrix(model, features)
    m = P.shape[0]
    A = (P.T - sp.identity(m, format="csr")).tolil()
    A[0, :] = np.ones(m)
    rhs = np.zeros(m)
    rhs[0] = 1.0
    pi = spla.spsolve(A.tocsc(), rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    PT = P.T.tocsr()
    residual = np.abs(PT @ pi - pi).sum()
    it = 0
    while residual > tol:
        if it >= max_iter:
            raise ConvergenceError(f"stationary residual {residual:.3e} after {it} iterations")
        pi = PT @ pi
        pi /= pi.sum()
        residual = np.abs(PT @ pi - pi).sum()
        it += 1
    states = enumerate_states(n)
    return StationaryResult(states, pi, pi @ states, float(residual))
