"""Random-walk and greedy stochastic local search over label assignments.

Both walks track logits incrementally and return the best assignment seen.
Restart r draws from its own stream ``(seed, stream_key..., r)``, so any
single restart can be replayed on its own.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import (
    RECOMPUTE_EVERY,
    DdnModel,
    InferenceResult,
    apply_flip,
    check_features,
    flip_deltas,
    score,
    score_from_logits,
)
from .rng import stream


@dataclass
class LocalSearchConfig:
    max_flips: int = 1000  # per restart
    noise_p: float = 0.3
    restarts: int = 0      # extra runs after the first
    seed: int = 0
    time_limit_s: float | None = None

    def __post_init__(self):
        if self.max_flips < 0:
            raise ValueError("max_flips must be nonnegative")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in [0, 1]")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.time_limit_s is not None and not self.time_limit_s > 0:
            raise ValueError("time_limit_s must be positive")


@dataclass
class _Incumbent:
    x: np.ndarray | None = None
    score: float = -np.inf
    trace: list[float] = field(default_factory=list)

    def offer(self, x: np.ndarray, s: float) -> None:
        # max by score, then lexicographically smaller assignment
        if self.x is None or s > self.score or (s == self.score and tuple(x) < tuple(self.x)):
            self.x = x.astype(np.int8)
            self.score = s
        self.trace.append(self.score)


class _Walker:
    def __init__(self, model: DdnModel, c: np.ndarray, x: np.ndarray):
        self.v = model.v
        self.c = c
        self.x = x.astype(float)
        self.z = c + self.v @ self.x
        self.score = score_from_logits(self.z, self.x)
        self.flips = 0

    def flip(self, i: int, delta: float) -> None:
        apply_flip(self.v, self.z, self.x, i)
        self.score += delta
        self.flips += 1
        if self.flips % RECOMPUTE_EVERY == 0:
            self.z = self.c + self.v @ self.x
            self.score = score_from_logits(self.z, self.x)

    def single_delta(self, i: int) -> float:
        v, z, x = self.v, self.z, self.x
        d = 1.0 - 2.0 * x[i]
        shift = d * v[:, i]
        new = z + shift
        sp = np.logaddexp(0.0, new) - np.logaddexp(0.0, z)
        return float(d * z[i] + shift @ x - sp.sum())


def _search(model, features, config: LocalSearchConfig, greedy: bool, stream_key) -> InferenceResult:
    start = time.perf_counter()
    e = check_features(model, features)
    c = model.b + model.w @ e
    n = model.n_labels
    deadline = None if config.time_limit_s is None else start + config.time_limit_s
    best = _Incumbent()
    total_flips = 0
    runs = 0
    timed_out = False
    for r in range(config.restarts + 1):
        if r and deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break
        rng = stream(config.seed, *stream_key, r)
        walker = _Walker(model, c, rng.integers(0, 2, size=n))
        best.offer(walker.x, walker.score)
        runs += 1
        for step in range(config.max_flips):
            if deadline is not None and step % 32 == 0 and time.perf_counter() > deadline:
                timed_out = True
                break
            if greedy and rng.random() >= config.noise_p:
                deltas = flip_deltas(model.v, walker.z, walker.x)
                i = int(np.argmax(deltas))  # first maximum, i.e. lowest index
                if config.noise_p == 0.0 and deltas[i] <= 0.0:
                    break  # local optimum, go to the next restart
                walker.flip(i, float(deltas[i]))
            else:
                i = int(rng.integers(n))
                walker.flip(i, walker.single_delta(i))
            best.offer(walker.x, walker.score)
        total_flips += walker.flips
        if timed_out:
            break

    exact = score(model, e, best.x)
    return InferenceResult(
        assignment=best.x,
        score=exact,
        engine="greedy" if greedy else "rw",
        elapsed_s=time.perf_counter() - start,
        optimal=None,
        stats={
            "runs": runs,
            "flips": total_flips,
            "tracked_score": best.score,
            "trace": best.trace,
            "timed_out": timed_out,
        },
    )


def random_walk_mpe(model: DdnModel, features, config: LocalSearchConfig, stream_key=()) -> InferenceResult:
    """Flip a uniformly random label each step; return the best assignment seen."""
    return _search(model, features, config, greedy=False, stream_key=tuple(stream_key))


def greedy_mpe(model: DdnModel, features, config: LocalSearchConfig, stream_key=()) -> InferenceResult:
    """With probability noise_p flip a random label, otherwise the best single flip."""
    return _search(model, features, config, greedy=True, stream_key=tuple(stream_key))
