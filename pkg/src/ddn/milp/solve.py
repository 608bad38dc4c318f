"""Exact solvers for encoded MPE programs: enumeration and branch-and-bound."""

from __future__ import annotations

import heapq
import logging
import time
from typing import Callable

import numpy as np

from ..model import InferenceResult, score
from ..oracle import enumerate_states
from .program import MilpProgram
from .simplex import INFEASIBLE, OPTIMAL, TIME_LIMIT, solve_lp

log = logging.getLogger(__name__)

AUTO, ENUMERATE, BNB = "auto", "enumerate", "bnb"
ENUMERATION_BELOW = 16
MAX_ENUMERATION_LABELS = 20

_INT_TOL = 1e-6
_PRUNE_TOL = 1e-9
_CHUNK = 1 << 14


class InfeasibleProgramError(RuntimeError):
    """The root relaxation is infeasible; a valid encoding never is."""


def solve(
    program: MilpProgram,
    time_limit_s: float | None = 60.0,
    mode: str = AUTO,
    node_callback: Callable[[np.ndarray], None] | None = None,
) -> InferenceResult:
    n = program.n_labels
    if mode == AUTO:
        mode = ENUMERATE if n < ENUMERATION_BELOW and program.pwl is not None else BNB
    if mode == ENUMERATE:
        return _enumerate(program, time_limit_s)
    if mode == BNB:
        return _branch_and_bound(program, time_limit_s, node_callback)
    raise ValueError(f"unknown mode {mode!r}")


def _result(program, x, objective, optimal, start, fallback=False, **stats) -> InferenceResult:
    x = np.asarray(np.rint(x), dtype=np.int8)
    exact = score(program.model, program.features, x) if program.model is not None else float("nan")
    return InferenceResult(
        assignment=x,
        score=exact,
        engine="milp",
        elapsed_s=time.perf_counter() - start,
        optimal=optimal,
        objective=float(objective),
        fallback=fallback,
        stats=stats,
    )


def _enumerate(program: MilpProgram, time_limit_s) -> InferenceResult:
    start = time.perf_counter()
    n = program.n_labels
    if n > MAX_ENUMERATION_LABELS:
        raise ValueError(f"enumeration limited to {MAX_ENUMERATION_LABELS} labels, got {n}")
    total = 1 << n
    best_val, best_idx = -np.inf, 0
    done = 0
    for lo in range(0, total, _CHUNK):
        if time_limit_s is not None and done and time.perf_counter() - start > time_limit_s:
            break
        xs = enumerate_states(n, lo, min(total, lo + _CHUNK))
        vals = program.objective_batch(xs)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), lo + j
        done += xs.shape[0]
    x = enumerate_states(n, best_idx, best_idx + 1)[0]
    return _result(program, x, best_val, done == total, start, mode=ENUMERATE, evaluated=done)


def _polish(program: MilpProgram, x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Best-improvement single flips on the program objective, within node bounds."""
    x = x.copy()
    val = float(program.objective_batch(x[None, :])[0])
    free = np.flatnonzero(lo != hi)
    while free.size:
        cand = np.repeat(x[None, :], free.size, axis=0)
        cand[np.arange(free.size), free] = 1.0 - cand[np.arange(free.size), free]
        vals = program.objective_batch(cand)
        k = int(np.argmax(vals))
        if vals[k] <= val + _PRUNE_TOL:
            break
        x, val = cand[k], float(vals[k])
    return x, val


def _branch_and_bound(program: MilpProgram, time_limit_s, node_callback) -> InferenceResult:
    """Depth-first branch-and-bound on the LP relaxation.

    With encoder metadata, only the label variables are branched on and
    every node's rounded LP labels are completed into a feasible incumbent.
    Programs read from disk fall back to branching on any fractional binary.
    """
    start = time.perf_counter()
    c, A_ub, b_ub, A_eq, b_eq, lb0, ub0, binary = program.to_arrays()
    structured = program.pwl is not None and program.model is not None
    n = program.n_labels
    x_idx = np.array([program.index(f"x_{i}") for i in range(n)])
    branch_idx = x_idx if structured else np.flatnonzero(binary)

    best_val = -np.inf
    best_x: np.ndarray | None = None
    nodes = 0
    lp_iters = 0
    seq = 0
    # key: deeper first, then better parent bound, then insertion order
    heap: list = [(0, -np.inf, seq, lb0.copy(), ub0.copy())]
    timed_out = False

    def offer(x_vals: np.ndarray, value: float):
        nonlocal best_val, best_x
        if value > best_val + _PRUNE_TOL:
            best_val, best_x = value, x_vals.copy()

    deadline = None if time_limit_s is None else start + time_limit_s
    while heap:
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break
        neg_depth, neg_bound, _, lb, ub = heapq.heappop(heap)
        if -neg_bound <= best_val + _PRUNE_TOL and nodes:
            continue
        nodes += 1
        res = solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub, deadline=deadline)
        lp_iters += res.iterations
        if res.status == TIME_LIMIT:
            timed_out = True
            break
        if res.status == INFEASIBLE:
            if nodes == 1:
                raise InfeasibleProgramError("root LP relaxation is infeasible")
            continue
        if res.status != OPTIMAL:
            log.warning("node LP ended with status %s; node dropped", res.status)
            continue
        if node_callback is not None:
            node_callback(res.x)
        bound = res.objective

        if structured:
            x_round = np.rint(res.x[x_idx])
            offer(*_polish(program, x_round, lb[x_idx], ub[x_idx]))
            if np.all(lb[x_idx] == ub[x_idx]):
                continue
        else:
            vals = res.x[branch_idx]
            if np.all(np.abs(vals - np.rint(vals)) <= _INT_TOL):
                offer(res.x[x_idx], bound)
                continue

        if bound <= best_val + _PRUNE_TOL:
            continue

        vals = res.x[branch_idx]
        free = lb[branch_idx] != ub[branch_idx]
        frac = np.where(free, np.abs(vals - np.rint(vals)), -1.0)
        if frac.max() > _INT_TOL:
            k = int(np.argmax(frac))
        else:
            k = int(np.flatnonzero(free)[0])
        var = branch_idx[k]
        prefer_up = vals[k] >= 0.5
        for up in (prefer_up, not prefer_up):
            child_lb, child_ub = lb.copy(), ub.copy()
            if up:
                child_lb[var] = 1.0
            else:
                child_ub[var] = 0.0
            seq += 1
            heapq.heappush(heap, (neg_depth - 1, -bound, seq, child_lb, child_ub))

    fallback = best_x is None
    if fallback:
        best_x = np.zeros(n)
        best_val = float("nan")
    optimal = not timed_out and not fallback
    return _result(
        program,
        best_x,
        best_val,
        optimal,
        start,
        fallback=fallback,
        mode=BNB,
        nodes=nodes,
        lp_iterations=lp_iters,
        open_nodes=len(heap),
    )
