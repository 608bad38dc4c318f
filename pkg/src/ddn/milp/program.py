"""MILP encoding of DDN MPE inference.

With the evidence fixed, z_i = c_i + sum_k v_ik x_k is affine in the labels,
so the score sum_i [x_i z_i - softplus(z_i)] becomes

    sum_i c_i x_i + sum_{i<k} (v_ik + v_ki) x_i x_k - sum_i g(z_i)

once softplus is replaced by a piecewise-linear g.  Binary products become
AND variables y_i_k, and the segment of g in force for label i is picked by
one-hot selectors a_j_i tied to z_i and g_i with big-M rows whose constants
come from the per-label bounds on z_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import DdnModel, check_features
from .pwl import DEFAULT_EPSILON, PiecewiseApprox, adaptive_pwl

LE, GE, EQ = "<=", ">=", "="

# Padding added around the tightest z interval before building an adaptive g.
RANGE_PADDING = 1.0


class EncodingError(ValueError):
    pass


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    binary: bool


@dataclass
class Constraint:
    name: str
    coefs: dict[str, float]
    sense: str
    rhs: float


@dataclass
class MilpProgram:
    """A maximization MILP.

    ``variables``, ``constraints`` and ``objective`` are the whole program as
    a solver or LP file sees it.  The remaining fields describe how it was
    built from a model; they are ``None`` for programs parsed back from disk.
    """

    variables: list[Variable]
    constraints: list[Constraint]
    objective: dict[str, float]
    model: DdnModel | None = None
    features: np.ndarray | None = None
    offsets: np.ndarray | None = None
    pwl: PiecewiseApprox | None = None
    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    z_bounds: np.ndarray | None = None
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {v.name: k for k, v in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise EncodingError("duplicate variable names")

    @property
    def n_labels(self) -> int:
        return sum(1 for v in self.variables if v.name.startswith("x_"))

    def index(self, name: str) -> int:
        return self._index[name]

    def census(self) -> dict[str, int]:
        kinds = {"x": 0, "y": 0, "a": 0, "z": 0, "g": 0}
        for v in self.variables:
            kinds[v.name.split("_", 1)[0]] += 1
        return {
            **kinds,
            "binaries": sum(v.binary for v in self.variables),
            "continuous": sum(not v.binary for v in self.variables),
            "constraints": len(self.constraints),
        }

    def to_arrays(self):
        """Dense (c, A_ub, b_ub, A_eq, b_eq, lb, ub, binary) in variable order.

        ``>=`` rows are negated into ``<=`` form.
        """
        nv = len(self.variables)
        c = np.zeros(nv)
        for name, coef in self.objective.items():
            c[self._index[name]] += coef
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for con in self.constraints:
            row = np.zeros(nv)
            for name, coef in con.coefs.items():
                row[self._index[name]] += coef
            if con.sense == EQ:
                eq_rows.append(row)
                eq_rhs.append(con.rhs)
            elif con.sense == LE:
                ub_rows.append(row)
                ub_rhs.append(con.rhs)
            else:
                ub_rows.append(-row)
                ub_rhs.append(-con.rhs)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        binary = np.array([v.binary for v in self.variables])
        return (
            c,
            np.array(ub_rows).reshape(-1, nv),
            np.array(ub_rhs),
            np.array(eq_rows).reshape(-1, nv),
            np.array(eq_rhs),
            lb,
            ub,
            binary,
        )

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(coef * values[self._index[name]] for name, coef in self.objective.items()))

    def violations(self, values: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of bounds, integrality and rows violated by more than ``tol``."""
        bad = []
        for k, var in enumerate(self.variables):
            val = values[k]
            if val < var.lb - tol or val > var.ub + tol:
                bad.append(f"bound:{var.name}")
            if var.binary and min(abs(val), abs(val - 1.0)) > tol:
                bad.append(f"integrality:{var.name}")
        for con in self.constraints:
            lhs = sum(coef * values[self._index[name]] for name, coef in con.coefs.items())
            if (
                (con.sense == LE and lhs > con.rhs + tol)
                or (con.sense == GE and lhs < con.rhs - tol)
                or (con.sense == EQ and abs(lhs - con.rhs) > tol)
            ):
                bad.append(con.name)
        return bad

    # built-program helpers

    def _require_structure(self):
        if self.offsets is None or self.pwl is None or self.model is None:
            raise EncodingError("program has no encoder metadata (was it read from a file?)")

    def completion(self, x) -> np.ndarray:
        """The feasible point induced by a label assignment.

        A z_i sitting exactly on a breakpoint takes the segment to its right,
        matching the half-open intervals of the approximation.
        """
        self._require_structure()
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        z = self.offsets + self.model.v @ x
        seg = self.pwl.segment_index(z)
        g = self.pwl.slopes[seg] * z + self.pwl.intercepts[seg]
        values = np.zeros(len(self.variables))
        for i in range(n):
            values[self._index[f"x_{i}"]] = x[i]
            values[self._index[f"z_{i}"]] = z[i]
            values[self._index[f"g_{i}"]] = g[i]
            values[self._index[f"a_{seg[i]}_{i}"]] = 1.0
        for i, k, _ in self.pairs:
            values[self._index[f"y_{i}_{k}"]] = x[i] * x[k]
        return values

    def objective_batch(self, xs: np.ndarray) -> np.ndarray:
        """Program objective at the completion of each row of ``xs``."""
        self._require_structure()
        xs = np.asarray(xs, dtype=float)
        z = self.offsets[None, :] + xs @ self.model.v.T
        val = xs @ self.offsets - self.pwl(z).sum(axis=1)
        for i, k, coef in self.pairs:
            val += coef * xs[:, i] * xs[:, k]
        return val


def z_bounds(model: DdnModel, offsets: np.ndarray) -> np.ndarray:
    """(n, 2) array of [min, max] of z_i over all assignments."""
    v = model.v
    lo = offsets + np.minimum(v, 0.0).sum(axis=1)
    hi = offsets + np.maximum(v, 0.0).sum(axis=1)
    return np.column_stack([lo, hi])


def is_convex_continuous(pwl: PiecewiseApprox, tol: float = 1e-12) -> bool:
    """True when g equals the pointwise max of its pieces."""
    return bool(np.all(np.diff(pwl.slopes) >= 0) and np.all(np.abs(pwl.jumps()) <= tol))


def default_pwl(bounds: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> PiecewiseApprox:
    lo = float(bounds[:, 0].min()) - RANGE_PADDING
    hi = float(bounds[:, 1].max()) + RANGE_PADDING
    return adaptive_pwl(epsilon, (lo, hi))


def encode(
    model: DdnModel,
    features,
    pwl: PiecewiseApprox | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> MilpProgram:
    """Build the MILP whose optimum over x is max_x sum_i [x_i z_i - g(z_i)].

    Without an explicit ``pwl``, an adaptive chord approximation with error
    ``epsilon`` is built over this instance's z range.
    """
    e = check_features(model, features)
    c = model.b + model.w @ e
    n = model.n_labels
    v = model.v
    bounds = z_bounds(model, c)
    if not np.all(np.isfinite(bounds)):
        raise EncodingError("z bounds are not finite")
    if pwl is None:
        pwl = default_pwl(bounds, epsilon)
    S = pwl.n_segments
    hull_rows = is_convex_continuous(pwl)

    variables: list[Variable] = []
    constraints: list[Constraint] = []
    objective: dict[str, float] = {}

    for i in range(n):
        variables.append(Variable(f"x_{i}", 0.0, 1.0, True))
        objective[f"x_{i}"] = float(c[i])

    pairs = []
    for i in range(n):
        for k in range(i + 1, n):
            coef = float(v[i, k] + v[k, i])
            if coef == 0.0:
                continue
            pairs.append((i, k, coef))
            y = f"y_{i}_{k}"
            variables.append(Variable(y, 0.0, 1.0, True))
            objective[y] = coef
            constraints.append(Constraint(f"and_lo_{i}_{k}", {f"x_{i}": 1.0, f"x_{k}": 1.0, y: -1.0}, LE, 1.0))
            constraints.append(Constraint(f"and_hi1_{i}_{k}", {y: 1.0, f"x_{i}": -1.0}, LE, 0.0))
            constraints.append(Constraint(f"and_hi2_{i}_{k}", {y: 1.0, f"x_{k}": -1.0}, LE, 0.0))

    reachable = np.zeros((n, S), dtype=bool)
    for i in range(n):
        for j in range(S):
            seg_lo, seg_hi = pwl.segment_bounds(j)
            # segments that z_i can never reach are pinned to zero
            reachable[i, j] = seg_lo <= bounds[i, 1] and seg_hi >= bounds[i, 0]
            variables.append(Variable(f"a_{j}_{i}", 0.0, 1.0 if reachable[i, j] else 0.0, True))

    for i in range(n):
        zlo, zhi = bounds[i]
        glo, ghi = pwl.range_on(zlo, zhi)
        zi, gi = f"z_{i}", f"g_{i}"
        variables.append(Variable(zi, float(zlo), float(zhi), False))
        variables.append(Variable(gi, glo, ghi, False))
        objective[gi] = -1.0

        zdef = {zi: 1.0}
        for k in range(n):
            if k != i and v[i, k] != 0.0:
                zdef[f"x_{k}"] = -float(v[i, k])
        constraints.append(Constraint(f"zdef_{i}", zdef, EQ, float(c[i])))

        constraints.append(Constraint(f"sel_{i}", {f"a_{j}_{i}": 1.0 for j in range(S)}, EQ, 1.0))

        for j in range(S):
            s, t = float(pwl.slopes[j]), float(pwl.intercepts[j])
            if hull_rows and reachable[i, j]:
                # valid for every feasible point since g is the max of its pieces
                constraints.append(Constraint(f"hull_{j}_{i}", {gi: 1.0, zi: -s}, GE, t))
            if not reachable[i, j]:
                continue
            a = f"a_{j}_{i}"
            seg_lo, seg_hi = pwl.segment_bounds(j)
            if seg_lo > zlo:
                # a = 1  =>  z >= seg_lo
                constraints.append(Constraint(f"seglo_{j}_{i}", {zi: 1.0, a: -(seg_lo - zlo)}, GE, float(zlo)))
            if seg_hi < zhi:
                # a = 1  =>  z <= seg_hi
                constraints.append(Constraint(f"seghi_{j}_{i}", {zi: 1.0, a: zhi - seg_hi}, LE, float(zhi)))
            line_lo = min(s * zlo, s * zhi) + t
            line_hi = max(s * zlo, s * zhi) + t
            m_up = max(0.0, ghi - line_lo)
            m_dn = max(0.0, line_hi - glo)
            # a = 1  =>  g = s z + t
            constraints.append(Constraint(f"gup_{j}_{i}", {gi: 1.0, zi: -s, a: m_up}, LE, t + m_up))
            constraints.append(Constraint(f"gdn_{j}_{i}", {gi: 1.0, zi: -s, a: -m_dn}, GE, t - m_dn))

    return MilpProgram(
        variables,
        constraints,
        objective,
        model=model,
        features=e,
        offsets=c,
        pwl=pwl,
        pairs=pairs,
        z_bounds=bounds,
    )
