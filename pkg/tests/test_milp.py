import itertools
import re

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from conftest import random_model
from ddn.milp.lpfile import export_lp, format_lp, parse_lp, read_lp
from ddn.milp.program import EQ, GE, LE, Constraint, MilpProgram, Variable, encode, z_bounds
from ddn.milp.pwl import adaptive_pwl, paper_pwl
from ddn.milp.solve import InfeasibleProgramError, solve
from ddn.model import DdnModel, compute_logits, score
from ddn.oracle import brute_force_mpe, enumerate_states


def _direct_objective(model, e, x, pwl):
    z = compute_logits(model, e, x)
    return float(np.sum(x * z - pwl(z)))


def _scipy_optimum(program, fix=None, sense=1.0):
    """Optimum of the program by HiGHS, optionally with some variables fixed."""
    c, A_ub, b_ub, A_eq, b_eq, lb, ub, binary = program.to_arrays()
    lb, ub = lb.copy(), ub.copy()
    for name, val in (fix or {}).items():
        k = program.index(name)
        lb[k] = ub[k] = val
    cons = []
    if len(b_ub):
        cons.append(LinearConstraint(A_ub, -np.inf, b_ub))
    if len(b_eq):
        cons.append(LinearConstraint(A_eq, b_eq, b_eq))
    res = milp(-sense * c, constraints=cons, integrality=binary.astype(int), bounds=Bounds(lb, ub))
    assert res.status == 0
    return sense * -res.fun


class TestCensus:
    def test_dense_model(self, rng):
        n = 5
        m = random_model(rng, n)
        p = encode(m, rng.normal(size=3))
        S = p.pwl.n_segments
        cen = p.census()
        assert (cen["x"], cen["y"], cen["a"], cen["z"], cen["g"]) == (n, n * (n - 1) // 2, S * n, n, n)
        assert cen["binaries"] == n + n * (n - 1) // 2 + S * n
        assert cen["continuous"] == 2 * n

    def test_independent_model_has_no_products(self, rng):
        p = encode(random_model(rng, 4, v_scale=0.0), rng.normal(size=3))
        assert p.census()["y"] == 0

    def test_cancelling_pair_is_skipped(self):
        m = DdnModel(w=np.zeros((2, 1)), v=[[0.0, 1.5], [-1.5, 0.0]], b=[0.0, 0.0])
        assert encode(m, [0.0]).census()["y"] == 0

    def test_every_product_has_three_rows_and_selectors_sum_to_one(self, rng):
        p = encode(random_model(rng, 4), rng.normal(size=3))
        names = {c.name for c in p.constraints}
        for i, k in itertools.combinations(range(4), 2):
            assert {f"and_lo_{i}_{k}", f"and_hi1_{i}_{k}", f"and_hi2_{i}_{k}"} <= names
        for i in range(4):
            sel = next(c for c in p.constraints if c.name == f"sel_{i}")
            assert sel.sense == EQ and sel.rhs == 1.0 and len(sel.coefs) == p.pwl.n_segments

    def test_big_m_constants_finite(self, rng):
        p = encode(random_model(rng, 6, v_scale=4.0), rng.normal(size=3))
        for con in p.constraints:
            assert np.isfinite(con.rhs) and all(np.isfinite(list(con.coefs.values())))
        assert all(np.isfinite(v.lb) and np.isfinite(v.ub) for v in p.variables)

    def test_z_bounds(self):
        m = DdnModel(w=np.zeros((2, 1)), v=[[0.0, 2.0], [-3.0, 0.0]], b=[0.5, -0.5])
        np.testing.assert_array_equal(z_bounds(m, m.b), [[0.5, 2.5], [-3.5, -0.5]])


class TestSoundness:
    @pytest.mark.parametrize("use_fixed_table", [False, True])
    def test_completion_feasible_and_exact(self, rng, use_fixed_table):
        for n in (1, 2, 5, 8, 10):
            m = random_model(rng, n)
            e = rng.normal(size=3)
            p = encode(m, e, pwl=paper_pwl() if use_fixed_table else None)
            xs = enumerate_states(n)
            step = 1 if n <= 8 else 7  # every 7th state at n = 10 keeps the loop quick
            for x in xs[::step]:
                vals = p.completion(x)
                assert p.violations(vals, tol=1e-7) == []
                assert p.objective_value(vals) == pytest.approx(_direct_objective(m, e, x, p.pwl), abs=1e-7)
            np.testing.assert_allclose(
                p.objective_batch(xs), [_direct_objective(m, e, x, p.pwl) for x in xs], atol=1e-9
            )

    def test_completion_is_unique(self, rng):
        # with x fixed, the best and worst feasible objectives coincide
        m = random_model(rng, 3)
        e = rng.normal(size=3)
        p = encode(m, e, epsilon=0.05)
        for x in enumerate_states(3):
            fix = {f"x_{i}": float(x[i]) for i in range(3)}
            hi = _scipy_optimum(p, fix, sense=1.0)
            lo = _scipy_optimum(p, fix, sense=-1.0)
            assert hi == pytest.approx(lo, abs=1e-6)
            assert hi == pytest.approx(_direct_objective(m, e, x, p.pwl), abs=1e-6)

    def test_and_rows_force_product(self):
        m = DdnModel(w=np.zeros((2, 1)), v=[[0.0, 1.0], [1.0, 0.0]], b=[0.0, 0.0])
        p = encode(m, [0.0])
        rows = [c for c in p.constraints if c.name.startswith("and_")]
        assert len(rows) == 3
        for xi, xk in itertools.product([0, 1], repeat=2):
            feasible = []
            for y in (0, 1):
                vals = {"x_0": xi, "x_1": xk, "y_0_1": y}
                lhs = [sum(coef * vals[k] for k, coef in r.coefs.items()) for r in rows]
                if all(v <= r.rhs for v, r in zip(lhs, rows)):
                    feasible.append(y)
            assert feasible == [xi * xk]

    def test_approximation_gap_bound(self, rng):
        for _ in range(15):
            n = int(rng.integers(2, 8))
            m = random_model(rng, n)
            e = rng.normal(size=3)
            for pwl in (None, paper_pwl()):
                p = encode(m, e, pwl=pwl)
                res = solve(p)
                exact = brute_force_mpe(m, e)[1]
                assert abs(res.objective - exact) <= n * p.pwl.max_error + 1e-9

    def test_big_m_rows_hold_at_every_node(self, rng):
        for k in range(3):
            m = random_model(rng, 5)
            p = encode(m, rng.normal(size=3))
            seen = []

            def check(values):
                seen.append(1)
                for con in p.constraints:
                    if not con.name.startswith(("seglo", "seghi", "gup", "gdn")):
                        continue
                    a = next(name for name in con.coefs if name.startswith("a_"))
                    val = values[p.index(a)]
                    if min(val, 1 - val) > 1e-9:
                        continue  # only integral selectors are checked
                    lhs = sum(c * values[p.index(name)] for name, c in con.coefs.items())
                    slack = con.rhs - lhs if con.sense == LE else lhs - con.rhs
                    assert slack >= -1e-6, con.name

            solve(p, mode="bnb", node_callback=check)
            assert seen


class TestSolve:
    def test_pair_model(self, pair_model, pair_features):
        for mode in ("auto", "enumerate", "bnb"):
            res = solve(encode(pair_model, pair_features), mode=mode)
            np.testing.assert_array_equal(res.assignment, [1, 1])
            assert res.optimal is True
            assert res.score == pytest.approx(score(pair_model, pair_features, [1, 1]))
            assert abs(res.objective - (-0.280)) <= 2 * 2 * 1e-3 + 5e-4

    def test_separable(self):
        m = DdnModel(w=np.zeros((3, 1)), v=np.zeros((3, 3)), b=[0.5, -0.5, 3.0])
        for mode in ("enumerate", "bnb"):
            np.testing.assert_array_equal(solve(encode(m, [0.0]), mode=mode).assignment, [1, 0, 1])

    def test_fixed_table_pair_model(self, pair_model, pair_features):
        res = solve(encode(pair_model, pair_features, pwl=paper_pwl()), mode="bnb")
        np.testing.assert_array_equal(res.assignment, [1, 1])

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_bnb_matches_enumeration(self, rng, n):
        for _ in range(3):
            m = random_model(rng, n)
            p = encode(m, rng.normal(size=3))
            a = solve(p, mode="bnb", time_limit_s=None)
            b = solve(p, mode="enumerate")
            assert a.optimal and b.optimal
            assert a.objective == pytest.approx(b.objective, abs=1e-6)

    @pytest.mark.slow
    def test_bnb_matches_enumeration_at_twelve_labels(self, rng):
        m = random_model(rng, 12)
        p = encode(m, rng.normal(size=3), epsilon=0.01)
        a = solve(p, mode="bnb", time_limit_s=None)
        b = solve(p, mode="enumerate")
        assert a.optimal
        assert a.objective == pytest.approx(b.objective, abs=1e-6)

    def test_time_limit_without_incumbent_falls_back(self, rng):
        p = encode(random_model(rng, 6), rng.normal(size=3))
        res = solve(p, mode="bnb", time_limit_s=1e-9)
        assert res.fallback and res.optimal is False
        np.testing.assert_array_equal(res.assignment, np.zeros(6))

    def test_infeasible_root(self):
        prog = MilpProgram(
            [Variable("x_0", 0.0, 1.0, True)],
            [Constraint("c", {"x_0": 1.0}, GE, 2.0)],
            {"x_0": 1.0},
        )
        with pytest.raises(InfeasibleProgramError):
            solve(prog, mode="bnb")

    def test_unknown_mode(self, pair_model, pair_features):
        with pytest.raises(ValueError):
            solve(encode(pair_model, pair_features), mode="simplex")

    def test_matches_external_solver(self, rng):
        for _ in range(5):
            m = random_model(rng, 5)
            p = encode(m, rng.normal(size=3))
            assert solve(p).objective == pytest.approx(_scipy_optimum(p), abs=1e-6)


class TestLpFile:
    def test_single_label_file(self, tmp_path):
        m = DdnModel(w=[[0.5]], v=[[0.0]], b=[0.1])
        p = encode(m, [1.0])
        export_lp(p, tmp_path / "one.lp")
        text = (tmp_path / "one.lp").read_text()
        sections = re.split(r"^(Maximize|Subject To|Bounds|Binaries|End)$", text, flags=re.M)
        binaries = sections[sections.index("Binaries") + 1].split()
        S = p.pwl.n_segments
        assert binaries.count("x_0") == 1
        assert sorted(binaries) == sorted(["x_0"] + [f"a_{j}_0" for j in range(S)])
        bounds = sections[sections.index("Bounds") + 1]
        assert "z_0" in bounds and "g_0" in bounds and "z_0" not in binaries

    def test_round_trip(self, rng, tmp_path):
        for pwl in (None, paper_pwl()):
            p = encode(random_model(rng, 4), rng.normal(size=3), pwl=pwl)
            export_lp(p, tmp_path / "p.lp")
            q = read_lp(tmp_path / "p.lp")
            assert [(v.name, v.lb, v.ub, v.binary) for v in p.variables] == [
                (v.name, v.lb, v.ub, v.binary) for v in q.variables
            ]
            key = lambda prog: {c.name: (c.coefs, c.sense, c.rhs) for c in prog.constraints}
            assert key(p) == key(q)
            assert p.objective == q.objective

    def test_objective_coefficients_precise(self, rng):
        m = random_model(rng, 3)
        e = rng.normal(size=3)
        p = encode(m, e)
        obj = format_lp(p).split("Subject To")[0]
        c = m.b + m.w @ e
        for i in range(3):
            coef = float(re.search(rf"([+-]) (\S+) x_{i}\b", obj).group(2))
            sign = -1.0 if re.search(rf"([+-]) \S+ x_{i}\b", obj).group(1) == "-" else 1.0
            assert sign * coef == pytest.approx(c[i], rel=1e-12)

    def test_read_program_solves_to_same_optimum(self, rng, tmp_path):
        m = random_model(rng, 4)
        p = encode(m, rng.normal(size=3))
        export_lp(p, tmp_path / "p.lp")
        q = read_lp(tmp_path / "p.lp")
        a = solve(q, mode="bnb")
        b = solve(p, mode="enumerate")
        assert a.objective == pytest.approx(b.objective, abs=1e-6)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_reader_handles_common_variants(self):
        text = """\\ comment
Minimize
 cost: 2 x + 3.5e-1 y
Subject To
 c1: x + y >= 1
 c2: x - y <= 0.5
Bounds
 x <= 4
 -2 <= y <= 3
Binaries
End
"""
        q = parse_lp(text)
        assert q.objective == {"x": -2.0, "y": -0.35}
        assert [(v.name, v.lb, v.ub) for v in q.variables] == [("x", 0.0, 4.0), ("y", -2.0, 3.0)]
        assert q.constraints[0].sense == GE and q.constraints[1].coefs == {"x": 1.0, "y": -1.0}
