import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ddn.milp.program import encode
from ddn.milp.pwl import adaptive_pwl, grid_error
from ddn.model import DdnModel, compute_logits, flip_deltas, score, score_logprob
from ddn.oracle import brute_force_mpe, enumerate_states


@st.composite
def instances(draw, max_labels=6):
    n = draw(st.integers(1, max_labels))
    seed = draw(st.integers(0, 2**32 - 1))
    scale = draw(st.floats(0.0, 10.0))
    rng = np.random.default_rng(seed)
    v = rng.normal(0, scale, (n, n))
    np.fill_diagonal(v, 0)
    model = DdnModel(w=rng.normal(0, scale, (n, 2)), v=v, b=rng.normal(0, scale, n))
    return model, rng.normal(size=2), rng.integers(0, 2, n)


class TestScoreProperties:
    @given(instances())
    def test_two_score_forms_agree(self, case):
        m, e, x = case
        a, b = score(m, e, x), score_logprob(m, e, x)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))

    @given(instances())
    def test_score_is_nonpositive(self, case):
        m, e, x = case
        assert score(m, e, x) <= 0.0

    @given(instances())
    def test_flip_deltas_consistent(self, case):
        m, e, x = case
        z = compute_logits(m, e, x)
        d = flip_deltas(m.v, z, x.astype(float))
        k = int(np.argmax(np.abs(d)))
        y = x.copy()
        y[k] = 1 - y[k]
        assert abs(score(m, e, y) - score(m, e, x) - d[k]) <= 1e-9 * max(1.0, abs(d[k]))


class TestEncodingProperties:
    @settings(max_examples=40, deadline=None)
    @given(instances(max_labels=5))
    def test_program_objective_tracks_exact_score(self, case):
        m, e, _ = case
        p = encode(m, e)
        xs = enumerate_states(m.n_labels)
        exact = np.array([score(m, e, x) for x in xs])
        # the adaptive approximation never falls below softplus
        gap = exact - p.objective_batch(xs)
        assert np.all(gap >= -1e-9)
        assert np.all(gap <= m.n_labels * p.pwl.max_error + 1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 1.0), st.floats(-30, 0), st.floats(0.5, 30))
    def test_adaptive_tolerance(self, eps, lo, width):
        g = adaptive_pwl(eps, (lo, lo + width))
        assert grid_error(g, lo, lo + width, n_points=20001) <= eps + 1e-12


class TestOracleProperties:
    @given(instances())
    def test_oracle_dominates_every_state(self, case):
        m, e, _ = case
        x, s = brute_force_mpe(m, e)
        for y in enumerate_states(m.n_labels):
            assert score(m, e, y) <= s + 1e-12
