import numpy as np
import pytest

from conftest import random_model
from ddn.gibbs import GibbsConfig, gibbs_marginals, gibbs_mpe, run_chain
from ddn.model import DdnModel, compute_logits, sigmoid
from ddn.oracle import enumerate_states, gibbs_stationary
from ddn.rng import stream


def _independent(c):
    c = np.asarray(c, float)
    return DdnModel(w=np.zeros((c.size, 1)), v=np.zeros((c.size, c.size)), b=c)


class TestMarginals:
    def test_independent_model_exact(self, rng):
        m = random_model(rng, 6, v_scale=0.0)
        e = rng.normal(size=3)
        tr = run_chain(m, e, GibbsConfig(n_samples=5000, seed=3), keep_terms=True)
        target = sigmoid(m.b + m.w @ e)
        stderr = tr.terms.std(axis=0, ddof=1) / np.sqrt(tr.retained)
        err = np.abs(tr.marginals - target)
        assert err.max() < 0.02
        assert np.all(err <= 3 * stderr + 1e-12)

    def test_pair_model_matches_stationary(self, pair_model, pair_features):
        est = gibbs_marginals(pair_model, pair_features, GibbsConfig(n_samples=20000, burn_in=0, seed=11))
        ref = gibbs_stationary(pair_model, pair_features).marginals
        assert np.abs(est - ref).max() < 0.03

    def test_consistent_model_matches_stationary(self, rng):
        # symmetric v: permutation-scan and random-scan chains share the same law
        m = random_model(rng, 4, symmetric=True, v_scale=1.0)
        e = rng.normal(size=3)
        est = gibbs_marginals(m, e, GibbsConfig(n_samples=20000, seed=5))
        ref = gibbs_stationary(m, e).marginals
        assert np.abs(est - ref).max() < 0.02

    def test_single_sample_is_one_conditional(self, rng):
        m = random_model(rng, 3)
        e = rng.normal(size=3)
        tr = run_chain(m, e, GibbsConfig(n_samples=1, burn_in=0, seed=2), keep_terms=True)
        assert tr.retained == 1
        np.testing.assert_array_equal(tr.marginals, tr.terms[0])
        conds = [sigmoid(compute_logits(m, e, x)) for x in enumerate_states(3)]
        assert any(np.allclose(tr.marginals, c, atol=1e-12) for c in conds)

    def test_deterministic_and_in_open_interval(self, rng):
        m = random_model(rng, 5)
        e = rng.normal(size=3)
        cfg = GibbsConfig(n_samples=300, seed=9)
        a = gibbs_marginals(m, e, cfg)
        b = gibbs_marginals(m, e, cfg)
        np.testing.assert_array_equal(a, b)
        assert np.all((a > 0) & (a < 1))

    def test_default_burn_in(self):
        assert GibbsConfig(n_samples=1000).effective_burn_in == 100
        assert GibbsConfig(n_samples=1000, burn_in=0).effective_burn_in == 0

    def test_time_limit_stops_early(self, rng):
        m = random_model(rng, 10)
        tr = run_chain(m, rng.normal(size=3), GibbsConfig(n_samples=10**7, burn_in=0, time_limit_s=0.05))
        assert 1 <= tr.retained < 10**7

    def test_bad_config(self):
        with pytest.raises(ValueError):
            GibbsConfig(n_samples=0)
        with pytest.raises(ValueError):
            GibbsConfig(burn_in=-1)


class TestDecoding:
    def test_independent_thresholding(self):
        res = gibbs_mpe(_independent([0.5, -0.5]), [0.0], GibbsConfig(n_samples=200))
        np.testing.assert_array_equal(res.assignment, [1, 0])

    def test_pair_model_finds_mpe(self, pair_model, pair_features):
        res = gibbs_mpe(pair_model, pair_features, GibbsConfig(n_samples=2000, seed=1))
        np.testing.assert_array_equal(res.assignment, [1, 1])
        assert res.score == pytest.approx(-0.280, abs=5e-4)
        assert res.engine == "gibbs" and res.marginals is not None

    def test_ties_decode_to_one(self):
        res = gibbs_mpe(DdnModel.zeros(4, 1), [0.0], GibbsConfig(n_samples=10))
        np.testing.assert_array_equal(res.marginals, 0.5)
        np.testing.assert_array_equal(res.assignment, [1, 1, 1, 1])

    def test_explicit_stream(self, pair_model, pair_features):
        cfg = GibbsConfig(n_samples=50)
        a = gibbs_mpe(pair_model, pair_features, cfg, rng=stream(0, 4))
        b = gibbs_mpe(pair_model, pair_features, cfg, rng=stream(0, 4))
        np.testing.assert_array_equal(a.marginals, b.marginals)
