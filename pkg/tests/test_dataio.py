import json
import math

import numpy as np
import pytest

from ddn.dataio import DataError, Dataset, _sample_exact, _sample_gibbs, gen_synth, load_dataset, save_dataset
from ddn.model import Instance
from ddn.oracle import brute_force_mpe
from ddn.trainer import TrainConfig, train


def _write(tmp_path, lines):
    path = tmp_path / "d.jsonl"
    path.write_text("".join(line + "\n" for line in lines))
    return path


class TestLoad:
    def test_empty_file(self, tmp_path):
        data = load_dataset(_write(tmp_path, []))
        assert len(data) == 0
        with pytest.raises(DataError):
            data.n_features

    def test_header_and_optional_labels(self, tmp_path):
        path = _write(
            tmp_path,
            ['{"schema": "ddn-dataset-v1"}', '{"features": [1.0, 2.0], "labels": [0, 1]}', '{"features": [3, 4]}'],
        )
        data = load_dataset(path)
        assert len(data) == 2 and data.n_features == 2 and data.n_labels == 2
        assert data[1].labels is None and not data.labelled

    def test_ragged_labels_name_line(self, tmp_path):
        path = _write(tmp_path, ['{"features": [1.0], "labels": [0, 1]}', '{"features": [1.0], "labels": [1]}'])
        with pytest.raises(DataError, match=r"d\.jsonl:2"):
            load_dataset(path)

    def test_ragged_features(self, tmp_path):
        path = _write(tmp_path, ['{"features": [1.0]}', '{"features": [1.0, 2.0]}'])
        with pytest.raises(DataError, match=":2"):
            load_dataset(path)

    def test_malformed_json_names_line(self, tmp_path):
        path = _write(tmp_path, ['{"features": [1.0]}', "", '{"features": [1.0'])
        with pytest.raises(DataError, match=":3: malformed JSON"):
            load_dataset(path)

    @pytest.mark.parametrize("labels", ["[0, 2]", "[0.5, 1]", "[true, false]", '"01"'])
    def test_rejects_non_binary_labels(self, tmp_path, labels):
        path = _write(tmp_path, [f'{{"features": [1.0], "labels": {labels}}}'])
        with pytest.raises(DataError):
            load_dataset(path)

    def test_rejects_non_finite_features(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(_write(tmp_path, ['{"features": [NaN]}']))

    def test_unknown_schema(self, tmp_path):
        with pytest.raises(DataError, match="schema"):
            load_dataset(_write(tmp_path, ['{"schema": "other"}']))


class TestRoundTrip:
    def test_bit_exact(self, rng, tmp_path):
        feats = rng.normal(size=(20, 4)) * 10.0 ** rng.integers(-300, 300, size=(20, 4))
        data = Dataset([Instance(feats[k], rng.integers(0, 2, 3)) for k in range(20)])
        data.instances.append(Instance([math.pi, -0.0, 5e-324, 1.7976931348623157e308]))
        save_dataset(data, tmp_path / "out.jsonl")
        back = load_dataset(tmp_path / "out.jsonl")
        assert len(back) == len(data)
        for a, b in zip(data, back):
            assert a.features.tobytes() == b.features.tobytes()
            assert (a.labels is None and b.labels is None) or np.array_equal(a.labels, b.labels)
        first = (tmp_path / "out.jsonl").read_text().splitlines()[0]
        assert json.loads(first) == {"schema": "ddn-dataset-v1"}


class TestGenSynth:
    def test_deterministic(self):
        a, ma = gen_synth(4, 3, 50, 2.0, seed=9)
        b, mb = gen_synth(4, 3, 50, 2.0, seed=9)
        np.testing.assert_array_equal(a.features(), b.features())
        np.testing.assert_array_equal(a.labels(), b.labels())
        np.testing.assert_array_equal(ma.v, mb.v)

    def test_symmetric_couplings(self):
        _, m = gen_synth(6, 2, 1, 3.0, seed=1)
        np.testing.assert_array_equal(m.v, m.v.T)
        assert np.all(np.diag(m.v) == 0)

    def test_zero_coupling_independent_given_features(self):
        data, m = gen_synth(3, 2, 5000, 0.0, seed=2)
        assert np.all(m.v == 0)
        E, X = data.features(), data.labels().astype(float)
        P = 1 / (1 + np.exp(-(E @ m.w.T + m.b)))
        R = X - P
        corr = np.corrcoef(R.T)[np.triu_indices(3, 1)]
        # residual correlations are pure noise, roughly N(0, 1/5000)
        assert np.all(np.abs(corr) < 4 / math.sqrt(5000))

    def test_coupling_raises_co_occurrence(self):
        data, m = gen_synth(4, 2, 5000, 3.0, seed=3)
        i, k = np.unravel_index(np.argmax(m.v), m.v.shape)
        X = data.labels().astype(float)
        both = X[:, i] * X[:, k]
        pi, pk = X[:, i].mean(), X[:, k].mean()
        # one-sided z-test of P(both) against the independence null pi * pk
        null = pi * pk
        z = (both.mean() - null) / math.sqrt(null * (1 - null) / len(X))
        assert z > 2.33

    def test_gibbs_path_for_larger_label_sets(self):
        data, m = gen_synth(14, 2, 300, 1.0, seed=4)
        X = data.labels()
        assert X.shape == (300, 14)
        assert 0.2 < X.mean() < 0.8

    def test_gibbs_path_matches_exact_sampler(self):
        _, m = gen_synth(5, 2, 0, 2.0, seed=5)
        E = np.tile([[0.3, -0.8]], (20000, 1))
        exact = _sample_exact(m, E, seed=1).mean(axis=0)
        chains = _sample_gibbs(m, E, seed=1).mean(axis=0)
        # two independent estimates of the same marginals, each with stderr <= 0.0036
        assert np.abs(exact - chains).max() < 0.02

    def test_caps(self):
        with pytest.raises(ValueError):
            gen_synth(21, 2, 10, 1.0, seed=0)
        with pytest.raises(ValueError):
            gen_synth(3, 2, 10, -1.0, seed=0)

    def test_retrained_model_agrees_with_generator(self):
        data, gen = gen_synth(6, 5, 5500, 3.0, seed=6)
        train_set, held_out = data[:5000], data[5000:]
        learned = train(train_set, TrainConfig(epochs=50)).model
        agree = np.mean(
            [
                np.array_equal(brute_force_mpe(learned, inst.features)[0], brute_force_mpe(gen, inst.features)[0])
                for inst in held_out
            ]
        )
        assert agree >= 0.80
