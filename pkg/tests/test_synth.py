import numpy as np
import pytest

from mvlstm.errors import ConfigError, UnstableSpecError
from mvlstm.granger import granger_rank, ols
from mvlstm.synth import (
    ArxSpec,
    ExoProcess,
    TanhTerm,
    generate,
    ground_truth_rank,
    ground_truth_scores,
    spectral_radius,
)

BENCHMARK = dict(coefficients=[[0.9], [0.0], [0.3]], self_lags=[0.5], noise_std=0.3)


class TestGenerate:
    def test_zero_spec_gives_zero_target(self):
        frame = generate(ArxSpec([[0.0], [0.0]], noise_std=0.0, length=300, seed=1))
        assert not np.any(frame.values[:, -1])
        assert np.std(frame.values[:, 0]) > 0.5

    def test_geometric_decay(self):
        spec = ArxSpec([[0.0]], self_lags=[0.5], noise_std=0.0, length=100, y_init=1.0)
        y = generate(spec).values[:, -1]
        assert y[0] == pytest.approx(0.5 ** 10, rel=1e-12)
        assert np.all(np.abs(y) <= 0.5 ** 10)

    def test_ols_recovers_coefficients(self):
        spec = ArxSpec(**BENCHMARK, length=2000, seed=3)
        v = generate(spec).values
        X = np.column_stack([np.ones(len(v) - 1), v[:-1, -1], v[:-1, :3]])
        y = v[1:, -1]
        beta, rss = ols(X, y)
        s2 = rss / (len(y) - X.shape[1])
        se = np.sqrt(s2 * np.diag(np.linalg.inv(X.T @ X)))
        truth = np.array([0.0, 0.5, 0.9, 0.0, 0.3])
        assert np.all(np.abs(beta - truth) <= 3 * se)

    def test_seeded_determinism(self):
        spec = ArxSpec(**BENCHMARK, length=500, seed=9)
        assert generate(spec).values.tobytes() == generate(spec).values.tobytes()
        other = ArxSpec(**BENCHMARK, length=500, seed=10)
        assert generate(spec).values.tobytes() != generate(other).values.tobytes()

    def test_zero_coefficient_variable_uncorrelated(self):
        L = 2000
        for seed in range(5):
            v = generate(ArxSpec(**BENCHMARK, length=L, seed=seed)).values
            x2 = (v[:, 1] - v[:, 1].mean()) / v[:, 1].std()
            y = (v[:, 3] - v[:, 3].mean()) / v[:, 3].std()
            for lag in range(-20, 21):
                a, b = (x2[:L - lag], y[lag:]) if lag >= 0 else (x2[-lag:], y[:L + lag])
                assert abs(np.mean(a * b)) <= 4 / np.sqrt(L)

    def test_ar1_marginal_std(self):
        spec = ArxSpec([[0.0]], exogenous=[ExoProcess("ar1", rho=0.7, std=2.0)],
                       length=50000, seed=2)
        x = generate(spec).values[:, 0]
        assert x.std() == pytest.approx(2.0, rel=0.05)
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert r1 == pytest.approx(0.7, abs=0.02)

    def test_tanh_term_enters_target(self):
        spec = ArxSpec([[0.0]], noise_std=0.0, length=200,
                       tanh_terms=[TanhTerm(var=1, lag=2, coef=1.5, gain=2.0)])
        v = generate(spec).values
        np.testing.assert_allclose(v[2:, 1], 1.5 * np.tanh(2.0 * v[:-2, 0]), atol=1e-15)


class TestValidation:
    def test_unstable_reports_root(self):
        with pytest.raises(UnstableSpecError) as info:
            ArxSpec([[0.1]], self_lags=[1.2])
        assert info.value.root_magnitude == pytest.approx(1.2)

    def test_unstable_second_order(self):
        # y_t = 0.5 y_{t-1} + 0.6 y_{t-2}: root magnitude above 1
        assert spectral_radius([0.5, 0.6]) > 1
        with pytest.raises(UnstableSpecError):
            ArxSpec([[0.1]], self_lags=[0.5, 0.6])

    def test_stable_second_order(self):
        assert spectral_radius([0.5, 0.3]) < 1
        ArxSpec([[0.1]], self_lags=[0.5, 0.3])

    def test_length_too_short(self):
        with pytest.raises(ConfigError):
            ArxSpec([[0.1] * 5], length=40)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="lenght"):
            ArxSpec.from_dict({"coefficients": [[0.1]], "lenght": 10})

    def test_bad_exo_count(self):
        with pytest.raises(ConfigError):
            ArxSpec([[0.1], [0.2]], exogenous=[{"kind": "iid"}])


class TestGroundTruth:
    def test_standard_rank(self):
        assert ground_truth_rank(ArxSpec(**BENCHMARK)) == ["x1", "x3", "x2"]

    def test_all_zero_uses_index(self):
        assert ground_truth_rank(ArxSpec([[0.0], [0.0], [0.0]])) == ["x1", "x2", "x3"]

    def test_std_weighting(self):
        spec = ArxSpec([[0.5], [0.9]], exogenous=[ExoProcess(std=2.0), ExoProcess(std=1.0)])
        np.testing.assert_allclose(ground_truth_scores(spec), [1.0, 0.9])
        assert ground_truth_rank(spec) == ["x1", "x2"]

    def test_multi_lag_sum(self):
        spec = ArxSpec([[0.2, -0.3], [0.4, 0.0]])
        np.testing.assert_allclose(ground_truth_scores(spec), [0.5, 0.4])


def test_granger_separates_zero_coefficient_variable():
    good = 0
    for seed in range(10):
        frame = generate(ArxSpec(**BENCHMARK, length=2000, seed=seed))
        rank = granger_rank(frame)
        order = [r.variable for r in rank.results]
        good += set(order[:2]) == {"x1", "x3"} and order[2] == "x2"
    assert good >= 9
