import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlstm.attention import attention_forward, rank_variables
from mvlstm.cell import MvLstmParams
from mvlstm.errors import ShapeError
from mvlstm.linalg import softmax
from mvlstm.grad import random_params


def test_zero_hidden_gives_uniform_weights():
    p = random_params(5, 3, np.random.default_rng(0))
    p.b_e = np.asarray(0.0)
    out = attention_forward(p, np.zeros((5, 3)))
    np.testing.assert_array_equal(out.logits, np.zeros(5))
    np.testing.assert_allclose(out.weights, 0.2, atol=1e-15)


def test_convex_combination_example():
    # per_var_pred (2, 4) with weights (0.25, 0.75): logits -ln3/2, +ln3/2
    p = MvLstmParams.zeros(2, 1)
    p.w_out[:] = 1.0
    p.w_e[:] = 1.0
    half = math.log(3.0) / 2
    h = np.array([[math.atanh(-half)], [math.atanh(half)]])
    p.b_out[:] = [2.0 - h[0, 0], 4.0 - h[1, 0]]
    out = attention_forward(p, h)
    np.testing.assert_allclose(out.weights, [0.25, 0.75], atol=1e-12)
    np.testing.assert_allclose(out.per_var_pred, [2.0, 4.0], atol=1e-12)
    assert abs(out.prediction - 3.5) <= 1e-12


def test_scalar_hand_example():
    p = MvLstmParams.zeros(2, 1)
    p.w_e[:] = 1.0
    p.w_out[:] = 1.0
    out = attention_forward(p, [[0.5], [-0.5]])
    np.testing.assert_allclose(out.logits, [0.46212, -0.46212], atol=1e-4)
    np.testing.assert_allclose(out.weights, [0.71583, 0.28417], atol=1e-4)
    assert abs(out.prediction - 0.21583) <= 1e-4


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        attention_forward(MvLstmParams.zeros(3, 2), np.zeros((2, 2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 2**31))
def test_prediction_is_convex_combination(n, d, seed):
    rng = np.random.default_rng(seed)
    p = random_params(n, d, rng, scale=2.0)
    out = attention_forward(p, np.tanh(rng.normal(size=(n, d))))
    assert abs(out.weights.sum() - 1.0) <= 1e-12
    assert np.all((out.weights > 0) & (out.weights < 1))
    assert abs(out.prediction - out.weights @ out.per_var_pred) <= 1e-12
    assert out.per_var_pred.min() - 1e-12 <= out.prediction <= out.per_var_pred.max() + 1e-12


def test_relabeling_equivariance():
    rng = np.random.default_rng(3)
    p = random_params(4, 3, rng)
    h = rng.normal(size=(4, 3))
    perm = [2, 0, 3, 1]
    q = p.copy()
    q.w_out = p.w_out[perm]
    q.b_out = p.b_out[perm]
    a = attention_forward(p, h)
    b = attention_forward(q, h[perm])
    np.testing.assert_allclose(b.weights, a.weights[perm], atol=1e-15)
    assert abs(a.prediction - b.prediction) <= 1e-12


class TestRanking:
    def test_single_instance(self):
        ranks = rank_variables([[0.1, 0.7, 0.2]])
        assert [r.index + 1 for r in ranks] == [2, 3, 1]

    def test_tie_rule(self):
        ranks = rank_variables([[0.5, 0.5], [0.5, 0.5]])
        assert [r.index + 1 for r in ranks] == [1, 2]

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            rank_variables(np.empty((0, 3)))

    def test_means_match_streaming_oracle(self):
        rng = np.random.default_rng(11)
        a = rng.dirichlet(np.ones(5), size=1000)
        # Welford running mean
        mean = [0.0] * 5
        for k, row in enumerate(a, 1):
            for j in range(5):
                mean[j] += (row[j] - mean[j]) / k
        ranks = rank_variables(a, names=list("abcde"))
        for r in ranks:
            assert abs(r.mean - mean[r.index]) <= 1e-12
        assert [r.mean for r in ranks] == sorted((r.mean for r in ranks), reverse=True)

    def test_histogram_conserves_count(self):
        a = np.random.default_rng(2).dirichlet(np.ones(3), size=257)
        for r in rank_variables(a, bins=7):
            assert r.counts.sum() == 257
            assert len(r.bin_edges) == 8 and r.bin_edges[0] == 0.0 and r.bin_edges[-1] == 1.0

    def test_default_bins(self):
        assert len(rank_variables([[0.3, 0.7]])[0].counts) == 20

    def test_ranking_invariant_to_logit_shift(self):
        logits = np.random.default_rng(9).normal(size=(50, 4))
        w1 = softmax(logits)
        w2 = softmax(logits + 5.0)
        np.testing.assert_allclose(w1, w2, rtol=0, atol=1e-12)
        assert [r.index for r in rank_variables(w1)] == [r.index for r in rank_variables(w2)]
