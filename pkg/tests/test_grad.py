import numpy as np
import pytest

from mvlstm.cell import PARAM_NAMES, MvLstmParams, network_forward
from mvlstm.errors import ShapeError
from mvlstm.grad import (
    backward,
    fd_check,
    fd_gradients,
    random_params,
    relative_error,
)


def grads_for(params, window, target):
    _, _, tape = network_forward(params, window)
    return backward(params, tape, target)


def test_zero_residual_gives_zero_gradient():
    rng = np.random.default_rng(0)
    p = random_params(3, 2, rng)
    x = rng.normal(size=(4, 3))
    pred, _, tape = network_forward(p, x)
    loss, g = backward(p, tape, pred)
    assert loss == 0.0
    for name in PARAM_NAMES:
        assert not np.any(getattr(g, name))


def test_hand_sized_single_step():
    p = MvLstmParams.zeros(2, 1)
    p.w_h[:, 0, 0] = [0.5, -0.5]
    p.w_x[:, 0] = [1.0, 1.0]
    p.w_gates[:] = np.linspace(-0.4, 0.4, p.w_gates.size).reshape(p.w_gates.shape)
    p.b_gates[:] = [0.1, -0.2, 0.3, 0.0, 0.2, -0.1]
    p.w_e[:] = 0.7
    p.b_e = np.asarray(-0.1)
    p.w_out[:, 0] = [1.5, -0.5]
    p.b_out[:] = [0.2, 0.1]
    x = np.array([[1.0, -1.0]])
    _, g = grads_for(p, x, 0.3)
    numeric = fd_gradients(p, x, 0.3, 1e-5)
    assert relative_error(g, numeric) <= 1e-6


def test_random_shape_with_seed_42():
    rng = np.random.default_rng(42)
    p = random_params(3, 2, rng)
    x = rng.normal(size=(10, 3))
    assert fd_check(p, x, float(rng.normal())) <= 1e-4


def test_flat_point():
    p = MvLstmParams.zeros(3, 2)
    x = np.random.default_rng(1).normal(size=(5, 3))
    _, g = grads_for(p, x, 0.7)
    # with zero parameters the hidden state stays zero, so candidate weights get nothing
    assert not np.any(g.w_x) and not np.any(g.w_h)
    assert fd_check(p, x, 0.7) <= 1e-8


def test_checker_detects_corrupted_gradient():
    rng = np.random.default_rng(2)
    p = random_params(2, 2, rng)
    x = rng.normal(size=(5, 2))
    _, g = grads_for(p, x, 0.1)
    assert fd_check(p, x, 0.1, grads=g) <= 1e-4
    bad = g.copy()
    bad.w_h[1, 0, 1] += 1e-2
    assert fd_check(p, x, 0.1, grads=bad) > 1e-3


def test_batched_backward_is_mean_of_instances():
    rng = np.random.default_rng(3)
    p = random_params(3, 2, rng)
    xb = rng.normal(size=(6, 4, 3))
    yb = rng.normal(size=6)
    loss_b, gb = grads_for(p, xb, yb)
    losses, vecs = [], []
    for k in range(6):
        l_, g_ = grads_for(p, xb[k], yb[k])
        losses.append(l_)
        vecs.append(g_.to_vector())
    assert abs(loss_b - np.mean(losses)) <= 1e-12
    np.testing.assert_allclose(gb.to_vector(), np.mean(vecs, axis=0), atol=1e-12)


def test_gate_path_reaches_every_input_weight():
    # attention one-hot on the last variable, readout of variable 0 zeroed:
    # variable 0 can only influence the loss through the shared gates
    rng = np.random.default_rng(4)
    p = random_params(3, 2, rng)
    p.w_e[:] = 0.0
    p.b_e = np.asarray(0.0)
    p.w_out[0] = 0.0
    x = rng.normal(size=(6, 3))
    _, g = grads_for(p, x, 1.0)
    assert np.any(g.w_x[0] != 0.0)
    assert np.any(g.w_h[0] != 0.0)


def test_backward_deterministic():
    rng = np.random.default_rng(5)
    p = random_params(3, 4, rng)
    x = rng.normal(size=(8, 3))
    _, _, tape = network_forward(p, x)
    a = backward(p, tape, 0.2)[1].to_vector()
    b = backward(p, tape, 0.2)[1].to_vector()
    assert a.tobytes() == b.tobytes()


def test_shape_mismatch_rejected():
    rng = np.random.default_rng(6)
    p = random_params(3, 2, rng)
    _, _, tape = network_forward(p, rng.normal(size=(4, 3)))
    with pytest.raises(ShapeError):
        backward(random_params(2, 2, rng), tape, 0.0)
    with pytest.raises(ShapeError):
        backward(p, tape, np.zeros(3))


def test_fd_rejects_bad_epsilon():
    p = MvLstmParams.zeros(2, 1)
    with pytest.raises(ValueError):
        fd_gradients(p, np.zeros((2, 2)), 0.0, epsilon=0.0)


def test_relative_error_denominator():
    a = MvLstmParams.zeros(2, 1)
    b = MvLstmParams.zeros(2, 1)
    b.w_out[0, 0] = 0.5
    assert relative_error(a, b) == 0.5
    a.w_out[0, 0] = 10.0
    b.w_out[0, 0] = 11.0
    assert relative_error(a, b) == pytest.approx(1 / 11)
