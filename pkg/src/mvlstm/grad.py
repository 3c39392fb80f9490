"""Backpropagation through time for the MV-LSTM and a finite-difference checker."""

from __future__ import annotations

import math

import numpy as np

from .cell import PARAM_NAMES, ForwardTape, MvLstmParams, network_forward
from .errors import DivergenceError, ShapeError

FD_EPSILON = 1e-5


def backward(params: MvLstmParams, tape: ForwardTape, target):
    """Exact gradient of the squared-error loss over a recorded forward pass.

    For an unbatched tape the loss is ``(y_hat - target)**2``; for a batched
    tape it is the mean over the batch.  Returns ``(loss, grads)`` where
    ``grads`` is an :class:`MvLstmParams` holding dL/dtheta.
    """
    if tape.attention is None or tape.steps == 0:
        raise ShapeError("tape is incomplete; run network_forward first")
    n, d, m = params.n_vars, params.per_var_dim, params.m
    batched = np.ndim(tape.prediction) == 1

    def b(a):
        a = np.asarray(a, dtype=np.float64)
        return a if batched else a[None]

    yhat = b(tape.prediction)
    y = b(target)
    if y.shape != yhat.shape:
        raise ShapeError(f"target shape {y.shape} does not match predictions {yhat.shape}")
    if b(tape.h[-1]).shape[1:] != (m,) or b(tape.xs[0]).shape[1:] != (n,):
        raise ShapeError("tape shapes do not match parameters")
    bsz = yhat.shape[0]

    resid = yhat - y
    loss = float(np.mean(resid ** 2))
    dyhat = 2.0 * resid / bsz

    g = MvLstmParams.zeros(n, d)

    # attention head
    h_last = b(tape.h[-1]).reshape(bsz, n, d)
    alpha = b(tape.alpha)
    e = b(tape.logits)
    readout = b(tape.per_var_pred)
    d_read = dyhat[:, None] * alpha
    d_alpha = dyhat[:, None] * readout
    g.w_out = np.einsum("bn,bnk->nk", d_read, h_last)
    g.b_out = d_read.sum(axis=0)
    d_hidden = d_read[:, :, None] * params.w_out
    d_e = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
    d_score = d_e * (1.0 - e ** 2)
    g.w_e = np.einsum("bn,bnk->k", d_score, h_last)
    g.b_e = np.asarray(d_score.sum())
    d_hidden = d_hidden + d_score[:, :, None] * params.w_e

    dh = d_hidden.reshape(bsz, m)
    dc = np.zeros((bsz, m))
    zeros_state = np.zeros((bsz, m))
    for t in reversed(range(tape.steps)):
        x_t = b(tape.xs[t])
        i, f, o = b(tape.i[t]), b(tape.f[t]), b(tape.o[t])
        j = b(tape.j[t]).reshape(bsz, n, d)
        c_t = b(tape.c[t])
        c_prev = b(tape.c[t - 1]) if t > 0 else zeros_state
        h_prev = b(tape.h[t - 1]) if t > 0 else zeros_state

        tanh_c = np.tanh(c_t)
        d_o = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        d_f = dc * c_prev
        d_i = dc * j.reshape(bsz, m)
        d_j = (dc * i).reshape(bsz, n, d)
        dc = dc * f

        gates = np.concatenate([i, f, o], axis=1)
        d_gate_pre = np.concatenate([d_i, d_f, d_o], axis=1) * gates * (1.0 - gates)
        z = np.concatenate([x_t, h_prev], axis=1)
        g.w_gates += d_gate_pre.T @ z
        g.b_gates += d_gate_pre.sum(axis=0)
        dz = d_gate_pre @ params.w_gates

        d_cand = d_j * (1.0 - j ** 2)
        h_prev_t = h_prev.reshape(bsz, n, d)
        g.b_j += d_cand.reshape(bsz, m).sum(axis=0)
        g.w_x += np.einsum("bnk,bn->nk", d_cand, x_t)
        g.w_h += np.einsum("bnk,bnl->nkl", d_cand, h_prev_t)
        dh_block = np.einsum("nkl,bnk->bnl", params.w_h, d_cand)
        dh = dz[:, n:] + dh_block.reshape(bsz, m)

    for name in PARAM_NAMES:
        if not np.all(np.isfinite(getattr(g, name))):
            raise DivergenceError(f"non-finite gradient for {name}")
    return loss, g


def _sig(v: float) -> float:
    if v >= 0:
        return 1.0 / (1.0 + math.exp(-v))
    ev = math.exp(v)
    return ev / (1.0 + ev)


def plain_forward(params: MvLstmParams, window) -> tuple[float, np.ndarray]:
    """Tape-free forward written variable by variable; returns ``(y_hat, alpha)``.

    Kept deliberately separate from :func:`mvlstm.cell.network_forward` so the
    two can check each other.
    """
    x = np.asarray(window, dtype=np.float64)
    n, d, m = params.n_vars, params.per_var_dim, params.m
    h = np.zeros(m)
    c = np.zeros(m)
    for t in range(x.shape[0]):
        j = np.empty(m)
        for v in range(n):
            blk = slice(v * d, (v + 1) * d)
            j[blk] = np.tanh(params.w_h[v].dot(h[blk]) + params.w_x[v] * x[t, v] + params.b_j[blk])
        pre = params.w_gates.dot(np.concatenate([x[t], h])) + params.b_gates
        gate = np.array([_sig(p) for p in pre])
        c = gate[m:2 * m] * c + gate[:m] * j
        h = gate[2 * m:] * np.tanh(c)
    scores = np.empty(n)
    reads = np.empty(n)
    for v in range(n):
        hv = h[v * d:(v + 1) * d]
        scores[v] = math.tanh(float(params.w_e.dot(hv)) + float(params.b_e))
        reads[v] = float(params.w_out[v].dot(hv)) + float(params.b_out[v])
    ex = np.exp(scores - scores.max())
    alpha = ex / ex.sum()
    return float(alpha.dot(reads)), alpha


def plain_loss(params: MvLstmParams, window, target: float) -> float:
    yhat, _ = plain_forward(params, window)
    return (yhat - float(target)) ** 2


def fd_gradients(params: MvLstmParams, window, target: float,
                 epsilon: float = FD_EPSILON) -> MvLstmParams:
    """Central-difference gradient of :func:`plain_loss` for every scalar parameter."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    out = MvLstmParams.zeros(params.n_vars, params.per_var_dim)
    work = params.copy()
    for name in PARAM_NAMES:
        arr = getattr(work, name)
        grad = getattr(out, name)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + epsilon
            up = plain_loss(work, window, target)
            arr[idx] = orig - epsilon
            down = plain_loss(work, window, target)
            arr[idx] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise DivergenceError(f"non-finite loss perturbing {name}{list(idx)}")
            grad[idx] = (up - down) / (2.0 * epsilon)
    return out


def relative_error(analytic: MvLstmParams, numeric: MvLstmParams) -> float:
    worst = 0.0
    for name in PARAM_NAMES:
        a = getattr(analytic, name)
        b = getattr(numeric, name)
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


def fd_check(params: MvLstmParams, window, target: float, epsilon: float = FD_EPSILON,
             grads: MvLstmParams | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``grads`` overrides the analytic gradient (used to test the checker
    itself); by default it comes from :func:`backward`.
    """
    if grads is None:
        _, _, tape = network_forward(params, window)
        _, grads = backward(params, tape, target)
    numeric = fd_gradients(params, window, target, epsilon)
    return relative_error(grads, numeric)


GRADCHECK_SHAPES = [(n, d, t) for n in (2, 3, 5) for d in (1, 2, 4) for t in (1, 5, 10)]


def gradcheck_suite(seed: int = 0, epsilon: float = FD_EPSILON,
                    shapes=GRADCHECK_SHAPES) -> list[tuple[tuple[int, int, int], float]]:
    """Run :func:`fd_check` over a grid of ``(N, d, T)`` shapes with random params."""
    results = []
    for k, (n, d, t) in enumerate(shapes):
        rng = np.random.default_rng([seed, k])
        params = random_params(n, d, rng)
        window = rng.normal(size=(t, n))
        target = float(rng.normal())
        results.append(((n, d, t), fd_check(params, window, target, epsilon)))
    return results


def random_params(n_vars: int, per_var_dim: int, rng: np.random.Generator,
                  scale: float = 0.5) -> MvLstmParams:
    """Dense random parameters (every entry non-zero) for gradient tests."""
    shapes = MvLstmParams.zeros(n_vars, per_var_dim).shapes()
    return MvLstmParams(**{k: rng.normal(scale=scale, size=s) for k, s in shapes.items()})
