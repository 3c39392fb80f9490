"""MV-LSTM recurrent cell with a per-variable (tensorized) hidden state.

The hidden state ``h_t`` of size ``M = N * d`` is viewed as an ``N x d``
tensor whose row ``n`` only ever receives candidate updates from input
variable ``n``.  The input/forget/output gates, in contrast, read every
input variable and the whole flattened hidden state.

All functions accept an optional leading batch axis; the unbatched
shapes are documented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionOutput, attention_forward
from .errors import DivergenceError, ShapeError
from .linalg import sigmoid

PARAM_NAMES = ("w_x", "w_h", "b_j", "w_gates", "b_gates", "w_e", "b_e", "w_out", "b_out")


@dataclass(frozen=True)
class CellShape:
    n_vars: int
    per_var_dim: int
    window: int

    def __post_init__(self):
        if self.n_vars < 2:
            raise ShapeError("n_vars must be >= 2 (at least one exogenous variable plus target)")
        if self.per_var_dim < 1 or self.window < 1:
            raise ShapeError("per_var_dim and window must be >= 1")

    @property
    def m(self) -> int:
        return self.n_vars * self.per_var_dim


def flatten(hidden) -> np.ndarray:
    """``(..., N, d)`` hidden tensor to ``(..., N*d)`` vector, block order kept."""
    h = np.asarray(hidden)
    return h.reshape(h.shape[:-2] + (h.shape[-2] * h.shape[-1],))


def unflatten(vec, n_vars: int, per_var_dim: int) -> np.ndarray:
    v = np.asarray(vec)
    if v.shape[-1] != n_vars * per_var_dim:
        raise ShapeError(f"vector length {v.shape[-1]} != {n_vars}*{per_var_dim}")
    return v.reshape(v.shape[:-1] + (n_vars, per_var_dim))


@dataclass
class MvLstmParams:
    """Trainable weights of the cell and the attention head.

    Gate rows are stacked ``[input; forget; output]`` and gate columns are
    ``[x_t, flatten(h_{t-1})]``.
    """

    w_x: np.ndarray      # (N, d)     input weight per variable (scalar input)
    w_h: np.ndarray      # (N, d, d)  hidden transition per variable
    b_j: np.ndarray      # (M,)
    w_gates: np.ndarray  # (3M, N + M)
    b_gates: np.ndarray  # (3M,)
    w_e: np.ndarray      # (d,)       shared attention scorer
    b_e: np.ndarray      # ()
    w_out: np.ndarray    # (N, d)     per-variable readout
    b_out: np.ndarray    # (N,)

    @property
    def n_vars(self) -> int:
        return self.w_x.shape[0]

    @property
    def per_var_dim(self) -> int:
        return self.w_x.shape[1]

    @property
    def m(self) -> int:
        return self.n_vars * self.per_var_dim

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return expected_shapes(self.n_vars, self.per_var_dim)

    def validate(self) -> "MvLstmParams":
        for name, shape in self.shapes().items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(f"parameter {name} has non-finite entries")
        return self

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MvLstmParams":
        return MvLstmParams(**{k: v.copy() for k, v in self.arrays().items()})

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in PARAM_NAMES])

    @classmethod
    def from_vector(cls, vec, n_vars: int, per_var_dim: int) -> "MvLstmParams":
        vec = np.asarray(vec, dtype=np.float64)
        shapes = expected_shapes(n_vars, per_var_dim)
        total = sum(int(np.prod(s)) for s in shapes.values())
        if vec.shape != (total,):
            raise ShapeError(f"parameter vector length {vec.shape} != {total}")
        out, pos = {}, 0
        for name in PARAM_NAMES:
            size = int(np.prod(shapes[name]))
            out[name] = vec[pos:pos + size].reshape(shapes[name]).copy()
            pos += size
        return cls(**out)

    @classmethod
    def zeros(cls, n_vars: int, per_var_dim: int) -> "MvLstmParams":
        return cls(**{k: np.zeros(s) for k, s in expected_shapes(n_vars, per_var_dim).items()})

    @classmethod
    def init(cls, n_vars: int, per_var_dim: int, rng: np.random.Generator,
             forget_bias: float = 1.0) -> "MvLstmParams":
        """Uniform fan-in initialisation; forget-gate bias starts at ``forget_bias``."""
        d, m = per_var_dim, n_vars * per_var_dim
        p = cls.zeros(n_vars, d)
        p.w_x = rng.uniform(-1.0, 1.0, (n_vars, d))
        p.w_h = rng.uniform(-1.0, 1.0, (n_vars, d, d)) / np.sqrt(d)
        p.w_gates = rng.uniform(-1.0, 1.0, (3 * m, n_vars + m)) / np.sqrt(n_vars + m)
        p.b_gates[m:2 * m] = forget_bias
        p.w_e = rng.uniform(-1.0, 1.0, d) / np.sqrt(d)
        p.w_out = rng.uniform(-1.0, 1.0, (n_vars, d)) / np.sqrt(d)
        return p


def expected_shapes(n_vars: int, per_var_dim: int) -> dict[str, tuple[int, ...]]:
    n, d = n_vars, per_var_dim
    m = n * d
    return {
        "w_x": (n, d),
        "w_h": (n, d, d),
        "b_j": (m,),
        "w_gates": (3 * m, n + m),
        "b_gates": (3 * m,),
        "w_e": (d,),
        "b_e": (),
        "w_out": (n, d),
        "b_out": (n,),
    }


@dataclass
class ForwardTape:
    """Every intermediate of one forward pass, appended step by step.

    ``xs[t]``, ``i[t]``, ... hold the values of step ``t + 1``; ``h[t]`` and
    ``c[t]`` are the states *after* that step.  Attention quantities are set
    once at the end.
    """

    xs: list = field(default_factory=list)
    i: list = field(default_factory=list)
    f: list = field(default_factory=list)
    o: list = field(default_factory=list)
    j: list = field(default_factory=list)
    c: list = field(default_factory=list)
    h: list = field(default_factory=list)
    attention: AttentionOutput | None = None

    @property
    def steps(self) -> int:
        return len(self.xs)

    @property
    def logits(self):
        return self.attention.logits

    @property
    def alpha(self):
        return self.attention.weights

    @property
    def per_var_pred(self):
        return self.attention.per_var_pred

    @property
    def prediction(self):
        return self.attention.prediction

    def append(self, **values):
        for name, value in values.items():
            getattr(self, name).append(value)


def _check_step_shapes(params: MvLstmParams, h_prev: np.ndarray, x_t: np.ndarray):
    n, d = params.n_vars, params.per_var_dim
    if x_t.shape[-1] != n:
        raise ShapeError(f"x_t has {x_t.shape[-1]} variables, params expect {n}")
    if h_prev.shape[-2:] != (n, d):
        raise ShapeError(f"hidden tensor shape {h_prev.shape[-2:]} != ({n}, {d})")


def cell_candidate(params: MvLstmParams, h_prev, x_t) -> np.ndarray:
    """Per-variable candidate ``tanh(W_h^n h^n + W_x^n x_n + b_j^n)``, shape ``(N, d)``.

    Block ``n`` is computed from ``h_prev[n]`` and ``x_t[n]`` only.
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    _check_step_shapes(params, h_prev, x_t)
    rec = np.matmul(params.w_h, h_prev[..., None])[..., 0]
    inp = params.w_x * x_t[..., None]
    return np.tanh(rec + inp + params.b_j.reshape(params.w_x.shape))


def cell_gates(params: MvLstmParams, h_prev_flat, x_t):
    """Input, forget and output gates from ``sigmoid(W [x_t, h_{t-1}] + b)``."""
    h_prev_flat = np.asarray(h_prev_flat, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    m, n = params.m, params.n_vars
    if x_t.shape[-1] != n or h_prev_flat.shape[-1] != m:
        raise ShapeError(
            f"gate inputs have lengths ({x_t.shape[-1]}, {h_prev_flat.shape[-1]}), "
            f"expected ({n}, {m})"
        )
    z = np.concatenate([x_t, h_prev_flat], axis=-1)
    g = sigmoid(z @ params.w_gates.T + params.b_gates)
    return g[..., :m], g[..., m:2 * m], g[..., 2 * m:]


def cell_step(params: MvLstmParams, h_prev, c_prev, x_t, tape: ForwardTape | None = None,
              step: int | None = None):
    """Advance one time step; returns ``(h_t as (N, d), c_t as (M,))``."""
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if c_prev.shape[-1] != params.m:
        raise ShapeError(f"c_prev length {c_prev.shape[-1]} != {params.m}")
    j = cell_candidate(params, h_prev, x_t)
    i, f, o = cell_gates(params, flatten(h_prev), x_t)
    c = f * c_prev + i * flatten(j)
    h = o * np.tanh(c)
    if not np.isfinite(c).all():
        raise DivergenceError("non-finite cell state", step=step)
    if tape is not None:
        tape.append(xs=x_t, i=i, f=f, o=o, j=j, c=c, h=h)
    return unflatten(h, params.n_vars, params.per_var_dim), c


def network_forward(params: MvLstmParams, window):
    """Run the unrolled network over a ``(T, N)`` window (or ``(B, T, N)`` batch).

    The target variable is the last column.  States start at zero.  Returns
    ``(prediction, alpha, tape)``.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim not in (2, 3) or x.shape[-1] != params.n_vars or x.shape[-2] < 1:
        raise ShapeError(
            f"window must be (T, {params.n_vars}) or (B, T, {params.n_vars}), got {x.shape}"
        )
    batch = x.shape[:-2]
    h = np.zeros(batch + (params.n_vars, params.per_var_dim))
    c = np.zeros(batch + (params.m,))
    tape = ForwardTape()
    for t in range(x.shape[-2]):
        h, c = cell_step(params, h, c, x[..., t, :], tape, step=t + 1)
    tape.attention = attention_forward(params, h)
    return tape.prediction, tape.alpha, tape
