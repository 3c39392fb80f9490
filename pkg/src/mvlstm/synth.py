"""Synthetic ARX series with known ground-truth variable importance."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .data import SeriesFrame
from .errors import ConfigError, UnstableSpecError

BURN_IN_FACTOR = 10


@dataclass
class ExoProcess:
    """Exogenous driver: i.i.d. normal or stationary AR(1).

    ``std`` is the marginal standard deviation of the process.
    """

    kind: str = "iid"
    rho: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in ("iid", "ar1"):
            raise ConfigError(f"unknown exogenous process kind {self.kind!r}")
        if self.std < 0:
            raise ConfigError("exogenous std must be >= 0")
        if self.kind == "ar1" and not abs(self.rho) < 1:
            raise UnstableSpecError(abs(self.rho), "exogenous AR(1)")


@dataclass
class TanhTerm:
    """Adds ``coef * tanh(gain * x_var[t - lag])`` to the target recursion."""

    var: int
    lag: int
    coef: float
    gain: float = 1.0


@dataclass
class ArxSpec:
    """Target ``y_t = sum_k a_k y_{t-k} + sum_n sum_l b_{n,l} x_{n,t-l} + noise``.

    ``coefficients[n][l]`` is the weight of exogenous variable ``n + 1`` at
    lag ``l + 1``.  Variables are 1-based in ``TanhTerm.var``.
    """

    coefficients: list[list[float]]
    self_lags: list[float] = field(default_factory=list)
    noise_std: float = 0.1
    exogenous: list[ExoProcess] | None = None
    length: int = 2000
    seed: int = 0
    y_init: float = 0.0
    tanh_terms: list[TanhTerm] = field(default_factory=list)
    names: list[str] | None = None

    def __post_init__(self):
        self.coefficients = [list(map(float, c)) for c in self.coefficients]
        self.self_lags = [float(a) for a in self.self_lags]
        if self.n_exo < 1:
            raise ConfigError("need at least one exogenous variable")
        if self.exogenous is None:
            self.exogenous = [ExoProcess() for _ in range(self.n_exo)]
        self.exogenous = [e if isinstance(e, ExoProcess) else ExoProcess(**e)
                          for e in self.exogenous]
        self.tanh_terms = [t if isinstance(t, TanhTerm) else TanhTerm(**t)
                           for t in self.tanh_terms]
        if len(self.exogenous) != self.n_exo:
            raise ConfigError(f"{len(self.exogenous)} exogenous processes for {self.n_exo} variables")
        for t in self.tanh_terms:
            if not 1 <= t.var <= self.n_exo or t.lag < 1:
                raise ConfigError(f"bad tanh term {t}")
        if self.names is None:
            self.names = [f"x{k + 1}" for k in range(self.n_exo)] + ["y"]
        if len(self.names) != self.n_exo + 1:
            raise ConfigError(f"need {self.n_exo + 1} names, got {len(self.names)}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.length < BURN_IN_FACTOR * self.max_lag:
            raise ConfigError(
                f"length {self.length} is shorter than {BURN_IN_FACTOR} x max lag {self.max_lag}"
            )
        radius = spectral_radius(self.self_lags)
        if radius >= 1.0:
            raise UnstableSpecError(radius)

    @property
    def n_exo(self) -> int:
        return len(self.coefficients)

    @property
    def max_lag(self) -> int:
        lags = [len(self.self_lags)] + [len(c) for c in self.coefficients]
        lags += [t.lag for t in self.tanh_terms]
        return max(1, *lags)

    @classmethod
    def from_dict(cls, raw: dict) -> "ArxSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown ArxSpec key(s): {', '.join(unknown)}")
        return cls(**raw)


def spectral_radius(self_lags) -> float:
    """Largest root magnitude of the AR companion matrix (0 for no lags)."""
    p = len(self_lags)
    if p == 0:
        return 0.0
    comp = np.zeros((p, p))
    comp[0] = self_lags
    comp[1:, :-1] = np.eye(p - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def _exo_series(proc: ExoProcess, n: int, rng: np.random.Generator) -> np.ndarray:
    e = rng.normal(size=n)
    if proc.kind == "iid":
        return proc.std * e
    x = np.empty(n)
    x[0] = proc.std * e[0]
    scale = proc.std * np.sqrt(1.0 - proc.rho ** 2)
    for t in range(1, n):
        x[t] = proc.rho * x[t - 1] + scale * e[t]
    return x


def generate(spec: ArxSpec) -> SeriesFrame:
    """Simulate ``spec``; the first ``10 * max_lag`` steps are discarded."""
    burn = BURN_IN_FACTOR * spec.max_lag
    total = burn + spec.length
    rng = np.random.default_rng(spec.seed)
    x = np.column_stack([_exo_series(p, total, rng) for p in spec.exogenous])
    noise = spec.noise_std * rng.normal(size=total)

    y = np.zeros(total)
    start = spec.max_lag
    y[:start] = spec.y_init
    for t in range(start, total):
        acc = noise[t]
        for k, a in enumerate(spec.self_lags, 1):
            acc += a * y[t - k]
        for n, coefs in enumerate(spec.coefficients):
            for lag, b in enumerate(coefs, 1):
                acc += b * x[t - lag, n]
        for term in spec.tanh_terms:
            acc += term.coef * np.tanh(term.gain * x[t - term.lag, term.var - 1])
        y[t] = acc
    values = np.column_stack([x, y])[burn:]
    return SeriesFrame(list(spec.names), values)


def ground_truth_scores(spec: ArxSpec) -> np.ndarray:
    """Per exogenous variable: sum over lags of ``|coef| * std``.

    Tanh terms contribute ``|coef| * gain * std`` (their slope at zero).
    """
    scores = np.array([sum(abs(b) for b in coefs) * proc.std
                       for coefs, proc in zip(spec.coefficients, spec.exogenous)])
    for t in spec.tanh_terms:
        scores[t.var - 1] += abs(t.coef) * t.gain * spec.exogenous[t.var - 1].std
    return scores


def ground_truth_rank(spec: ArxSpec) -> list[str]:
    """Exogenous variable names by descending importance, ties by index."""
    scores = ground_truth_scores(spec)
    order = sorted(range(spec.n_exo), key=lambda k: (-scores[k], k))
    return [spec.names[k] for k in order]
