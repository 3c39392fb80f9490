"""Pairwise Granger-causality F-test of each exogenous series against the target."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from .data import SeriesFrame
from .errors import DataError, MvLstmError, RankDeficientError, ShapeError

DEFAULT_LAG = 5
DEFAULT_LEVEL = 0.05
PIVOT_TOL = 1e-10
RSS_FLOOR = 1e-12
# reported when the full model fits exactly
F_CAP = 1e12


def ols(design, response):
    """Least squares via Householder QR; returns ``(coefficients, rss)``.

    Raises :class:`RankDeficientError` naming the first column whose QR
    pivot falls below ``PIVOT_TOL`` relative to that column's norm.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"design {X.shape} and response {y.shape} are incompatible")
    rows, cols = X.shape
    if rows < cols:
        raise ShapeError(f"need rows >= cols, got {rows}x{cols}")
    q, r = np.linalg.qr(X)
    col_norms = np.linalg.norm(X, axis=0)
    for k in range(cols):
        if col_norms[k] == 0 or abs(r[k, k]) <= PIVOT_TOL * col_norms[k]:
            raise RankDeficientError(k)
    beta = solve_triangular(r, q.T @ y)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def f_survival(f_stat: float, df1: int, df2: int) -> float:
    """Upper tail P(F > f_stat) via the regularised incomplete beta function."""
    if f_stat <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat)))


@dataclass
class GrangerResult:
    variable: str
    f_stat: float
    df_num: int
    df_den: int
    p_value: float
    causal: bool
    lag: int
    level: float
    rss_restricted: float = float("nan")
    rss_full: float = float("nan")


def _lagged(series: np.ndarray, p: int) -> np.ndarray:
    n = len(series)
    return np.column_stack([series[p - k:n - k] for k in range(1, p + 1)])


def granger_test(y, x, p: int = DEFAULT_LAG, level: float = DEFAULT_LEVEL,
                 name: str = "x") -> GrangerResult:
    """Does ``x`` Granger-cause ``y`` at lag order ``p``?

    Restricted model: intercept plus ``p`` lags of ``y``.  Full model adds
    ``p`` lags of ``x``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if p < 1:
        raise ValueError("lag order must be >= 1")
    if y.shape != x.shape or y.ndim != 1:
        raise ShapeError("y and x must be 1-d series of equal length")
    n = len(y)
    if n <= 3 * p + 1:
        raise DataError(f"series of length {n} too short for lag order {p}")
    if np.ptp(y) == 0:
        raise DataError("target series is constant")
    if np.ptp(x) == 0:
        raise DataError(f"series {name!r} is constant")

    t_eff = n - p
    ones = np.ones((t_eff, 1))
    target = y[p:]
    restricted = np.hstack([ones, _lagged(y, p)])
    full = np.hstack([restricted, _lagged(x, p)])
    _, rss_r = ols(restricted, target)
    try:
        _, rss_f = ols(full, target)
    except RankDeficientError:
        # collinear lags (e.g. y is a shifted copy of x): the fit may still be exact
        beta = np.linalg.lstsq(full, target, rcond=None)[0]
        resid = target - full @ beta
        rss_f = float(resid @ resid)
        if rss_f >= RSS_FLOOR:
            raise DataError(f"lags of {name!r} are collinear with the target's lags") from None
    df1, df2 = p, t_eff - 2 * p - 1
    if rss_f < RSS_FLOOR:
        f_stat, pval = F_CAP, 0.0
    else:
        f_stat = max(0.0, ((rss_r - rss_f) / df1) / (rss_f / df2))
        pval = f_survival(f_stat, df1, df2)
    return GrangerResult(name, f_stat, df1, df2, pval, pval < level, p, level, rss_r, rss_f)


@dataclass
class GrangerRanking:
    results: list[GrangerResult]
    errors: dict[str, str] = field(default_factory=dict)
    lag: int = DEFAULT_LAG
    level: float = DEFAULT_LEVEL

    @property
    def causal(self) -> list[str]:
        return [r.variable for r in self.results if r.causal]


def granger_rank(frame: SeriesFrame, p: int = DEFAULT_LAG,
                 level: float = DEFAULT_LEVEL) -> GrangerRanking:
    """Test every exogenous column against the target; sort by F descending.

    Per-column failures are collected in ``errors`` and do not stop the run.
    """
    y = frame.values[:, -1]
    results, errors = [], {}
    for k, name in enumerate(frame.exogenous):
        try:
            results.append(granger_test(y, frame.values[:, k], p, level, name=name))
        except MvLstmError as exc:
            errors[name] = str(exc)
    order = {name: k for k, name in enumerate(frame.columns)}
    results.sort(key=lambda r: (-r.f_stat, order[r.variable]))
    return GrangerRanking(results, errors, p, level)
