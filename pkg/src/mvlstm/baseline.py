"""Persistence and linear ARX reference forecasters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .granger import ols
from .train import WindowedDataset, rmse


def persistence_forecast(window) -> float:
    """Last observed target value."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 2 or w.size == 0:
        raise ShapeError("window must be a non-empty (T, N) array")
    return float(w[-1, -1])


@dataclass
class LinearArxModel:
    lag: int
    coefficients: np.ndarray   # intercept, then lags 1..p of column 1, of column 2, ...

    @property
    def n_vars(self) -> int:
        return (len(self.coefficients) - 1) // self.lag


def arx_design(windows: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[1, x_{T,1}, ..., x_{T-p+1,1}, x_{T,2}, ...]`` for a stack of windows."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 2:
        w = w[None]
    if not 1 <= p <= w.shape[1]:
        raise ShapeError(f"lag order {p} must be between 1 and the window length {w.shape[1]}")
    # lags newest first, grouped by column
    lags = w[:, ::-1][:, :p]                       # (B, p, N)
    blocks = lags.transpose(0, 2, 1).reshape(len(w), -1)
    return np.hstack([np.ones((len(w), 1)), blocks])


def fit_linear_arx(dataset: WindowedDataset, p: int) -> LinearArxModel:
    """OLS on the training windows of ``dataset``."""
    coef, _ = ols(arx_design(dataset.train.x, p), dataset.train.y)
    return LinearArxModel(p, coef)


def predict_linear_arx(model: LinearArxModel, window):
    """Scalar for one ``(T, N)`` window, vector for a ``(B, T, N)`` stack."""
    w = np.asarray(window, dtype=np.float64)
    out = arx_design(w, model.lag) @ model.coefficients
    return float(out[0]) if w.ndim == 2 else out


def evaluate_baselines(dataset: WindowedDataset, p: int | None = None) -> dict[str, float]:
    """Test-split RMSE of persistence and linear ARX, in normalised units."""
    p = p or dataset.window
    test = dataset.test
    persist = test.x[:, -1, -1]
    linear = predict_linear_arx(fit_linear_arx(dataset, p), test.x)
    return {"persistence": rmse(persist, test.y), "linear": rmse(linear, test.y)}
