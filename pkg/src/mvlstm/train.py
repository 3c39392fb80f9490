"""Windowing, normalisation, Adam training loop and error metrics."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .cell import MvLstmParams, network_forward
from .data import SeriesFrame
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .grad import backward

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
# Instances per gradient work unit.  Fixed so that results never depend on
# the number of worker threads.
CHUNK = 32
PREDICT_CHUNK = 512
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Split:
    x: np.ndarray        # (B, T, N) normalised windows
    y: np.ndarray        # (B,) normalised next-step target
    rows: np.ndarray     # (B,) frame row index of each window's first row

    def __len__(self) -> int:
        return self.y.shape[0]


@dataclass
class WindowedDataset:
    columns: list[str]
    window: int
    mean: np.ndarray
    std: np.ndarray
    train: Split
    val: Split
    test: Split
    split_rows: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.columns)

    def split(self, name: str) -> Split:
        return getattr(self, name)


def _split_sizes(n_rows: int, splits) -> tuple[int, int, int]:
    if len(splits) != 3 or any(s <= 0 for s in splits) or abs(sum(splits) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three positive numbers summing to 1, got {splits}")
    n_train = int(round(splits[0] * n_rows))
    n_val = int(round(splits[1] * n_rows))
    return n_train, n_val, n_rows - n_train - n_val


def _windows(values: np.ndarray, rows: np.ndarray, lo: int, hi: int, T: int):
    starts = []
    for s in range(lo, hi - T):
        # window rows s..s+T-1 plus target row s+T must be consecutive in the source
        if rows[s + T] - rows[s] == T:
            starts.append(s)
    starts = np.asarray(starts, dtype=np.int64)
    if len(starts) == 0:
        return np.empty((0, T, values.shape[1])), np.empty(0), starts
    idx = starts[:, None] + np.arange(T)[None, :]
    return values[idx], values[starts + T, -1], starts


def make_windows(frame: SeriesFrame, T: int, splits=(0.7, 0.15, 0.15),
                 stats: tuple[np.ndarray, np.ndarray] | None = None) -> WindowedDataset:
    """Chronological train/val/test split, then stride-1 windows inside each split.

    All columns (target included) are z-scored with train-split statistics,
    or with ``stats = (mean, std)`` when given (e.g. those stored with a model).
    """
    if T < 1:
        raise ConfigError("window must be >= 1")
    n_rows = len(frame)
    if n_rows < T + 1:
        raise DataError(f"need at least {T + 1} rows for window {T}, got {n_rows}")
    sizes = _split_sizes(n_rows, splits)
    bounds, lo = {}, 0
    for name, size in zip(SPLITS, sizes):
        bounds[name] = (lo, lo + size)
        lo += size

    if stats is None:
        tr_lo, tr_hi = bounds["train"]
        train_vals = frame.values[tr_lo:tr_hi]
        mean = train_vals.mean(axis=0)
        std = train_vals.std(axis=0)
    else:
        mean, std = (np.asarray(a, dtype=np.float64) for a in stats)
        if mean.shape != (frame.n_vars,) or std.shape != (frame.n_vars,):
            raise ShapeError(f"normalisation stats do not match {frame.n_vars} columns")
    for k, name in enumerate(frame.columns):
        if not std[k] > 0:
            raise DataError(f"column {name!r} is constant over the training split")
    normed = (frame.values - mean) / std

    parts = {}
    for name in SPLITS:
        x, y, starts = _windows(normed, frame.rows, *bounds[name], T)
        parts[name] = Split(x, y, starts)
    counts = {k: len(v) for k, v in parts.items()}
    empty = [k for k, c in counts.items() if c == 0]
    if empty:
        raise DataError(
            f"split(s) {', '.join(empty)} yield no windows of length {T} "
            f"(rows per split {dict(zip(SPLITS, sizes))}, windows {counts}); supply more rows"
        )
    return WindowedDataset(list(frame.columns), T, mean, std,
                           parts["train"], parts["val"], parts["test"], bounds)


@dataclass
class TrainConfig:
    window: int = 10
    per_var_dim: int = 4
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 15
    clip_norm: float = 5.0
    seed: int = 0
    splits: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def __post_init__(self):
        self.splits = tuple(float(s) for s in self.splits)
        for name in ("window", "per_var_dim", "batch_size", "max_epochs", "patience"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be > 0")
        _split_sizes(100, self.splits)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown training config key(s): {', '.join(unknown)}")
        return cls(**raw)


@dataclass
class FitResult:
    params: MvLstmParams
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int
    test_rmse: float
    test_mae: float
    test_pred: np.ndarray
    test_alpha: np.ndarray


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def _pair(pred, truth):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ShapeError("metrics need at least one value")
    return p, t


def thread_count(threads: int | None = None) -> int:
    """Worker count from the argument or ``MVLSTM_THREADS`` (0 = auto)."""
    if threads is None:
        raw = os.environ.get("MVLSTM_THREADS", "0")
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"MVLSTM_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ConfigError("thread count must be >= 0")
    return threads or (os.cpu_count() or 1)


def _chunks(n: int, size: int = CHUNK):
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def _map(fn, items, pool):
    return list(pool.map(fn, items)) if pool is not None else [fn(i) for i in items]


def predict(params: MvLstmParams, x: np.ndarray, pool=None):
    """Predictions and attention weights for a stack of windows."""
    def run(sl):
        pred, alpha, _ = network_forward(params, x[sl])
        return pred, alpha
    outs = _map(run, _chunks(len(x), PREDICT_CHUNK), pool)
    if not outs:
        return np.empty(0), np.empty((0, params.n_vars))
    return np.concatenate([o[0] for o in outs]), np.concatenate([o[1] for o in outs])


def batch_gradient(params: MvLstmParams, x: np.ndarray, y: np.ndarray, pool=None):
    """Mean squared error and its gradient over a batch, reduced in chunk order."""
    n = len(y)

    def run(sl):
        _, _, tape = network_forward(params, x[sl])
        loss, g = backward(params, tape, y[sl])
        w = (sl.stop - sl.start) / n
        return loss * w, g.to_vector() * w

    parts = _map(run, _chunks(n), pool)
    loss = 0.0
    grad = np.zeros_like(parts[0][1])
    for l_, g_ in parts:
        loss += l_
        grad += g_
    return loss, grad


def _mse(params, split: Split, pool) -> float:
    pred, _ = predict(params, split.x, pool)
    return float(np.mean((pred - split.y) ** 2))


def fit(dataset: WindowedDataset, config: TrainConfig, threads: int | None = None,
        init: MvLstmParams | None = None) -> FitResult:
    """Train with Adam on mean squared error, early-stopped on validation loss.

    Returns the parameters of the best validation epoch together with
    test-split metrics in normalised units.
    """
    if len(dataset.train) == 0:
        raise DataError("training split is empty")
    if len(dataset.val) == 0:
        raise DataError("validation split is empty")
    if dataset.window != config.window:
        raise ConfigError(f"dataset window {dataset.window} != config window {config.window}")

    rng = np.random.default_rng(config.seed)
    n_vars, d = dataset.n_vars, config.per_var_dim
    params = init.copy() if init is not None else MvLstmParams.init(n_vars, d, rng)
    theta = params.to_vector()
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    step = 0

    workers = thread_count(threads)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        best_val = _mse(params, dataset.val, pool)
        best_theta, best_epoch = theta.copy(), 0
        train_curve: list[float] = []
        val_curve: list[float] = []
        stale = 0
        n_train = len(dataset.train)
        for epoch in range(1, config.max_epochs + 1):
            order = rng.permutation(n_train)
            for b, s in enumerate(range(0, n_train, config.batch_size)):
                idx = order[s:s + config.batch_size]
                params = MvLstmParams.from_vector(theta, n_vars, d)
                try:
                    loss, grad = batch_gradient(params, dataset.train.x[idx],
                                                dataset.train.y[idx], pool)
                except DivergenceError as exc:
                    raise DivergenceError(str(exc), epoch=epoch, batch=b) from None
                if not np.isfinite(loss):
                    raise DivergenceError("non-finite training loss", epoch=epoch, batch=b)
                norm = float(np.sqrt(grad @ grad))
                if norm > config.clip_norm:
                    grad = grad * (config.clip_norm / norm)
                step += 1
                m1 = ADAM_BETA1 * m1 + (1 - ADAM_BETA1) * grad
                m2 = ADAM_BETA2 * m2 + (1 - ADAM_BETA2) * grad ** 2
                m1_hat = m1 / (1 - ADAM_BETA1 ** step)
                m2_hat = m2 / (1 - ADAM_BETA2 ** step)
                theta = theta - config.learning_rate * m1_hat / (np.sqrt(m2_hat) + ADAM_EPS)

            params = MvLstmParams.from_vector(theta, n_vars, d)
            train_curve.append(_mse(params, dataset.train, pool))
            val = _mse(params, dataset.val, pool)
            val_curve.append(val)
            if not np.isfinite(val):
                raise DivergenceError("non-finite validation loss", epoch=epoch)
            if val < best_val:
                best_val, best_theta, best_epoch, stale = val, theta.copy(), epoch, 0
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                    break

        best = MvLstmParams.from_vector(best_theta, n_vars, d)
        pred, alpha = predict(best, dataset.test.x, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return FitResult(best, train_curve, val_curve, best_epoch,
                     rmse(pred, dataset.test.y), mae(pred, dataset.test.y), pred, alpha)
