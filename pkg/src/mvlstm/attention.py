"""Variable-level attention head and attention-based variable ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ShapeError
from .linalg import softmax

if TYPE_CHECKING:
    from .cell import MvLstmParams

DEFAULT_BINS = 20


@dataclass
class AttentionOutput:
    """Result of the attention head; arrays may carry a leading batch axis."""

    logits: np.ndarray
    weights: np.ndarray
    per_var_pred: np.ndarray
    prediction: np.ndarray | float


def attention_forward(params: "MvLstmParams", h_final) -> AttentionOutput:
    """Score each variable's final hidden block and mix per-variable readouts.

    ``h_final`` has shape ``(N, d)`` or ``(B, N, d)``.  A single shared
    scoring vector ``w_e`` is applied to every block, so scores are
    comparable across variables.
    """
    h = np.asarray(h_final, dtype=np.float64)
    n_vars, d = params.w_out.shape
    if h.shape[-2:] != (n_vars, d):
        raise ShapeError(f"hidden tensor shape {h.shape[-2:]} != ({n_vars}, {d})")
    logits = np.tanh(h @ params.w_e + params.b_e)
    weights = softmax(logits, axis=-1)
    per_var = np.sum(h * params.w_out, axis=-1) + params.b_out
    prediction = np.sum(weights * per_var, axis=-1)
    if prediction.ndim == 0:
        prediction = float(prediction)
    return AttentionOutput(logits, weights, per_var, prediction)


@dataclass
class VariableRank:
    name: str
    index: int
    mean: float
    std: float
    bin_edges: np.ndarray
    counts: np.ndarray


def rank_variables(
    weights_per_instance: Sequence[Sequence[float]] | np.ndarray,
    names: Sequence[str] | None = None,
    bins: int = DEFAULT_BINS,
) -> list[VariableRank]:
    """Rank variables by their empirical mean attention weight.

    Sorted by mean descending, ties by variable index ascending.  Each entry
    carries a histogram of that variable's weights over ``bins`` equal-width
    bins on [0, 1].
    """
    a = np.asarray(weights_per_instance, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0:
        raise ShapeError("need a non-empty (instances, N) array of attention weights")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    n_vars = a.shape[1]
    if names is None:
        names = [str(k + 1) for k in range(n_vars)]
    if len(names) != n_vars:
        raise ShapeError(f"{len(names)} names for {n_vars} variables")

    means = a.mean(axis=0)
    stds = a.std(axis=0)
    edges = np.linspace(0.0, 1.0, bins + 1)
    out = []
    for k in range(n_vars):
        counts, _ = np.histogram(np.clip(a[:, k], 0.0, 1.0), bins=edges)
        out.append(VariableRank(names[k], k, float(means[k]), float(stds[k]), edges, counts))
    # stable sort keeps ascending index among equal means
    out.sort(key=lambda r: -r.mean)
    return out
