"""Dense float64 kernel used throughout the package.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64
(1-d and 2-d, row-major).  The helpers here add the shape checks and the
numerically stable activations the rest of the package relies on.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ShapeError

__all__ = [
    "as_vector",
    "as_matrix",
    "matvec",
    "sigmoid",
    "elementwise",
    "softmax",
]


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {arr.shape}")
    return arr


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def matvec(m, v) -> np.ndarray:
    """Matrix-vector product with a dimension check."""
    m = as_matrix(m, "m")
    v = as_vector(v, "v")
    if m.shape[1] != v.shape[0]:
        raise ShapeError(
            f"matvec dimension mismatch: matrix is {m.shape[0]}x{m.shape[1]}, "
            f"vector has length {v.shape[0]}"
        )
    return m @ v


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite input."""
    return expit(np.asarray(x, dtype=np.float64))


_UNARY = {"tanh": np.tanh, "sigmoid": sigmoid}
_BINARY = {"mul": np.multiply, "add": np.add}


def elementwise(op: str, a, b=None) -> np.ndarray:
    """Apply ``tanh``/``sigmoid`` to ``a`` or ``mul``/``add`` to ``(a, b)``."""
    a = as_vector(a, "a")
    if op in _UNARY:
        if b is not None:
            raise ShapeError(f"{op} is unary; got a second operand")
        return _UNARY[op](a)
    if op in _BINARY:
        if b is None:
            raise ShapeError(f"{op} is binary; second operand missing")
        b = as_vector(b, "b")
        if a.shape != b.shape:
            raise ShapeError(f"{op}: length mismatch {a.shape[0]} vs {b.shape[0]}")
        return _BINARY[op](a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis`` using max-subtraction.

    Accepts a single logit vector or a stack of them.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 0 or z.shape[axis] == 0:
        raise ShapeError("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax logits must be finite")
    z = z - z.max(axis=axis, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=axis, keepdims=True)
