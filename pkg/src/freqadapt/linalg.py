"""Shape-checked dense matrix helpers.

These are the reference-grade primitives: ``matmul`` accumulates over the
inner index in a fixed order so results are reproducible bit for bit and
identical to a plain triple loop. The training engine in
:mod:`freqadapt.autodiff` uses BLAS directly for speed.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    # sequential over k, vectorised over (i, j): same rounding as the naive loop
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def add(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot add {a.shape} and {b.shape}")
    return a + b


def elementwise_apply(fn, a) -> np.ndarray:
    a = as_matrix(a)
    with np.errstate(all="ignore"):
        out = np.asarray(fn(a), dtype=np.float64)
    if out.shape != a.shape:
        raise ShapeError("elementwise function changed the matrix shape")
    if not np.all(np.isfinite(out)):
        raise NumericalError("elementwise function produced non-finite entries")
    return out
