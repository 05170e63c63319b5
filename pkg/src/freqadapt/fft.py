"""Mixed-radix Cooley-Tukey FFT.

Lengths are factored by their smallest prime; each stage splits the input
into ``p`` decimated sub-sequences, transforms them recursively and combines
them with twiddle factors. Prime lengths (and the leaves of the recursion)
use a direct matrix DFT. Unnormalised, forward sign ``exp(-2j*pi*k*n/N)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# below this size a dense DFT matrix beats further recursion in numpy
_DIRECT_MAX = 16


def smallest_factor(n: int) -> int:
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


@lru_cache(maxsize=64)
def _dft_matrix(n: int, sign: int) -> np.ndarray:
    k = np.arange(n)
    # reduce the exponent mod n first; keeps the phase accurate for large n
    return np.exp(sign * 2j * np.pi * (np.outer(k, k) % n) / n)


@lru_cache(maxsize=128)
def _twiddles(n: int, p: int, sign: int) -> np.ndarray:
    m = n // p
    return np.exp(sign * 2j * np.pi * np.outer(np.arange(p), np.arange(m)) / n)


def _fft_last(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    p = smallest_factor(n)
    if n <= _DIRECT_MAX or p == n:
        return x @ _dft_matrix(n, sign).T
    m = n // p
    # sub-sequence r holds x[r], x[r+p], ...; shape (..., p, m)
    sub = x.reshape(x.shape[:-1] + (m, p)).swapaxes(-1, -2)
    sub = _fft_last(sub, sign) * _twiddles(n, p, sign)
    # X[q*m + k] = sum_r W_p^{r q} * (W_n^{r k} Y_r[k])
    out = np.einsum("qr,...rk->...qk", _dft_matrix(p, sign), sub)
    return out.reshape(x.shape[:-1] + (n,))


def fft(x, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """Transform along one axis. ``inverse`` flips the sign and divides by n."""
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    out = _fft_last(x, +1 if inverse else -1)
    if inverse:
        out = out / x.shape[-1]
    return np.moveaxis(out, -1, axis)


def fftn(x, inverse: bool = False) -> np.ndarray:
    out = np.asarray(x, dtype=np.complex128)
    for ax in range(out.ndim):
        out = fft(out, axis=ax, inverse=inverse)
    return out


def fftfreq_index(n: int) -> np.ndarray:
    """Signed integer frequency index per FFT bin: 0, 1, ..., -2, -1."""
    k = np.arange(n)
    return np.where(k < (n + 1) // 2, k, k - n)
