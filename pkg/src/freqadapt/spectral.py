"""Posterior frequency capture: grid sampling, DFT, thresholding, coverage.

Frequencies are reported as angular frequencies in physical units,
``k = 2*pi*index / (hi - lo)`` per axis, so a captured vector can be fed
straight into a feature embedding.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fft as _fft
from .errors import AdaptError, FormatError, NumericalError, ShapeError


@dataclass
class GridField:
    """Samples on the uniform, endpoint-exclusive grid ``lo + i*(hi-lo)/n``."""

    lo: tuple
    hi: tuple
    counts: tuple
    values: np.ndarray

    def __post_init__(self):
        self.lo = tuple(float(v) for v in self.lo)
        self.hi = tuple(float(v) for v in self.hi)
        self.counts = tuple(int(c) for c in self.counts)
        self.values = np.asarray(self.values, dtype=np.float64)
        if not (len(self.lo) == len(self.hi) == len(self.counts) == self.values.ndim):
            raise ShapeError("box, counts and values disagree on dimension")
        if self.values.shape != self.counts:
            raise ShapeError(f"values shape {self.values.shape} != counts {self.counts}")
        if min(self.counts) < 2:
            raise ShapeError("need at least 2 nodes per axis")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("grid field has non-finite samples")

    @property
    def dim(self):
        return len(self.counts)

    @property
    def lengths(self):
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def axis_nodes(self, axis):
        return grid_nodes(self.lo[axis], self.hi[axis], self.counts[axis])

    def points(self) -> np.ndarray:
        return grid_points(self.lo, self.hi, self.counts)


def grid_nodes(lo, hi, n):
    return lo + np.arange(n) * ((hi - lo) / n)


def grid_points(lo, hi, counts) -> np.ndarray:
    """All grid nodes as an ``(prod(counts), d)`` array in row-major order."""
    axes = [grid_nodes(l, h, n) for l, h, n in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class FrequencySet:
    """Angular-frequency vectors with complex coefficients, ``|k|_1``-ordered."""

    k: np.ndarray
    coeff: np.ndarray = field(default=None)

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.float64)
        if k.ndim == 1:
            k = k[:, None]
        if self.coeff is None:
            self.coeff = np.ones(len(k), dtype=np.complex128)
        coeff = np.asarray(self.coeff, dtype=np.complex128).reshape(-1)
        if len(coeff) != len(k):
            raise ShapeError("one coefficient per frequency vector is required")
        order = _l1_order(k)
        self.k = k[order]
        self.coeff = coeff[order]
        if len(set(self.keys())) != len(self.k):
            raise ShapeError("duplicate frequency vectors")

    @classmethod
    def from_pairs(cls, pairs, dim=None):
        pairs = list(pairs)
        if not pairs:
            return cls.empty(dim or 1)
        ks = [np.atleast_1d(np.asarray(k, dtype=np.float64)) for k, _ in pairs]
        return cls(np.stack(ks), np.array([c for _, c in pairs], dtype=np.complex128))

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.complex128))

    def __len__(self):
        return len(self.k)

    def __iter__(self):
        return iter(zip(self.k, self.coeff))

    @property
    def dim(self):
        return self.k.shape[1]

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.coeff)

    def keys(self):
        return [tuple(float(v) for v in row) for row in self.k]

    def subset(self, mask) -> "FrequencySet":
        return FrequencySet(self.k[mask], self.coeff[mask])

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeff) ** 2))


def _l1_order(k: np.ndarray) -> np.ndarray:
    if len(k) == 0:
        return np.arange(0)
    keys = [k[:, j] for j in reversed(range(k.shape[1]))]
    keys.append(np.abs(k).sum(axis=1))
    return np.lexsort(keys)


def canonical(k) -> np.ndarray:
    """Representative of ``{k, -k}`` whose first nonzero component is positive."""
    k = np.asarray(k, dtype=np.float64)
    nz = np.flatnonzero(k)
    if len(nz) and k[nz[0]] < 0:
        return -k + 0.0
    return k + 0.0


# ---------------------------------------------------------------------------

def sample_grid(net, lo, hi, counts, channel=None) -> GridField:
    """Evaluate ``net`` (``(N, d) -> (N,)`` or ``(N, out)``) at every grid node."""
    lo = tuple(np.atleast_1d(lo).astype(float))
    hi = tuple(np.atleast_1d(hi).astype(float))
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    if min(counts) < 2:
        raise ShapeError("need at least 2 nodes per axis")
    pts = grid_points(lo, hi, counts)
    vals = np.asarray(net(pts), dtype=np.float64)
    if vals.ndim == 2:
        vals = vals[:, 0 if channel is None else channel]
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NumericalError(f"non-finite network value at node {pts[bad]}")
    return GridField(lo, hi, counts, vals.reshape(counts))


def even_extend(f: GridField, axis: int) -> GridField:
    """Mirror ``f`` about the lower end of ``axis``, doubling the period.

    In node order from the new lower bound the samples read
    ``[f_{n-1}, ..., f_0, f_0, ..., f_{n-1}]``; read circularly from the old
    origin this is ``[f_0, ..., f_{n-1}, f_{n-1}, ..., f_0]``. The extension is
    symmetric about the point half a grid step below the original origin.
    """
    if not 0 <= axis < f.dim:
        raise ShapeError(f"axis {axis} out of range")
    vals = np.concatenate([np.flip(f.values, axis=axis), f.values], axis=axis)
    lo = list(f.lo)
    lo[axis] = f.lo[axis] - (f.hi[axis] - f.lo[axis])
    counts = list(f.counts)
    counts[axis] *= 2
    return GridField(tuple(lo), f.hi, tuple(counts), vals)


def _index_grid(counts):
    axes = [_fft.fftfreq_index(n) for n in counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def dft(f: GridField) -> FrequencySet:
    """Full normalised spectrum ``(1/N) sum f(x) exp(-i k.(x - lo))``."""
    coeff = _fft.fftn(f.values) / f.values.size
    idx = _index_grid(f.counts)
    k = idx * (2.0 * np.pi / np.asarray(f.lengths))
    return FrequencySet(k, coeff.ravel())


def inverse_dft(spectrum: FrequencySet, like: GridField) -> np.ndarray:
    """Reconstruct grid samples of ``like``'s geometry from a full spectrum."""
    idx = np.rint(spectrum.k * np.asarray(like.lengths) / (2.0 * np.pi)).astype(int)
    arr = np.zeros(like.counts, dtype=np.complex128)
    arr[tuple((idx % np.asarray(like.counts)).T)] = spectrum.coeff
    return np.real(_fft.fftn(arr, inverse=True)) * arr.size


def _first_nonzero_sign(k: np.ndarray) -> np.ndarray:
    nz = k != 0
    first = np.argmax(nz, axis=1)
    sign = np.sign(k[np.arange(len(k)), first])
    sign[~nz.any(axis=1)] = 1.0
    return sign


def fold_conjugates(spectrum: FrequencySet) -> FrequencySet:
    """Collapse ``(k, -k)`` pairs onto the canonical member (real fields).

    The canonical member's own coefficient is kept; a lone non-canonical
    entry (e.g. a Nyquist bin) is flipped and conjugated.
    """
    if len(spectrum) == 0:
        return spectrum
    sign = _first_nonzero_sign(spectrum.k)
    canon = spectrum.k * sign[:, None] + 0.0
    coeff = np.where(sign > 0, spectrum.coeff, np.conj(spectrum.coeff))
    perm = np.argsort(sign < 0, kind="stable")
    _, first = np.unique(canon[perm], axis=0, return_index=True)
    keep = perm[first]
    return FrequencySet(canon[keep], coeff[keep])


def _member_mask(selected: np.ndarray, full: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(full), dtype=bool)
    for k in selected:
        mask |= np.all(full == k, axis=1)
    return mask


def select_frequencies(spectrum: FrequencySet, lam: float, fold: bool = True) -> FrequencySet:
    """Keep frequencies with ``|c_k| > lam * max |c|``."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    if len(spectrum) == 0:
        raise AdaptError("empty spectrum")
    spec = fold_conjugates(spectrum) if fold else spectrum
    mod = spec.moduli
    picked = spec.subset(mod > lam * mod.max())
    if len(picked) == 0:
        raise AdaptError("no frequency exceeds the selection threshold (all-zero field?)")
    return picked


def coverage_check(selected: FrequencySet, full: FrequencySet, delta: float):
    """Fraction of spectral energy of ``full`` carried by frequencies in ``selected``.

    Membership is decided on canonical vectors, so ``full`` may be either the
    raw or the folded spectrum. Returns ``(passed, ratio)``.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    total = full.energy()
    if total == 0.0:
        return True, 1.0
    if len(selected) == 0:
        return False, 0.0
    sel = selected.k * _first_nonzero_sign(selected.k)[:, None] + 0.0
    full_canon = full.k * _first_nonzero_sign(full.k)[:, None] + 0.0
    mask = _member_mask(sel, full_canon)
    ratio = float(np.sum(np.abs(full.coeff[mask]) ** 2) / total)
    return ratio >= 1.0 - delta, ratio


# ---------------------------------------------------------------------------
# CSV round trips for external plotting

def write_grid_csv(f: GridField, path):
    pts = f.points()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(f.dim)] + ["value"])
        for p, v in zip(pts, f.values.ravel()):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def write_frequency_csv(fs: FrequencySet, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"k{i}" for i in range(fs.dim)] + ["modulus", "phase"])
        for k, c in fs:
            w.writerow([repr(float(v)) for v in k] + [repr(float(abs(c))), repr(float(np.angle(c)))])


def read_frequency_csv(path) -> FrequencySet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-2:] != ["modulus", "phase"]:
        raise FormatError(f"{path}: not a frequency CSV")
    dim = len(rows[0]) - 2
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, dim + 2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return FrequencySet(data[:, :dim], data[:, dim] * np.exp(1j * data[:, dim + 1]))


def bins_apart(k_a, k_b, lengths) -> np.ndarray:
    """Per-axis distance between two angular frequencies in DFT bins."""
    return np.abs(np.asarray(k_a) - np.asarray(k_b)) * np.asarray(lengths) / (2.0 * np.pi)


def save_path(p) -> Path:
    p = Path(p)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
