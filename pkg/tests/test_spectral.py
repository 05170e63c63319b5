import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqadapt import fft as F
from freqadapt.errors import AdaptError, FormatError, NumericalError, ShapeError
from freqadapt.spectral import (FrequencySet, GridField, canonical, coverage_check, dft,
                                even_extend, fold_conjugates, grid_nodes, inverse_dft,
                                read_frequency_csv, sample_grid, select_frequencies,
                                write_frequency_csv, write_grid_csv)


def naive_dft(x):
    """Direct O(N^2) sum along every axis, no factorisation."""
    out = np.asarray(x, dtype=complex)
    for ax in range(out.ndim):
        n = out.shape[ax]
        j = np.arange(n)
        W = np.exp(-2j * np.pi * np.outer(j, j) / n)
        out = np.moveaxis(np.tensordot(W, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def naive_loop(x):
    n = len(x)
    return np.array([sum(x[j] * np.exp(-2j * np.pi * k * j / n) for j in range(n))
                     for k in range(n)])


# -- fft -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 7, 12, 17, 60])
def test_fft_matches_double_loop(n, rng):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    np.testing.assert_allclose(F.fft(x), naive_loop(x), rtol=0, atol=1e-10)


@pytest.mark.parametrize("n", [8, 16, 30, 45, 49, 64, 97, 128, 360, 1000, 2048])
def test_fft_matches_oracle_and_inverts(n, rng):
    x = rng.normal(size=(3, n))
    X = F.fft(x)
    np.testing.assert_allclose(X, np.stack([naive_dft(r) for r in x]), atol=1e-10 * np.sqrt(n))
    np.testing.assert_allclose(F.fft(X, inverse=True).real, x, atol=1e-12)


def test_fft_other_axis(rng):
    x = rng.normal(size=(24, 5))
    expect = np.stack([naive_loop(x[:, j]) for j in range(5)], axis=1)
    np.testing.assert_allclose(F.fft(x, axis=0), expect, atol=1e-10)


def test_smallest_factor():
    assert [F.smallest_factor(n) for n in (2, 9, 15, 49, 97, 1000)] == [2, 3, 3, 7, 97, 2]


def test_fftfreq_index():
    assert F.fftfreq_index(4).tolist() == [0, 1, -2, -1]
    assert F.fftfreq_index(5).tolist() == [0, 1, 2, -2, -1]


@settings(max_examples=30)
@given(st.lists(st.integers(8, 64), min_size=1, max_size=2), st.integers(0, 2**31))
def test_fftn_matches_naive(counts, seed):
    x = np.random.default_rng(seed).normal(size=counts)
    assert np.max(np.abs(F.fftn(x) - naive_dft(x))) < 1e-10


# -- grid and extension -------------------------------------------------------

def test_grid_nodes_endpoint_exclusive():
    assert grid_nodes(0.0, 1.0, 4).tolist() == [0.0, 0.25, 0.5, 0.75]


def test_sample_constant_network():
    g = sample_grid(lambda p: np.full(len(p), 2.5), [0.0, 0.0], [1.0, 2.0], [3, 4])
    assert g.values.shape == (3, 4) and np.all(g.values == 2.5)


def test_sample_grid_row_major():
    g = sample_grid(lambda p: p[:, 0] * 10 + p[:, 1], [0, 0], [1, 1], [2, 2])
    assert g.values.tolist() == [[0.0, 0.5], [5.0, 5.5]]


def test_sample_grid_errors():
    with pytest.raises(ShapeError):
        sample_grid(lambda p: p[:, 0], [0], [1], [1])
    with pytest.raises(NumericalError):
        with np.errstate(divide="ignore"):
            sample_grid(lambda p: 1.0 / (p[:, 0] - 0.5), [0], [1], [4])


def test_even_extend_example():
    f = GridField((0.0,), (1.0,), (4,), np.array([1.0, 2.0, 3.0, 4.0]))
    e = even_extend(f, 0)
    assert e.lo == (-1.0,) and e.hi == (1.0,) and e.counts == (8,)
    # read circularly from the original origin: [a, b, c, d, d, c, b, a]
    circ = np.roll(e.values, -4)
    assert circ.tolist() == [1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0]


def test_even_extend_gives_real_spectrum_up_to_half_step_phase(rng):
    f = GridField((0.0,), (1.0,), (16,), rng.normal(size=16))
    spec = dft(even_extend(f, 0))
    # the mirror point sits half a step below the old origin; shifting the phase
    # reference there makes every coefficient real
    h = 1.0 / 16
    shifted = spec.coeff * np.exp(1j * spec.k[:, 0] * (1.0 - h / 2))
    assert np.max(np.abs(shifted.imag)) < 1e-10


def test_even_extension_of_even_signal_is_real():
    # an even, whole-sample-symmetric periodic signal has a purely real DFT
    n = 16
    x = np.arange(n) / n
    v = np.cos(2 * np.pi * 3 * x) + 0.2 * np.cos(2 * np.pi * 5 * x)
    spec = dft(GridField((0.0,), (1.0,), (n,), v))
    assert np.max(np.abs(spec.coeff.imag)) < 1e-10


def test_even_extend_axes_commute(rng):
    f = GridField((0.0, 0.0), (1.0, 2.0), (3, 5), rng.normal(size=(3, 5)))
    a = even_extend(even_extend(f, 0), 1)
    b = even_extend(even_extend(f, 1), 0)
    assert a.lo == b.lo and a.counts == b.counts
    assert np.array_equal(a.values, b.values)


def test_even_extend_bad_axis():
    f = GridField((0.0,), (1.0,), (4,), np.zeros(4))
    with pytest.raises(ShapeError):
        even_extend(f, 1)


# -- dft ---------------------------------------------------------------------

def test_dft_constant():
    spec = dft(GridField((0.0,), (1.0,), (8,), np.full(8, 3.0)))
    assert abs(spec.coeff[0] - 3.0) < 1e-12 and spec.k[0, 0] == 0.0
    assert np.max(np.abs(spec.coeff[1:])) < 1e-12


def test_dft_single_tone():
    x = np.arange(16) / 16
    spec = dft(GridField((0.0,), (1.0,), (16,), np.sin(2 * np.pi * 3 * x)))
    idx = np.rint(spec.k[:, 0] / (2 * np.pi)).astype(int)
    mod = spec.moduli
    on = np.abs(idx) == 3
    np.testing.assert_allclose(mod[on], 0.5, atol=1e-12)
    assert np.max(mod[~on]) < 1e-12


def test_dft_physical_units():
    x = grid_nodes(0.0, 2.0, 32)
    spec = dft(GridField((0.0,), (2.0,), (32,), np.cos(5 * np.pi * x)))
    top = spec.k[np.argmax(spec.moduli), 0]
    assert abs(abs(top) - 5 * np.pi) < 1e-12


@given(st.integers(0, 2**31))
def test_parseval(seed):
    v = np.random.default_rng(seed).normal(size=32)
    spec = dft(GridField((0.0,), (1.0,), (32,), v))
    assert abs(spec.energy() - np.mean(v ** 2)) / np.mean(v ** 2) < 1e-10


@settings(max_examples=20)
@given(st.lists(st.integers(2, 24), min_size=1, max_size=3), st.integers(0, 2**31))
def test_inverse_roundtrip(counts, seed):
    v = np.random.default_rng(seed).normal(size=counts)
    f = GridField((0.0,) * len(counts), (1.0,) * len(counts), tuple(counts), v)
    assert np.max(np.abs(inverse_dft(dft(f), f) - v)) < 1e-10


def test_dft_ordering_invariant(rng):
    f = GridField((0.0, 0.0), (1.0, 1.0), (6, 4), rng.normal(size=(6, 4)))
    spec = dft(f)
    l1 = np.abs(spec.k).sum(axis=1)
    assert np.all(np.diff(l1) >= 0)
    assert len(set(spec.keys())) == len(spec)


# -- FrequencySet, folding, selection ---------------------------------------

def test_frequencyset_sorted_and_validated():
    fs = FrequencySet(np.array([[3.0], [-1.0], [1.0]]), np.array([1, 2, 3]))
    assert fs.k[:, 0].tolist() == [-1.0, 1.0, 3.0]
    with pytest.raises(ShapeError):
        FrequencySet(np.array([[1.0], [1.0]]))
    with pytest.raises(ShapeError):
        FrequencySet(np.array([[1.0]]), np.array([1, 2]))


def test_canonical():
    assert canonical([0.0, -2.0, 1.0]).tolist() == [0.0, 2.0, -1.0]
    assert canonical([0.0, 0.0]).tolist() == [0.0, 0.0]


def test_fold_keeps_one_member_per_pair(rng):
    n = 10
    spec = dft(GridField((0.0,), (1.0,), (n,), rng.normal(size=n)))
    folded = fold_conjugates(spec)
    assert np.all(folded.k[:, 0] >= 0)
    assert len(folded) == n // 2 + 1
    keys = spec.keys()
    for k, c in folded:
        j = keys.index(tuple(k)) if tuple(k) in keys else keys.index(tuple(-k))
        assert abs(abs(c) - abs(spec.coeff[j])) < 1e-15


def test_threshold_arithmetic():
    fs = FrequencySet(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 0.5, 0.005]))
    assert select_frequencies(fs, 0.01).keys() == [(1.0,), (2.0,)]


def test_single_tone_any_lambda():
    x = grid_nodes(0.0, 1.0, 32)
    spec = dft(GridField((0.0,), (1.0,), (32,), np.sin(2 * np.pi * 5 * x)))
    for lam in (0.001, 0.5, 0.999):
        assert select_frequencies(spec, lam).keys() == [(10 * np.pi,)]


def test_selection_errors():
    with pytest.raises(AdaptError):
        select_frequencies(FrequencySet.empty(1), 0.1)
    with pytest.raises(AdaptError):
        select_frequencies(FrequencySet(np.array([[0.0], [1.0]]), np.zeros(2)), 0.1)
    with pytest.raises(ValueError):
        select_frequencies(FrequencySet(np.array([[1.0]])), 1.0)


@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_selection_scale_invariant(seed, c):
    v = np.random.default_rng(seed).normal(size=(12, 6))
    f = GridField((0.0, 0.0), (1.0, 1.0), (12, 6), v)
    g = GridField((0.0, 0.0), (1.0, 1.0), (12, 6), c * v)
    assert select_frequencies(dft(f), 0.3).keys() == select_frequencies(dft(g), 0.3).keys()


def band_limited(rng, dim, lam):
    counts = tuple(int(c) for c in rng.integers(8, 33, size=dim))
    support = set()
    n_tones = int(rng.integers(1, min(6, min(counts) // 2)))
    while len(support) < n_tones:
        idx = tuple(int(rng.integers(-(c // 2) + 1, c // 2)) for c in counts)
        key = tuple(canonical(np.array(idx, float)))
        support.add(key)
    amps = rng.uniform(10 * lam, 1.0, size=len(support))
    amps[0] = 1.0
    phases = rng.uniform(0, 2 * np.pi, size=len(support))
    pts = np.stack(np.meshgrid(*[np.arange(c) / c for c in counts], indexing="ij"), -1)
    vals = np.zeros(counts)
    for a, ph, idx in zip(amps, phases, support):
        arg = 2 * np.pi * (pts @ np.array(idx, float)) + ph
        vals += a * np.cos(arg) if any(idx) else a
    return GridField((0.0,) * dim, (1.0,) * dim, counts, vals), support


@pytest.mark.parametrize("dim", [1, 2])
def test_frequency_recovery_property(dim):
    rng = np.random.default_rng(dim)
    lam = 0.01
    for _ in range(50):
        f, support = band_limited(rng, dim, lam)
        got = {tuple(np.rint(np.array(k) / (2 * np.pi)).astype(int).tolist())
               for k in select_frequencies(dft(f), lam).keys()}
        assert got == {tuple(int(v) for v in s) for s in support}


# -- coverage ------------------------------------------------------------------

def test_coverage_trivial_cases(rng):
    spec = dft(GridField((0.0,), (1.0,), (8,), rng.normal(size=8)))
    ok, ratio = coverage_check(spec, spec, 0.0)
    assert ok and abs(ratio - 1.0) < 1e-12
    assert coverage_check(FrequencySet.empty(1), spec, 0.5) == (False, 0.0)


def test_coverage_dominant_tone():
    x = grid_nodes(0.0, 1.0, 64)
    v = np.sin(2 * np.pi * 2 * x) + 0.1 * np.sin(2 * np.pi * 9 * x)
    spec = dft(GridField((0.0,), (1.0,), (64,), v))
    ok, ratio = coverage_check(select_frequencies(spec, 0.5), spec, 0.05)
    assert ok and abs(ratio - 1 / 1.01) < 1e-12


def test_coverage_bad_delta():
    with pytest.raises(ValueError):
        coverage_check(FrequencySet.empty(1), FrequencySet.empty(1), 1.0)


# -- csv ------------------------------------------------------------------------

def test_frequency_csv_roundtrip(tmp_path, rng):
    spec = dft(GridField((0.0, 0.0), (1.0, 2.0), (4, 6), rng.normal(size=(4, 6))))
    p = tmp_path / "f.csv"
    write_frequency_csv(spec, p)
    back = read_frequency_csv(p)
    assert back.keys() == spec.keys()
    np.testing.assert_allclose(back.coeff, spec.coeff, atol=1e-15)


def test_frequency_csv_rejects_garbage(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_frequency_csv(p)
    p.write_text("k0,modulus,phase\n1,x,0\n")
    with pytest.raises(FormatError):
        read_frequency_csv(p)


def test_grid_csv(tmp_path):
    f = GridField((0.0,), (1.0,), (2,), np.array([1.0, 2.0]))
    p = tmp_path / "g.csv"
    write_grid_csv(f, p)
    assert p.read_text().splitlines() == ["x0,value", "0.0,1.0", "0.5,2.0"]
