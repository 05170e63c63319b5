"""Benchmark PDEs, loss assembly and the causal time gate.

Every problem is a :class:`PdeProblem`: a box, a list of :class:`LossTerm`
(each with its own collocation points and the input directions whose jets it
needs), an optional hard-constraint :class:`~freqadapt.network.Ansatz` and an
optional exact/reference solution used for relative L2 errors.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .autodiff import Jet, Tensor, concat, square
from .errors import ConfigError, ShapeError
from .network import Ansatz, ScaleNetwork, forward, forward_stacked
from .spectral import grid_points

PI = np.pi


@dataclass(frozen=True)
class CausalGate:
    """Residual weight ``(1 - tanh(steepness * (t - mu))) / 2`` with a growing shift."""

    mu: float = 0.0
    steepness: float = 5.0
    rate: float = 0.002
    sensitivity: float = 10.0

    def weight(self, t):
        return 0.5 * (1.0 - np.tanh(self.steepness * (np.asarray(t, dtype=np.float64) - self.mu)))


def gate_update(g: CausalGate, residual_loss: float) -> CausalGate:
    """``mu += rate * exp(-sensitivity * L_r)``."""
    if residual_loss < 0:
        raise ValueError("residual loss must be non-negative")
    return replace(g, mu=g.mu + g.rate * np.exp(-g.sensitivity * residual_loss))


@dataclass
class LossTerm:
    name: str
    points: np.ndarray
    residual: Callable[[Jet, np.ndarray], Tensor]
    weight: float = 1.0
    directions: tuple = ()
    gated: bool = False
    # (lo, hi, counts) of the cell grid the points were drawn from, if resamplable
    cells: tuple | None = None


@dataclass
class PdeProblem:
    name: str
    dim: int
    out_dim: int
    lo: tuple
    hi: tuple
    terms: list
    ansatz: Ansatz = field(default_factory=Ansatz)
    exact: Callable | None = None
    time_axis: int | None = None
    causal: bool = False
    extend_axes: tuple = ()
    spectrum_channel: int = 0
    eval_counts: tuple = ()
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = tuple(float(v) for v in self.lo)
        self.hi = tuple(float(v) for v in self.hi)
        if not self.eval_counts:
            self.eval_counts = (1000,) * self.dim
        self._eval = None

    def resample(self, rng) -> "PdeProblem":
        """Copy with every cell-grid term redrawn uniformly inside its cells."""
        terms = [replace(t, points=interior_grid(*t.cells, rng=rng)) if t.cells else t
                 for t in self.terms]
        out = replace(self, terms=terms)
        out._eval = self._eval
        return out

    def term(self, name) -> LossTerm:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)

    def solution(self, net: ScaleNetwork) -> Callable:
        """The trained surrogate as a plain ``(N, d) -> (N, out)`` function."""
        return lambda X: forward(net, self.ansatz, X)

    def eval_grid(self):
        if self._eval is None:
            pts = grid_points(self.lo, self.hi, self.eval_counts)
            ref = None if self.exact is None else np.asarray(self.exact(pts)).reshape(len(pts), -1)
            self._eval = (pts, ref)
        return self._eval

    def relative_l2(self, net: ScaleNetwork):
        """``||u - u_net|| / ||u||`` on the evaluation grid, ``None`` without a reference."""
        pts, ref = self.eval_grid()
        if ref is None:
            return None
        pred = forward(net, self.ansatz, pts).reshape(ref.shape)
        return float(np.linalg.norm(pred - ref) / np.linalg.norm(ref))

    def pointwise_error(self, net: ScaleNetwork):
        pts, ref = self.eval_grid()
        if ref is None:
            return pts, None
        return pts, np.abs(forward(net, self.ansatz, pts).reshape(ref.shape) - ref)


def loss(problem: PdeProblem, net: ScaleNetwork, gate: CausalGate | None = None):
    """Weighted sum of mean squared term residuals.

    Returns ``(total, components)`` where ``components`` maps term name to the
    unweighted (but gated, where applicable) mean squared residual.
    """
    total = None
    comps = {}
    for term in problem.terms:
        S = forward_stacked(net, problem.ansatz, term.points, term.directions)
        r = term.residual(Jet(S, term.directions), term.points)
        sq = square(r)
        if term.gated and gate is not None:
            sq = sq * gate.weight(term.points[:, problem.time_axis])[:, None]
        c = sq.sum() * (1.0 / len(term.points))
        comps[term.name] = float(c.data)
        wc = c * term.weight
        total = wc if total is None else total + wc
    return total, comps


# ---------------------------------------------------------------------------
# collocation helpers

def interior_grid(lo, hi, counts, rng=None) -> np.ndarray:
    """Cell-centred uniform grid strictly inside the box.

    With ``rng`` each point is instead drawn uniformly inside its own cell.
    """
    axes = [l + (np.arange(n) + 0.5) * (h - l) / n for l, h, n in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if rng is not None:
        step = (np.asarray(hi, dtype=np.float64) - np.asarray(lo, dtype=np.float64)) / np.asarray(counts)
        pts = pts + (rng.random(pts.shape) - 0.5) * step
    return pts


def _col(a):
    return np.asarray(a, dtype=np.float64).reshape(-1, 1)


def _edge(fixed_axis, value, other_axis_nodes, dim=2):
    pts = np.zeros((len(other_axis_nodes), dim))
    pts[:, fixed_axis] = value
    pts[:, 1 - fixed_axis] = other_axis_nodes
    return pts


# ---------------------------------------------------------------------------
# benchmarks

def poisson_problem(high=200 * PI, amp=0.1, n_interior=1000, eval_count=1000,
                    w_r=1.0, w_b=1.0):
    """``-u'' = f`` on (0, 1), ``u(0) = u(1) = 0``, ``u = sin(2 pi x) + amp sin(high x)``."""

    def exact(X):
        x = np.asarray(X)[:, 0]
        return _col(np.sin(2 * PI * x) + amp * np.sin(high * x))

    def source(x):
        return 4 * PI ** 2 * np.sin(2 * PI * x) + amp * high ** 2 * np.sin(high * x)

    cells = ((0.0,), (1.0,), (n_interior,))
    X_b = np.array([[0.0], [1.0]])
    terms = [
        LossTerm("residual", interior_grid(*cells), lambda j, X: -j.d2(0) - _col(source(X[:, 0])),
                 w_r, (0,), cells=cells),
        LossTerm("boundary", X_b, lambda j, X: j.value, w_b),
    ]
    return PdeProblem("poisson", 1, 1, (0.0,), (1.0,), terms, Ansatz(), exact,
                      eval_counts=(eval_count,),
                      constants={"high": high, "amp": amp, "n_interior": n_interior,
                                 "w_r": w_r, "w_b": w_b})


def heat_problem(freq=500 * PI, interior=(64, 32), n_boundary=200, eval_counts=(1000, 50),
                 w_r=1.0, w_b=1.0):
    """``u_t = u_xx / freq^2`` on (0,1)x(0,1], ``u = exp(-t) sin(freq x)``; hard initial value."""
    kappa = 1.0 / freq ** 2

    def exact(X):
        X = np.asarray(X)
        return _col(np.exp(-X[:, 1]) * np.sin(freq * X[:, 0]))

    def u0(x):
        s, c = np.sin(freq * x), np.cos(freq * x)
        return _col(s), _col(freq * c), _col(-freq ** 2 * s)

    cells = ((0.0, 0.0), (1.0, 1.0), tuple(interior))
    tb = (np.arange(n_boundary) + 0.5) / n_boundary
    X_b = np.concatenate([_edge(0, 0.0, tb), _edge(0, 1.0, tb)])
    terms = [
        LossTerm("residual", interior_grid(*cells), lambda j, X: j.d1(1) - kappa * j.d2(0), w_r,
                 (0, 1), cells=cells),
        LossTerm("boundary", X_b, lambda j, X: j.value, w_b),
    ]
    return PdeProblem("heat", 2, 1, (0.0, 0.0), (1.0, 1.0), terms,
                      Ansatz("initial_value", u0, 0, 1), exact, time_axis=1,
                      extend_axes=(1,), eval_counts=tuple(eval_counts),
                      constants={"freq": freq, "kappa": kappa, "interior": list(interior),
                                 "n_boundary": n_boundary, "w_r": w_r, "w_b": w_b})


def wave_problem(c2=25.0, interior=(32, 64), n_boundary=200, n_initial=200,
                 eval_counts=(100, 100), w_u=1000.0, w_ut=1000.0, w_r=1.0, causal=True):
    """``u_tt = 25 u_xx``, ``u = sin(2 pi x) cos(10 pi t) + sin(4 pi x) cos(20 pi t)``.

    Initial displacement is built into the ansatz; the velocity condition,
    boundary and (gated) residual are penalised.
    """

    def exact(X):
        x, t = np.asarray(X)[:, 0], np.asarray(X)[:, 1]
        return _col(np.sin(2 * PI * x) * np.cos(10 * PI * t) + np.sin(4 * PI * x) * np.cos(20 * PI * t))

    def u0(x):
        v = np.sin(2 * PI * x) + np.sin(4 * PI * x)
        d = 2 * PI * np.cos(2 * PI * x) + 4 * PI * np.cos(4 * PI * x)
        dd = -(2 * PI) ** 2 * np.sin(2 * PI * x) - (4 * PI) ** 2 * np.sin(4 * PI * x)
        return _col(v), _col(d), _col(dd)

    cells = ((0.0, 0.0), (1.0, 1.0), tuple(interior))
    tb = (np.arange(n_boundary) + 0.5) / n_boundary
    X_b = np.concatenate([_edge(0, 0.0, tb), _edge(0, 1.0, tb)])
    X_0 = _edge(1, 0.0, (np.arange(n_initial) + 0.5) / n_initial)
    terms = [
        LossTerm("boundary", X_b, lambda j, X: j.value, w_u),
        LossTerm("initial_velocity", X_0, lambda j, X: j.d1(1), w_ut, (1,)),
        LossTerm("residual", interior_grid(*cells), lambda j, X: j.d2(1) - c2 * j.d2(0), w_r,
                 (0, 1), gated=causal, cells=cells),
    ]
    return PdeProblem("wave", 2, 1, (0.0, 0.0), (1.0, 1.0), terms,
                      Ansatz("initial_value", u0, 0, 1), exact, time_axis=1, causal=causal,
                      extend_axes=(1,), eval_counts=tuple(eval_counts),
                      constants={"c2": c2, "interior": list(interior), "n_boundary": n_boundary,
                                 "n_initial": n_initial, "w_u": w_u, "w_ut": w_ut, "w_r": w_r})


def schrodinger_initial(x, eps):
    """``exp{(i/eps)[i(x-1)^2/2 + 2(x-1) + ln(1/(pi eps))/4]}`` and its x-derivatives."""
    x = np.asarray(x, dtype=np.float64)
    phase = 0.5j * (x - 1) ** 2 + 2 * (x - 1) + 0.25 * np.log(1.0 / (PI * eps))
    psi = np.exp(1j * phase / eps)
    dphi = 1j * (x - 1) + 2
    d1 = (1j / eps) * dphi * psi
    d2 = ((1j / eps) * 1j + ((1j / eps) * dphi) ** 2) * psi
    return psi, d1, d2


def schrodinger_residual_complex(psi, psi_t, psi_xx, x, eps):
    """``psi_t - (i eps/2) psi_xx + (i/eps) V psi`` with ``V = x^2/2``."""
    V = 0.5 * np.asarray(x) ** 2
    return psi_t - 0.5j * eps * psi_xx + 1j / eps * V * psi


def schrodinger_residual_split(re, im, re_t, im_t, re_xx, im_xx, x, eps):
    """Real/imaginary parts of the residual, written without complex numbers."""
    V = 0.5 * x ** 2
    r_re = re_t + 0.5 * eps * im_xx - (V / eps) * im
    r_im = im_t - 0.5 * eps * re_xx + (V / eps) * re
    return r_re, r_im


class SchrodingerReference:
    """Strang-split Fourier integrator on the periodic interval ``[0, L)``.

    Snapshots are cached by step count; ``__call__`` evaluates the complex
    solution at arbitrary ``(x, t)`` by exact trigonometric interpolation, with
    ``t`` rounded to the nearest multiple of ``dt``.
    """

    def __init__(self, eps=0.05, length=PI, n_modes=2048, dt=1e-4):
        self.eps, self.length, self.n, self.dt = eps, length, n_modes, dt
        self.x = np.arange(n_modes) * (length / n_modes)
        self.xi = 2 * PI * np.fft.fftfreq(n_modes, d=length / n_modes)
        V = 0.5 * self.x ** 2
        self._half_potential = np.exp(-0.5j * dt * V / eps)
        self._kinetic = np.exp(-0.5j * eps * dt * self.xi ** 2)
        self._snap = {0: schrodinger_initial(self.x, eps)[0]}

    def step(self, psi):
        psi = self._half_potential * psi
        psi = np.fft.ifft(self._kinetic * np.fft.fft(psi))
        return self._half_potential * psi

    def state_at(self, t) -> np.ndarray:
        target = int(round(t / self.dt))
        start = max(s for s in self._snap if s <= target)
        psi = self._snap[start]
        for _ in range(target - start):
            psi = self.step(psi)
        self._snap[target] = psi
        return psi

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.zeros(len(X), dtype=np.complex128)
        for t in np.unique(X[:, 1]):
            sel = X[:, 1] == t
            coef = np.fft.fft(self.state_at(t)) / self.n
            out[sel] = np.exp(1j * np.outer(X[sel, 0], self.xi)) @ coef
        return out


def schrodinger_problem(eps=0.05, T=0.5, interior=(64, 32), n_periodic=200,
                        eval_counts=(128, 10), w_r=1.0, w_b=1.0, reference=None):
    """Semi-classical Schroedinger on (0, pi) x (0, T], outputs ``(Re psi, Im psi)``."""
    L = PI
    if reference is None:
        reference = SchrodingerReference(eps, L)

    def exact(X):
        psi = reference(X)
        return np.stack([psi.real, psi.imag], axis=1)

    def u0(x):
        psi, d1, d2 = schrodinger_initial(x, eps)
        return tuple(np.stack([a.real, a.imag], axis=1) for a in (psi, d1, d2))

    def residual(j, X):
        x = _col(X[:, 0])
        V = 0.5 * x ** 2
        u, ut, uxx = j.value, j.d1(1), j.d2(0)
        re, im = u[:, 0:1], u[:, 1:2]
        r_re = ut[:, 0:1] + 0.5 * eps * uxx[:, 1:2] - im * (V / eps)
        r_im = ut[:, 1:2] - 0.5 * eps * uxx[:, 0:1] + re * (V / eps)
        return concat([r_re, r_im], axis=1)

    def periodic(j, X):
        n = len(X) // 2
        return concat([j.value[:n] - j.value[n:], j.d1(0)[:n] - j.d1(0)[n:]], axis=1)

    cells = ((0.0, 0.0), (L, T), tuple(interior))
    tp = (np.arange(n_periodic) + 0.5) * T / n_periodic
    X_p = np.concatenate([_edge(0, 0.0, tp), _edge(0, L, tp)])
    terms = [
        LossTerm("residual", interior_grid(*cells), residual, w_r, (0, 1), cells=cells),
        LossTerm("periodic", X_p, periodic, w_b, (0,)),
    ]
    return PdeProblem("schrodinger", 2, 2, (0.0, 0.0), (L, T), terms,
                      Ansatz("initial_value", u0, 0, 1), exact, time_axis=1,
                      extend_axes=(1,), spectrum_channel=0, eval_counts=tuple(eval_counts),
                      constants={"eps": eps, "T": T, "interior": list(interior),
                                 "n_periodic": n_periodic, "w_r": w_r, "w_b": w_b,
                                 "reference_modes": reference.n, "reference_dt": reference.dt})


FIT_TARGETS = {
    "sin40": lambda x: np.sin(40 * PI * x),
    "two_tone": lambda x: np.sin(PI * x) + np.sin(100 * PI * x),
    "sin2": lambda x: np.sin(2 * PI * x),
}


def fit_problem(target, lo=(0.0,), hi=(1.0,), n=1000, eval_count=1000, name="fit"):
    """Plain regression ``min mean |u - f|^2`` as a degenerate problem (residual ``u - f``)."""
    if isinstance(target, str):
        try:
            name, target = target, FIT_TARGETS[target]
        except KeyError:
            raise ConfigError(f"unknown fit target {target!r}") from None
    lo, hi = tuple(lo), tuple(hi)
    if len(lo) != 1:
        raise ShapeError("fit targets are one-dimensional")
    cells = (lo, hi, (n,))
    terms = [LossTerm("residual", interior_grid(*cells), lambda j, X: j.value - _col(target(X[:, 0])),
                      cells=cells)]
    return PdeProblem(name, 1, 1, lo, hi, terms, Ansatz(), lambda P: _col(target(np.asarray(P)[:, 0])),
                      eval_counts=(eval_count,), constants={"n": n})
