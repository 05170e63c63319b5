"""Multi-scale networks: feature embeddings, sub-networks and their weighted sum.

A :class:`ScaleNetwork` owns one flat parameter vector ``theta``; every
weight matrix and bias is a reshaped view into it, so the optimizer can work
on ``theta`` directly while the tape sees individual leaves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, get_activation, jet_activation, jet_linear
from .errors import AdaptError, ConfigError, ShapeError

VARIANTS = ("identity", "downscale", "fourier", "hybrid")
_PER_K = {"downscale": 1, "fourier": 2, "hybrid": 3}


def sfm_activation(x):
    return 0.5 * np.sin(x) + 0.5 * np.cos(x)


def glorot_init(shape, rng) -> np.ndarray:
    """Glorot-normal weights, ``N(0, 2 / (fan_in + fan_out))``.

    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng)
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ShapeError("glorot_init needs a positive shape")
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape)


@dataclass
class Embedding:
    """Input feature map.

    ``freqs`` holds one angular-frequency vector per row. Per vector ``k`` the
    features are ``k.x`` (downscale), ``sin, cos`` of ``k.x`` (fourier) or
    ``k.x, cos, sin`` (hybrid). ``identity`` passes ``x`` through.
    """

    variant: str
    freqs: np.ndarray = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown embedding {self.variant!r}")
        if self.variant == "identity":
            self.freqs = None
            return
        f = np.asarray(self.freqs, dtype=np.float64)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2 or len(f) == 0:
            raise ShapeError(f"{self.variant} embedding needs at least one frequency vector")
        self.freqs = f

    @classmethod
    def downscale(cls, scale, dim):
        """``scale * x`` written as one frequency vector per coordinate axis."""
        return cls("downscale", scale * np.eye(dim))

    def width(self, dim: int) -> int:
        if self.variant == "identity":
            return dim
        return _PER_K[self.variant] * len(self.freqs)

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.freqs is not None and X.shape[1] != self.freqs.shape[1]:
            raise ShapeError(f"input dim {X.shape[1]} != frequency dim {self.freqs.shape[1]}")
        return X

    def __call__(self, X) -> np.ndarray:
        return self.jet(X, ())[0]

    def jet(self, X, directions) -> np.ndarray:
        """Stacked jet ``(1 + 2D, N, width)`` of the features. No parameters involved."""
        X = self._check(X)
        if self.variant == "identity":
            return ad.input_jet(X, directions)
        D = len(directions)
        proj = X @ self.freqs.T                       # (N, m)
        kd = self.freqs[:, list(directions)].T        # (D, m)
        n, m = proj.shape
        out = np.zeros((1 + 2 * D, n, m, _PER_K[self.variant]))
        if self.variant == "downscale":
            out[0, :, :, 0] = proj
            out[1:1 + D, :, :, 0] = kd[:, None, :]
        else:
            s, c = np.sin(proj), np.cos(proj)
            # slot order within each frequency
            si, ci = (0, 1) if self.variant == "fourier" else (2, 1)
            out[0, :, :, si] = s
            out[0, :, :, ci] = c
            out[1:1 + D, :, :, si] = kd[:, None, :] * c
            out[1:1 + D, :, :, ci] = -kd[:, None, :] * s
            out[1 + D:, :, :, si] = -(kd ** 2)[:, None, :] * s
            out[1 + D:, :, :, ci] = -(kd ** 2)[:, None, :] * c
            if self.variant == "hybrid":
                out[0, :, :, 0] = proj
                out[1:1 + D, :, :, 0] = kd[:, None, :]
        return out.reshape(1 + 2 * D, n, m * _PER_K[self.variant])

    def to_dict(self):
        return {"variant": self.variant,
                "freqs": None if self.freqs is None else self.freqs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["variant"], d["freqs"])


def embed(e: Embedding, x) -> np.ndarray:
    """Features of a single point ``x``."""
    return e(np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :])[0]


def mlp_param_count(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


class SubNetwork:
    """Fully connected net; activation on hidden layers, linear output."""

    def __init__(self, sizes, activation="sfm", weights=None, biases=None):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ShapeError(f"bad layer sizes {sizes}")
        self.activation = get_activation(activation)
        self.weights = weights if weights is not None else [
            Tensor(np.zeros((a, b)), requires_grad=True) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.biases = biases if biases is not None else [
            Tensor(np.zeros(b), requires_grad=True) for b in self.sizes[1:]]
        for W, (a, b) in zip(self.weights, zip(self.sizes[:-1], self.sizes[1:])):
            if W.data.shape != (a, b):
                raise ShapeError("weight shapes do not match layer sizes")

    @property
    def n_params(self):
        return mlp_param_count(self.sizes)

    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def jet(self, S, check=True) -> Tensor:
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            S = jet_linear(S, W, b)
            if i < last:
                # non-finite pre-activations surface as non-finite outputs
                S = jet_activation(S, self.activation, layer=i if check else None)
            elif check:
                ad.check_finite(S, layer=i)
        return S


class ScaleNetwork:
    """``y(x) = sum_j h_j * SubNetwork_j(embedding_j(x))``."""

    def __init__(self, embeddings, hidden, in_dim, out_dim=1, h=None, h_mode="fixed",
                 activation="sfm", seed=0, theta=None):
        if h_mode not in ("fixed", "learnable"):
            raise ConfigError(f"h_mode must be 'fixed' or 'learnable', not {h_mode!r}")
        self.embeddings = list(embeddings)
        if not self.embeddings:
            raise ConfigError("a scale network needs at least one sub-network")
        self.hidden = [int(w) for w in hidden]
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.h_mode = h_mode
        self.activation = activation
        self.seed = int(seed)
        n_sub = len(self.embeddings)
        h0 = np.ones(n_sub) if h is None else np.asarray(h, dtype=np.float64).ravel()
        if len(h0) != n_sub:
            raise ShapeError(f"{len(h0)} aggregation weights for {n_sub} sub-networks")
        self.layer_sizes = [[e.width(self.in_dim)] + self.hidden + [self.out_dim]
                            for e in self.embeddings]
        n = sum(mlp_param_count(s) for s in self.layer_sizes)
        if h_mode == "learnable":
            n += n_sub
        if theta is None:
            self.theta = np.zeros(n)
            self._bind()
            self._glorot(h0)
        else:
            self.theta = np.array(theta, dtype=np.float64)
            if self.theta.shape != (n,):
                raise ShapeError(f"expected {n} parameters, got {self.theta.shape}")
            self._h_fixed = h0.copy()
            self._bind()

    def _bind(self):
        """Create Tensor leaves that view slices of ``theta``."""
        pos = 0
        self.subnets = []
        for sizes in self.layer_sizes:
            ws, bs = [], []
            for a, b in zip(sizes[:-1], sizes[1:]):
                ws.append(Tensor(self.theta[pos:pos + a * b].reshape(a, b), requires_grad=True))
                pos += a * b
                bs.append(Tensor(self.theta[pos:pos + b], requires_grad=True))
                pos += b
            self.subnets.append(SubNetwork(sizes, self.activation, ws, bs))
        if self.h_mode == "learnable":
            self.h_tensor = Tensor(self.theta[pos:pos + len(self.subnets)], requires_grad=True)
        else:
            self.h_tensor = None

    def _glorot(self, h0):
        rng = np.random.default_rng(self.seed)
        for net in self.subnets:
            for W in net.weights:
                W.data[...] = glorot_init(W.data.shape, rng)
        if self.h_mode == "learnable":
            self.h_tensor.data[...] = h0
        else:
            self._h_fixed = h0.copy()

    # -----------------------------------------------------------------
    @property
    def h(self) -> np.ndarray:
        return self.h_tensor.data.copy() if self.h_mode == "learnable" else self._h_fixed.copy()

    @property
    def n_params(self) -> int:
        return self.theta.size

    def params(self) -> list[Tensor]:
        out = []
        for net in self.subnets:
            out += net.params()
        if self.h_tensor is not None:
            out.append(self.h_tensor)
        return out

    def frequency_vectors(self) -> np.ndarray:
        ks = [e.freqs for e in self.embeddings if e.freqs is not None]
        return np.concatenate(ks) if ks else np.zeros((0, self.in_dim))

    def jet(self, X, directions=(), check=True) -> Tensor:
        """Stacked output jet; recorded on the active tape, if any."""
        out = None
        for j, (emb, net) in enumerate(zip(self.embeddings, self.subnets)):
            y = net.jet(emb.jet(X, directions), check=check)
            hj = self.h_tensor[j] if self.h_tensor is not None else self._h_fixed[j]
            y = y * hj
            out = y if out is None else out + y
        return out

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.jet(X, (), check=False).data[0]

    def copy(self) -> "ScaleNetwork":
        return ScaleNetwork(self.embeddings, self.hidden, self.in_dim, self.out_dim, h=self.h,
                            h_mode=self.h_mode, activation=self.activation, seed=self.seed,
                            theta=self.theta.copy())

    def to_dict(self):
        return {
            "embeddings": [e.to_dict() for e in self.embeddings],
            "hidden": self.hidden,
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "layer_sizes": self.layer_sizes,
            "h": self.h.tolist(),
            "h_mode": self.h_mode,
            "activation": self.activation,
            "seed": self.seed,
            "theta": self.theta.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        net = cls([Embedding.from_dict(e) for e in d["embeddings"]], d["hidden"], d["in_dim"],
                  d["out_dim"], h=d["h"], h_mode=d["h_mode"], activation=d["activation"],
                  seed=d["seed"], theta=d["theta"])
        if net.layer_sizes != d["layer_sizes"]:
            raise ShapeError("stored layer sizes disagree with the embeddings")
        return net


# ---------------------------------------------------------------------------
# hard-constraint transforms

class Ansatz:
    """Output transform applied on top of the raw network.

    ``initial_value``: ``u = u0(x) + t * N(x, t)`` with ``u0`` given as a function
    returning ``(u0, u0_x, u0_xx)``, each of shape ``(N, out_dim)``.
    ``none`` and ``periodic_x`` leave the output unchanged (periodicity is
    penalised in the loss instead).
    """

    KINDS = ("none", "initial_value", "initial_value_and_velocity", "periodic_x")

    def __init__(self, kind="none", initial=None, space_axis=0, time_axis=1, velocity=None):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown ansatz {kind!r}")
        if kind.startswith("initial") and initial is None:
            raise ConfigError(f"{kind} ansatz needs the initial function")
        if kind == "initial_value_and_velocity" and velocity is None:
            raise ConfigError("initial_value_and_velocity ansatz needs the initial velocity")
        self.kind = kind
        self.initial = initial
        self.velocity = velocity
        self.space_axis = space_axis
        self.time_axis = time_axis

    @property
    def hard_initial(self):
        return self.kind.startswith("initial")

    def _space_jet(self, fn, X, directions):
        D = len(directions)
        n = X.shape[0]
        v, vx, vxx = (np.asarray(a, dtype=np.float64).reshape(n, -1)
                      for a in fn(X[:, self.space_axis]))
        J = np.zeros((1 + 2 * D, n, v.shape[1]))
        J[0] = v
        for i, c in enumerate(directions):
            if c == self.space_axis:
                J[1 + i] = vx
                J[1 + D + i] = vxx
        return J

    def _time_jet(self, X, directions, power):
        D = len(directions)
        t = X[:, self.time_axis]
        T = np.zeros((1 + 2 * D, X.shape[0], 1))
        T[0, :, 0] = t ** power
        for i, c in enumerate(directions):
            if c == self.time_axis:
                T[1 + i, :, 0] = power * t ** (power - 1)
                T[1 + D + i, :, 0] = power * (power - 1) * t ** (power - 2) if power > 1 else 0.0
        return T

    def apply(self, S: Tensor, X, directions) -> Tensor:
        """``u0 + t N`` (initial value) or ``u0 + t v0 + t^2 N`` (value and velocity)."""
        if not self.hard_initial:
            return S
        X = np.atleast_2d(X)
        U0 = self._space_jet(self.initial, X, directions)
        if self.kind == "initial_value":
            return ad.jet_mul_const(S, self._time_jet(X, directions, 1)) + U0
        t_jet = self._time_jet(X, directions, 1)
        V0 = ad.jet_mul_const(self._space_jet(self.velocity, X, directions), t_jet).data
        return ad.jet_mul_const(S, self._time_jet(X, directions, 2)) + (U0 + V0)


def forward_stacked(net: ScaleNetwork, ansatz: Ansatz | None, X, directions=(), check=True) -> Tensor:
    S = net.jet(X, directions, check=check)
    return S if ansatz is None else ansatz.apply(S, X, directions)


def forward(net: ScaleNetwork, ansatz: Ansatz | None, X) -> np.ndarray:
    """Network output (after the ansatz) at points ``X`` of shape ``(N, d)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return forward_stacked(net, ansatz, X, (), check=False).data[0]


# ---------------------------------------------------------------------------
# construction and frequency-driven rebuilding

def initial_network(in_dim, M0, hidden, out_dim=1, activation="sfm", h_mode="fixed", seed=0):
    """``M0`` sub-networks fed by ``2**j * x``, ``j = 0..M0-1``."""
    if M0 < 1:
        raise ConfigError("M0 must be at least 1")
    embs = [Embedding.downscale(2.0 ** j, in_dim) for j in range(M0)]
    return ScaleNetwork(embs, hidden, in_dim, out_dim, h=np.ones(M0), h_mode=h_mode,
                        activation=activation, seed=seed)


def chunk_sizes(n: int, m: int) -> list[int]:
    """``m`` contiguous chunks of ``floor(n/m)``; the last one takes the remainder."""
    base = n // m
    return [base] * (m - 1) + [n - base * (m - 1)]


def rebuild_criterion_A(freqs, hidden, out_dim=1, activation="sfm", h_mode="fixed", seed=0):
    """One hybrid-embedded sub-network per captured frequency, ``h_j = |c_j|``."""
    if len(freqs) == 0:
        raise AdaptError("cannot rebuild from an empty frequency set")
    embs = [Embedding("hybrid", k[None, :]) for k in freqs.k]
    return ScaleNetwork(embs, hidden, freqs.dim, out_dim, h=freqs.moduli, h_mode=h_mode,
                        activation=activation, seed=seed)


def rebuild_criterion_B(freqs, M0, hidden, out_dim=1, activation="sfm", h_mode="fixed", seed=0):
    """Split the ``|k|_1``-ordered set into ``M0`` chunks, one sub-network each.

    ``h_j`` is the sum of coefficient moduli over chunk ``j``.
    """
    if M0 <= 0:
        raise ConfigError("M0 must be positive")
    if len(freqs) == 0:
        raise AdaptError("cannot rebuild from an empty frequency set")
    if len(freqs) < M0:
        raise AdaptError(f"criterion B needs more than M0={M0} frequencies, got {len(freqs)}")
    bounds = np.concatenate([[0], np.cumsum(chunk_sizes(len(freqs), M0))])
    embs, h = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        embs.append(Embedding("hybrid", freqs.k[a:b]))
        h.append(freqs.moduli[a:b].sum())
    return ScaleNetwork(embs, hidden, freqs.dim, out_dim, h=h, h_mode=h_mode,
                        activation=activation, seed=seed)


def rebuild(freqs, M0, hidden, **kw):
    """Criterion A when the set fits the sub-network budget, otherwise B."""
    if len(freqs) <= M0:
        return rebuild_criterion_A(freqs, hidden, **kw)
    return rebuild_criterion_B(freqs, M0, hidden, **kw)


def feature_network(variant, k, hidden, in_dim=1, out_dim=1, activation="sfm", seed=0):
    """A single sub-network behind one embedding, e.g. a plain Fourier-feature net.

    ``variant="identity"`` gives a standard fully connected network (``k`` ignored).
    """
    if variant == "identity":
        emb = Embedding("identity")
    else:
        emb = Embedding(variant, np.atleast_2d(np.asarray(k, dtype=np.float64)).reshape(-1, in_dim))
    return ScaleNetwork([emb], hidden, in_dim, out_dim, activation=activation, seed=seed)
