"""Reverse-mode tape over numpy arrays plus second-order input jets.

Input derivatives are carried forward as *stacked jets*: an array of shape
``(1 + 2*D, N, w)`` whose slot 0 holds values, slots ``1..D`` first
derivatives along ``D`` chosen input coordinates and slots ``D+1..2D`` the
matching pure second derivatives. The jet arithmetic is itself recorded on
the tape, so parameter gradients of derivative-based losses are exact.

Typical use::

    with Tape() as tape:
        loss = some_loss(params)
    grads = tape.gradient(loss, params)
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from ._kernels import act_backward as _act_backward
from ._kernels import act_forward as _act_forward
from .errors import InternalError, NumericalError, ShapeError

_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of every differentiable operation executed inside it."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def gradient(self, loss: "Tensor", wrt) -> list[np.ndarray]:
        """Replay the tape backwards from a scalar ``loss``."""
        if loss.data.size != 1:
            raise ShapeError("gradient needs a scalar loss")
        if loss.requires_grad and (loss.tape is None or loss.tape() is not self):
            raise InternalError("loss was not recorded on this tape")
        grads: dict[int, np.ndarray] = {}
        if loss.requires_grad:
            grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            parent_grads = node.backward_fn(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.data.shape:
                    raise InternalError(
                        f"gradient shape {pg.shape} != operand shape {parent.data.shape}")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        out = []
        for p in wrt:
            g = grads.get(id(p))
            out.append(np.zeros_like(p.data) if g is None else g)
        return out


class Tensor:
    """An array node. Leaves with ``requires_grad`` are trainable parameters."""

    __slots__ = ("data", "parents", "backward_fn", "requires_grad", "tape")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = ()
        self.backward_fn = None
        self.requires_grad = requires_grad
        self.tape = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return mul(self, 1.0 / c)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return total(self)

    def mean(self):
        return mul(total(self), 1.0 / self.data.size)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if _TAPES and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
        tape = _TAPES[-1]
        # weak back-reference: no tape <-> node cycle, so memory is freed promptly
        out.tape = weakref.ref(tape)
        tape.nodes.append(out)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _node(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"cannot multiply {a.data.shape} by {b.data.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def total(a: Tensor) -> Tensor:
    shape = a.data.shape
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def _elementwise(fn, dfn):
    def op(a: Tensor) -> Tensor:
        a = as_tensor(a)
        ad = a.data
        return _node(fn(ad), (a,), lambda g: (g * dfn(ad),))
    return op


sin = _elementwise(np.sin, np.cos)
cos = _elementwise(np.cos, lambda x: -np.sin(x))
exp = _elementwise(np.exp, np.exp)
tanh = _elementwise(np.tanh, lambda x: 1.0 - np.tanh(x) ** 2)


def getitem(a: Tensor, idx) -> Tensor:
    shape = a.data.shape

    basic = all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis
                for i in (idx if isinstance(idx, tuple) else (idx,)))

    def backward(g):
        full = np.zeros(shape)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _node(a.data[idx], (a,), backward)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


# --------------------------------------------------------------------------
# activations with derivatives up to third order (the jet backward needs s''')

class Activation:
    name = "identity"
    code = 0

    def derivs(self, z):
        one = np.ones_like(z)
        zero = np.zeros_like(z)
        return z, one, zero, zero

    def __call__(self, z):
        return self.derivs(np.asarray(z, dtype=np.float64))[0]


class SFM(Activation):
    """``0.5 sin(z) + 0.5 cos(z)``."""

    name = "sfm"
    code = 1

    def derivs(self, z):
        s, c = np.sin(z), np.cos(z)
        v = 0.5 * s + 0.5 * c
        d = 0.5 * c - 0.5 * s
        return v, d, -v, -d


class Sin(Activation):
    name = "sin"
    code = 2

    def derivs(self, z):
        s, c = np.sin(z), np.cos(z)
        return s, c, -s, -c


class Cos(Activation):
    name = "cos"
    code = 3

    def derivs(self, z):
        s, c = np.sin(z), np.cos(z)
        return c, -s, -c, s


class Sigmoid(Activation):
    name = "sigmoid"
    code = 4

    def derivs(self, z):
        v = 0.5 * (1.0 + np.tanh(0.5 * z))
        d = v * (1.0 - v)
        return v, d, d * (1.0 - 2.0 * v), d * (1.0 - 6.0 * v + 6.0 * v * v)


class Tanh(Activation):
    name = "tanh"
    code = 5

    def derivs(self, z):
        t = np.tanh(z)
        d = 1.0 - t * t
        return t, d, -2.0 * t * d, d * (6.0 * t * t - 2.0)


ACTIVATIONS = {cls.name: cls() for cls in (Activation, SFM, Sin, Cos, Sigmoid, Tanh)}


def get_activation(name: str) -> Activation:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


# --------------------------------------------------------------------------
# stacked-jet primitives

def n_directions(stacked_shape) -> int:
    return (stacked_shape[0] - 1) // 2


def _mm(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``a @ w`` for 2-D operands, routing rank-one shapes around BLAS gemm."""
    if w.shape[0] == 1:
        return a[:, :1] * w[0]
    if w.shape[1] == 1:
        return (a @ w[:, 0])[:, None]
    return a @ w


def jet_linear(S, W, b=None) -> Tensor:
    """Affine layer on a stacked jet; the bias only touches the value slot."""
    S, W = as_tensor(S), as_tensor(W)
    sd, wd = S.data, W.data
    if sd.shape[-1] != wd.shape[0]:
        raise ShapeError(f"jet width {sd.shape[-1]} does not match weight rows {wd.shape[0]}")
    flat_in = sd.reshape(-1, sd.shape[-1])
    out = _mm(flat_in, wd).reshape(sd.shape[:-1] + (wd.shape[1],))
    parents = (S, W)
    if b is not None:
        b = as_tensor(b)
        out[0] += b.data
        parents = (S, W, b)

    def backward(g):
        gf = g.reshape(-1, g.shape[-1])
        gS = _mm(gf, wd.T).reshape(sd.shape)
        gW = flat_in.T @ gf
        if b is None:
            return gS, gW
        return gS, gW, g[0].sum(axis=0)

    return _node(out, parents, backward)


def jet_activation(S, act: Activation, layer=None) -> Tensor:
    """Apply a scalar activation to a stacked jet by second-order chain rule.

    With ``layer`` set, a non-finite result raises :class:`NumericalError`
    naming that layer (the check rides along in the same pass).
    """
    S = as_tensor(S)
    sd = np.ascontiguousarray(S.data)
    if sd.ndim != 3 or sd.shape[0] % 2 == 0:
        raise ShapeError(f"expected a stacked jet of shape (1+2D, N, w), got {sd.shape}")
    out = np.empty_like(sd)
    s1, s2, s3 = (np.empty(sd.shape[1:]) for _ in range(3))
    ok = _act_forward(act.code, sd, out, s1, s2, s3)
    if layer is not None and not ok:
        raise NumericalError(f"non-finite values after layer {layer}", layer=layer)

    def backward(g):
        gS = np.empty_like(sd)
        _act_backward(np.ascontiguousarray(g), sd, s1, s2, s3, gS)
        return (gS,)

    return _node(out, (S,), backward)


def jet_mul_const(S, C: np.ndarray) -> Tensor:
    """Product of a stacked jet with a constant stacked jet ``C`` (Leibniz rule)."""
    S = as_tensor(S)
    sd = S.data
    C = np.asarray(C, dtype=np.float64)
    D = n_directions(sd.shape)
    if C.shape[0] != sd.shape[0]:
        raise ShapeError("constant jet has a different number of directions")
    c0, c1, c2 = C[0], C[1:1 + D], C[1 + D:]
    v, v1, v2 = sd[0], sd[1:1 + D], sd[1 + D:]
    out = np.empty(np.broadcast_shapes(sd.shape, C.shape))
    out[0] = c0 * v
    out[1:1 + D] = c1 * v + c0 * v1
    out[1 + D:] = c2 * v + 2.0 * c1 * v1 + c0 * v2

    def backward(g):
        g0, g1, g2 = g[0], g[1:1 + D], g[1 + D:]
        gS = np.empty_like(g)
        gS[0] = c0 * g0 + (c1 * g1).sum(axis=0) + (c2 * g2).sum(axis=0)
        gS[1:1 + D] = c0 * g1 + 2.0 * c1 * g2
        gS[1 + D:] = c0 * g2
        return (_unbroadcast(gS, sd.shape),)

    return _node(out, (S,), backward)


def check_finite(S: Tensor, layer=None):
    if not np.all(np.isfinite(S.data)):
        raise NumericalError(f"non-finite values after layer {layer}", layer=layer)


def input_jet(X: np.ndarray, directions) -> np.ndarray:
    """Stacked jet of the identity map x -> x along the given coordinates."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    D = len(directions)
    S = np.zeros((1 + 2 * D,) + X.shape)
    S[0] = X
    for i, c in enumerate(directions):
        if not 0 <= c < X.shape[1]:
            raise ShapeError(f"coordinate {c} out of range for input dimension {X.shape[1]}")
        S[1 + i, :, c] = 1.0
    return S


class Jet:
    """Read-only view of a stacked jet with named component access."""

    def __init__(self, stacked: Tensor, directions):
        self.stacked = as_tensor(stacked)
        self.directions = tuple(directions)

    def _slot(self, coord):
        try:
            return self.directions.index(coord)
        except ValueError:
            raise ShapeError(f"coordinate {coord} was not propagated in this jet") from None

    @property
    def value(self) -> Tensor:
        return self.stacked[0]

    def d1(self, coord) -> Tensor:
        return self.stacked[1 + self._slot(coord)]

    def d2(self, coord) -> Tensor:
        return self.stacked[1 + len(self.directions) + self._slot(coord)]


@dataclass(frozen=True)
class Jet2:
    value: float
    d1: float
    d2: float
    coordinate_index: int


def forward_jet(net_eval, point, coord: int) -> list[Jet2]:
    """Value, first and second derivative of every output of ``net_eval`` at one point.

    ``net_eval`` maps an input stacked jet (numpy array or Tensor) to an output
    stacked jet of shape ``(3, 1, n_out)``.
    """
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    S = net_eval(input_jet(x[None, :], (coord,)))
    S = S.data if isinstance(S, Tensor) else np.asarray(S)
    if not np.all(np.isfinite(S)):
        raise NumericalError("non-finite jet output")
    return [Jet2(float(S[0, 0, j]), float(S[1, 0, j]), float(S[2, 0, j]), coord)
            for j in range(S.shape[-1])]


def grad_params(loss_fn, params) -> np.ndarray:
    """Flattened gradient of the scalar ``loss_fn(params)`` for Tensor leaves ``params``."""
    with Tape() as tape:
        loss = loss_fn(params)
    grads = tape.gradient(as_tensor(loss), params)
    if not grads:
        return np.zeros(0)
    return np.concatenate([g.ravel() for g in grads])
