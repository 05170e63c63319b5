"""Compiled inner loops for the activation jet.

Sine and cosine come from one shared range reduction and two minimax
polynomials (the classic fdlibm kernels), written branch-free so the loop
vectorises. They agree with the platform libm to about one ulp. Arguments
beyond ``_REDUCE_MAX`` fall back to libm, where the three-part reduction
constant would stop being exact.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_S1 = -1.66666666666666324348e-01
_S2 = 8.33333333332248946124e-03
_S3 = -1.98412698298579493134e-04
_S4 = 2.75573137070700676789e-06
_S5 = -2.50507602534068634195e-08
_S6 = 1.58969099521155010221e-10
_C1 = 4.16666666666666019037e-02
_C2 = -1.38888888888741095749e-03
_C3 = 2.48015872894767294178e-05
_C4 = -2.75573143513906633035e-07
_C5 = 2.08757232129817482790e-09
_C6 = -1.13596475577881948265e-11
# pi/2 split so that n * _PIO2_1 is exact for |n| < 2**20
_PIO2_1 = 1.57079632673412561417e+00
_PIO2_2 = 6.07710050630396597660e-11
_PIO2_3 = 2.02226624871116645580e-21
_INV_PIO2 = 6.36619772367581382433e-01
_REDUCE_MAX = 1.0e6

IDENTITY, SFM, SIN, COS, SIGMOID, TANH = range(6)


@nb.njit(cache=True, inline="always")
def sincos(z):
    n = np.floor(z * _INV_PIO2 + 0.5)
    r = ((z - n * _PIO2_1) - n * _PIO2_2) - n * _PIO2_3
    r2 = r * r
    s = r + r * r2 * (_S1 + r2 * (_S2 + r2 * (_S3 + r2 * (_S4 + r2 * (_S5 + r2 * _S6)))))
    hz = 0.5 * r2
    w = 1.0 - hz
    c = w + (((1.0 - w) - hz)
             + r2 * r2 * (_C1 + r2 * (_C2 + r2 * (_C3 + r2 * (_C4 + r2 * (_C5 + r2 * _C6))))))
    q = np.int64(n) if np.isfinite(n) else np.int64(0)
    odd = (q & 1) != 0
    sn = c if odd else s
    cs = s if odd else c
    sgn_s = -1.0 if (q & 2) != 0 else 1.0
    sgn_c = -1.0 if ((q + 1) & 2) != 0 else 1.0
    return sn * sgn_s, cs * sgn_c


@nb.njit(cache=True)
def sincos_array(z, s_out, c_out):
    """Sine and cosine of a flat array, written into the two outputs."""
    big = False
    for i in range(z.size):
        if np.abs(z[i]) > _REDUCE_MAX:
            big = True
    if big:
        for i in range(z.size):
            s_out[i] = np.sin(z[i])
            c_out[i] = np.cos(z[i])
    else:
        for i in range(z.size):
            a, b = sincos(z[i])
            s_out[i] = a
            c_out[i] = b


@nb.njit(cache=True)
def _derivatives(code, z, s0, s1, s2, s3):
    """Activation value and first three derivatives at every entry of ``z``."""
    n = z.size
    if code == IDENTITY:
        for i in range(n):
            s0[i] = z[i]
            s1[i] = 1.0
            s2[i] = 0.0
            s3[i] = 0.0
    elif code == SIGMOID:
        for i in range(n):
            v = 0.5 * (1.0 + np.tanh(0.5 * z[i]))
            d = v * (1.0 - v)
            s0[i] = v
            s1[i] = d
            s2[i] = d * (1.0 - 2.0 * v)
            s3[i] = d * (1.0 - 6.0 * v + 6.0 * v * v)
    elif code == TANH:
        for i in range(n):
            t = np.tanh(z[i])
            d = 1.0 - t * t
            s0[i] = t
            s1[i] = d
            s2[i] = -2.0 * t * d
            s3[i] = d * (6.0 * t * t - 2.0)
    else:
        sincos_array(z, s2, s3)  # scratch: s2 <- sin, s3 <- cos
        if code == SFM:
            for i in range(n):
                v = 0.5 * s2[i] + 0.5 * s3[i]
                d = 0.5 * s3[i] - 0.5 * s2[i]
                s0[i] = v
                s1[i] = d
                s2[i] = -v
                s3[i] = -d
        elif code == SIN:
            for i in range(n):
                sv = s2[i]
                cv = s3[i]
                s0[i] = sv
                s1[i] = cv
                s2[i] = -sv
                s3[i] = -cv
        else:
            for i in range(n):
                sv = s2[i]
                cv = s3[i]
                s0[i] = cv
                s1[i] = -sv
                s2[i] = -cv
                s3[i] = sv


@nb.njit(cache=True)
def act_forward(code, sd, out, s1, s2, s3):
    """Push a stacked jet through the activation.

    ``sd`` and ``out`` have shape ``(1+2D, N, w)``; ``s1..s3`` receive the
    derivatives at the value slot for reuse in the backward pass. Returns
    whether every entry of ``out`` is finite.
    """
    P = sd.shape[0]
    D = (P - 1) // 2
    m = sd.shape[1] * sd.shape[2]
    z = sd.reshape(P, m)
    o = out.reshape(P, m)
    _derivatives(code, z[0], o[0], s1.reshape(m), s2.reshape(m), s3.reshape(m))
    d1 = s1.reshape(m)
    d2 = s2.reshape(m)
    for i in range(D):
        for j in range(m):
            z1 = z[1 + i, j]
            o[1 + i, j] = d1[j] * z1
            o[1 + D + i, j] = d2[j] * z1 * z1 + d1[j] * z[1 + D + i, j]
    return _all_finite(o.reshape(P * m))


@nb.njit(cache=True, fastmath={"reassoc"})
def _all_finite(x):
    # inf * 0 and nan * 0 are nan, so the sum is zero exactly when x is finite;
    # reassociation only lets the reduction vectorise
    acc = 0.0
    for j in range(x.size):
        acc += x[j] * 0.0
    return acc == 0.0


@nb.njit(cache=True)
def act_backward(g, sd, s1, s2, s3, gS):
    P = sd.shape[0]
    D = (P - 1) // 2
    m = sd.shape[1] * sd.shape[2]
    z = sd.reshape(P, m)
    gf = g.reshape(P, m)
    out = gS.reshape(P, m)
    a1 = s1.reshape(m)
    a2 = s2.reshape(m)
    a3 = s3.reshape(m)
    for j in range(m):
        out[0, j] = gf[0, j] * a1[j]
    for i in range(D):
        for j in range(m):
            z1 = z[1 + i, j]
            g1 = gf[1 + i, j]
            g2 = gf[1 + D + i, j]
            out[0, j] += a2[j] * g1 * z1 + a3[j] * g2 * z1 * z1 + a2[j] * g2 * z[1 + D + i, j]
            out[1 + i, j] = g1 * a1[j] + 2.0 * g2 * a2[j] * z1
            out[1 + D + i, j] = g2 * a1[j]
