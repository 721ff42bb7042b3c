"""Compiled chain-model kernels (numba), numerically identical in intent to
the numpy versions in :mod:`panoc_nmpc.chain`; those remain the reference
implementation and are used when numba is unavailable.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

AVAILABLE = njit is not None


def _dynamics(x, u, M, m, D, L, a, tiny):
    nP = 3 * (M + 1)
    out = np.empty_like(x)
    for i in range(3 * M):
        out[i] = x[nP + i]
    for k in range(3):
        out[3 * M + k] = u[k]
    F = np.empty((M + 1, 3))
    for j in range(M + 1):
        if j == 0:
            d0, d1, d2 = x[0], x[1], x[2]
        else:
            d0 = x[3 * j] - x[3 * j - 3]
            d1 = x[3 * j + 1] - x[3 * j - 2]
            d2 = x[3 * j + 2] - x[3 * j - 1]
        n = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if not n >= tiny:
            return out, False
        s = D * (1.0 - L / n)
        F[j, 0] = s * d0
        F[j, 1] = s * d1
        F[j, 2] = s * d2
    for i in range(M):
        for k in range(3):
            out[nP + 3 * i + k] = (F[i + 1, k] - F[i, k]) / m + a[k]
    return out, True


def _vjp(x, w, M, m, D, L, tiny):
    nP = 3 * (M + 1)
    adj_x = np.zeros_like(x)
    for i in range(3 * M):
        adj_x[nP + i] = w[i]
    adj_u = np.empty(3)
    for k in range(3):
        adj_u[k] = w[3 * M + k]
    fb = np.empty(3)
    d = np.empty(3)
    for j in range(M + 1):
        if j == 0:
            for k in range(3):
                d[k] = x[k]
        else:
            for k in range(3):
                d[k] = x[3 * j + k] - x[3 * j - 3 + k]
        n = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        if not n >= tiny:
            return adj_x, adj_u, False
        dot = 0.0
        for k in range(3):
            v = 0.0
            if j >= 1:
                v += w[nP + 3 * (j - 1) + k]
            if j + 1 <= M:
                v -= w[nP + 3 * j + k]
            fb[k] = v / m
            dot += d[k] * fb[k]
        c1 = D * (1.0 - L / n)
        c2 = D * L * dot / (n * n * n)
        for k in range(3):
            dd = c1 * fb[k] + c2 * d[k]
            adj_x[3 * j + k] += dd
            if j >= 1:
                adj_x[3 * (j - 1) + k] -= dd
    return adj_x, adj_u, True


def _cost(x, u, M, beta, gw, delta, p_end):
    nP = 3 * (M + 1)
    val = 0.0
    for k in range(3):
        e = x[3 * M + k] - p_end[k]
        val += beta * e * e + delta * u[k] * u[k]
    for i in range(nP, x.shape[0]):
        val += gw * x[i] * x[i]
    return val


def _cost_grad(x, u, M, beta, gw, delta, p_end):
    nP = 3 * (M + 1)
    gx = np.zeros_like(x)
    gu = np.empty(3)
    for k in range(3):
        gx[3 * M + k] = 2.0 * beta * (x[3 * M + k] - p_end[k])
        gu[k] = 2.0 * delta * u[k]
    for i in range(nP, x.shape[0]):
        gx[i] = 2.0 * gw * x[i]
    return gx, gu


if AVAILABLE:
    dynamics = njit(cache=True)(_dynamics)
    vjp = njit(cache=True)(_vjp)
    cost = njit(cache=True)(_cost)
    cost_grad = njit(cache=True)(_cost_grad)
else:  # pragma: no cover
    dynamics = vjp = cost = cost_grad = None
