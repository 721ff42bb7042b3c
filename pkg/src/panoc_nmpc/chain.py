"""Hanging chain of point masses controlled through the velocity of one end.

``M`` masses are connected by springs; the first spring is anchored at the
origin and the last end point ``p^{M+1}`` is a handle whose velocity is the
input. The state is ``x = (p^1, ..., p^{M+1}, v^1, ..., v^M)`` with
``3 (2M + 1)`` components, and

    pdd^i = (F_{i,i+1} - F_{i-1,i}) / m + a,
    F_{i,i+1} = D (1 - L / ||p^{i+1} - p^i||) (p^{i+1} - p^i).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _chain_kernels as _kernels
from .integrator import NonFiniteError, rk4_step
from .problem import ContinuousModel, Dims, ProblemSpec, SoftConstraintSpec
from .prox import ProxSpec

__all__ = [
    "ChainParams",
    "SingularityError",
    "chain_dynamics",
    "chain_vjps",
    "chain_stage_cost",
    "chain_soft_outputs",
    "chain_soft_vjp",
    "chain_model",
    "compute_equilibrium",
    "build_scenario",
    "state_dim",
    "unpack",
]

SINGULAR_DISTANCE = 1e-12
PERTURBATION_INPUT = (-1.0, 1.0, 1.0)
CONSTRAINED_AXIS = 1  # second Cartesian coordinate


class SingularityError(NonFiniteError):
    """Two consecutive chain points coincide."""


@dataclass(frozen=True)
class ChainParams:
    M: int = 5
    m: float = 0.03
    D: float = 0.1
    L: float = 0.033
    beta: float = 1.0
    gamma_w: float = 1.0
    delta: float = 0.01
    mu: tuple = (100.0, 100.0, 100.0, 10.0, 10.0, 10.0)
    p_end: tuple = (1.0, 0.0, 0.0)
    bound: float = -0.1
    a: tuple = (0.0, 0.0, -9.81)
    input_bound: float = 1.0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not (self.m > 0 and self.D > 0):
            raise ValueError("mass and spring constant must be positive")
        if self.L < 0:
            raise ValueError("rest length must be nonnegative")
        if min(self.beta, self.gamma_w, self.delta) < 0:
            raise ValueError("cost weights must be nonnegative")
        if len(self.mu) != self.M + 1:
            raise ValueError(f"mu needs M+1 = {self.M + 1} entries, got {len(self.mu)}")
        if any(w < 0 for w in self.mu):
            raise ValueError("mu must be nonnegative")

    def with_mu(self, mu) -> "ChainParams":
        return replace(self, mu=tuple(float(v) for v in mu))


def state_dim(M: int) -> int:
    return 3 * (2 * M + 1)


def unpack(params: ChainParams, x):
    """Return ``(p, v)`` views of shape ``(M+1, 3)`` and ``(M, 3)``."""
    M = params.M
    x = np.asarray(x, dtype=float)
    return x[: 3 * (M + 1)].reshape(M + 1, 3), x[3 * (M + 1):].reshape(M, 3)


def _springs(params: ChainParams, p):
    """Spring vectors d_j = p^{j+1} - p^j (p^0 = 0), their norms and forces."""
    d = np.empty_like(p)
    d[0] = p[0]
    np.subtract(p[1:], p[:-1], out=d[1:])
    norm = np.sqrt((d * d).sum(axis=1))
    if not norm.min() >= SINGULAR_DISTANCE:
        raise SingularityError("coincident consecutive chain points")
    scale = params.D * (1.0 - params.L / norm)
    return d, norm, scale[:, None] * d


def chain_dynamics(params: ChainParams, x, u) -> np.ndarray:
    M = params.M
    x = np.asarray(x, dtype=float)
    p = x[: 3 * (M + 1)].reshape(M + 1, 3)
    _, _, F = _springs(params, p)
    out = np.empty_like(x)
    out[: 3 * M] = x[3 * (M + 1):]
    out[3 * M: 3 * (M + 1)] = u
    acc = (F[1:] - F[:-1]) * (1.0 / params.m)
    acc += params.a
    out[3 * (M + 1):] = acc.ravel()
    return out


def chain_vjps(params: ChainParams, x, u, w):
    """Transpose Jacobians of :func:`chain_dynamics` applied to ``w``."""
    M = params.M
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    p = x[: 3 * (M + 1)].reshape(M + 1, 3)
    lam = w[3 * (M + 1):].reshape(M, 3)

    d, norm, _ = _springs(params, p)
    # force j enters acc_j with + (j >= 1) and acc_{j+1} with - (j+1 <= M)
    Fbar = np.zeros((M + 1, 3))
    Fbar[1:] = lam
    Fbar[:-1] -= lam
    Fbar *= 1.0 / params.m
    # dF/dd = D[(1 - L/|d|) I + L d d^T / |d|^3], symmetric
    c1 = params.D * (1.0 - params.L / norm)
    c2 = params.D * params.L * (d * Fbar).sum(axis=1) / norm**3
    dd = c1[:, None] * Fbar + c2[:, None] * d
    adj_x = np.empty_like(x)
    pbar = adj_x[: 3 * (M + 1)].reshape(M + 1, 3)
    pbar[:] = dd  # d_j = p^{j+1} - p^j: +dd_j to p^{j+1}, -dd_j to p^j
    pbar[:-1] -= dd[1:]
    adj_x[3 * (M + 1):] = w[: 3 * M]
    return adj_x, w[3 * M: 3 * (M + 1)].copy()


def chain_stage_cost(params: ChainParams, x, u):
    """Running cost and its gradients ``(value, grad_x, grad_u)``."""
    M = params.M
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    h = slice(3 * M, 3 * (M + 1))
    e = x[h] - params.p_end
    v = x[3 * (M + 1):]
    value = params.beta * (e @ e) + params.gamma_w * (v @ v) + params.delta * (u @ u)
    gx = np.zeros_like(x)
    gx[h] = 2.0 * params.beta * e
    gx[3 * (M + 1):] = 2.0 * params.gamma_w * v
    return float(value), gx, 2.0 * params.delta * u


def _stage_cost_value(params: ChainParams, x, u) -> float:
    M = params.M
    e = x[3 * M: 3 * (M + 1)] - params.p_end
    v = x[3 * (M + 1):]
    return float(params.beta * (e @ e) + params.gamma_w * (v @ v) + params.delta * (u @ u))


def chain_soft_outputs(params: ChainParams, x) -> np.ndarray:
    p, _ = unpack(params, x)
    return p[:, CONSTRAINED_AXIS].copy()


def chain_soft_vjp(params: ChainParams, x, w) -> np.ndarray:
    out = np.zeros(state_dim(params.M))
    out[CONSTRAINED_AXIS: 3 * (params.M + 1): 3] = w
    return out


def _compiled_model(params: ChainParams) -> ContinuousModel:
    M, m, D, L = params.M, float(params.m), float(params.D), float(params.L)
    a = np.asarray(params.a, float)
    p_end = np.asarray(params.p_end, float)
    beta, gw, delta = float(params.beta), float(params.gamma_w), float(params.delta)

    def f_c(x, u):
        out, ok = _kernels.dynamics(x, np.asarray(u, float), M, m, D, L, a, SINGULAR_DISTANCE)
        if not ok:
            raise SingularityError("coincident consecutive chain points")
        return out

    def vjp_f(x, u, w):
        adj_x, adj_u, ok = _kernels.vjp(x, w, M, m, D, L, SINGULAR_DISTANCE)
        if not ok:
            raise SingularityError("coincident consecutive chain points")
        return adj_x, adj_u

    def grad_ell(x, u):
        return _kernels.cost_grad(x, np.asarray(u, float), M, beta, gw, delta, p_end)

    return ContinuousModel(
        f_c=f_c,
        ell_c=lambda x, u: _kernels.cost(x, np.asarray(u, float), M, beta, gw, delta, p_end),
        vjp_fx=lambda x, u, w: vjp_f(x, u, w)[0],
        vjp_fu=lambda x, u, w: vjp_f(x, u, w)[1],
        grad_ell_x=lambda x, u: grad_ell(x, u)[0],
        grad_ell_u=lambda x, u: grad_ell(x, u)[1],
        vjp_f=vjp_f,
        grad_ell=grad_ell,
    )


def chain_model(params: ChainParams, compiled: Optional[bool] = None) -> ContinuousModel:
    """Continuous model for the chain.

    ``compiled=None`` uses the numba kernels when numba is installed and the
    numpy functions of this module otherwise.
    """
    if compiled is None:
        compiled = _kernels.AVAILABLE
    if compiled:
        if not _kernels.AVAILABLE:
            raise RuntimeError("numba is not installed")
        return _compiled_model(params)
    params = replace(params, a=np.asarray(params.a, float), p_end=np.asarray(params.p_end, float))

    def grad_ell(x, u):
        _, gx, gu = chain_stage_cost(params, x, u)
        return gx, gu

    return ContinuousModel(
        f_c=lambda x, u: chain_dynamics(params, x, u),
        ell_c=lambda x, u: _stage_cost_value(params, x, u),
        vjp_fx=lambda x, u, w: chain_vjps(params, x, u, w)[0],
        vjp_fu=lambda x, u, w: chain_vjps(params, x, u, w)[1],
        grad_ell_x=lambda x, u: grad_ell(x, u)[0],
        grad_ell_u=lambda x, u: grad_ell(x, u)[1],
        vjp_f=lambda x, u, w: chain_vjps(params, x, u, w),
        grad_ell=grad_ell,
    )


def chain_soft_spec(params: ChainParams) -> SoftConstraintSpec:
    k = params.M + 1
    return SoftConstraintSpec(
        stage=lambda x, u: chain_soft_outputs(params, x),
        terminal=lambda x: chain_soft_outputs(params, x),
        vjp_stage_x=lambda x, u, w: chain_soft_vjp(params, x, w),
        vjp_stage_u=lambda x, u, w: np.zeros(3),
        vjp_terminal_x=lambda x, w: chain_soft_vjp(params, x, w),
        lower=np.full(k, float(params.bound)),
        mu=np.asarray(params.mu, dtype=float),
    )


def _force_residual(params: ChainParams, q, p_end):
    p = np.vstack([q.reshape(params.M, 3), p_end])
    _, _, F = _springs(params, p)
    return (F[1:] - F[:-1] + params.m * np.asarray(params.a)).ravel()


def compute_equilibrium(params: ChainParams, p_end=None, tol=1e-11, max_iter=200) -> np.ndarray:
    """Static chain configuration with the handle held at ``p_end``.

    Damped Newton on the 3M force-balance residual with a forward-difference
    Jacobian, started from equally spaced points on the segment origin-p_end.
    ``tol`` bounds the force residual; accelerations are that divided by
    ``m``, hence the small default. Returns the full state (velocities zero).
    """
    M = params.M
    p_end = np.asarray(params.p_end if p_end is None else p_end, dtype=float)
    t = np.arange(1, M + 1)[:, None] / (M + 1)
    q = (t * p_end).ravel()
    res = _force_residual(params, q, p_end)
    for _ in range(max_iter):
        rn = np.max(np.abs(res))
        if rn <= tol:
            p = np.vstack([q.reshape(M, 3), p_end])
            return np.concatenate([p.ravel(), np.zeros(3 * M)])
        h = 1e-7 * (1.0 + np.abs(q))
        J = np.empty((q.size, q.size))
        for j in range(q.size):
            dq = np.zeros_like(q)
            dq[j] = h[j]
            J[:, j] = (_force_residual(params, q + dq, p_end) - res) / h[j]
        step = np.linalg.solve(J, -res)
        alpha = 1.0
        while alpha > 1e-8:
            try:
                trial = _force_residual(params, q + alpha * step, p_end)
            except SingularityError:
                trial = None
            if trial is not None and np.linalg.norm(trial) < (1 - 1e-4 * alpha) * np.linalg.norm(res):
                break
            alpha *= 0.5
        else:
            break
        q = q + alpha * step
        res = trial
    raise RuntimeError(f"equilibrium Newton did not converge (residual {np.max(np.abs(res)):.3e})")


def build_scenario(params: ChainParams, ts: float = 0.1, N: int = 40, compiled: Optional[bool] = None):
    """Reference equilibrium, perturbed initial state and the OCP from it.

    The initial state is the equilibrium pushed by the constant input
    ``(-1, 1, 1)`` for ``round(1 / ts)`` RK4 steps.
    """
    if not ts > 0:
        raise ValueError("ts must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    model = chain_model(params, compiled)
    x_ref = compute_equilibrium(params)
    x0 = x_ref.copy()
    u_pert = np.asarray(PERTURBATION_INPUT)
    for _ in range(int(round(1.0 / ts))):
        x0 = rk4_step(model, x0, u_pert, ts).x_next
    nx = state_dim(params.M)
    spec = ProblemSpec(
        dims=Dims(N=N, nx=nx, nu=3, m=(params.M + 1,) * (N + 1)),
        model=model,
        g=ProxSpec.inf_ball(params.input_bound),
        x_bar=x0,
        ts=ts,
        soft=chain_soft_spec(params),
    )
    return x0, x_ref, spec
