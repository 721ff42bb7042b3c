"""One-step RK4 discretization with an exact discrete adjoint.

The running cost is carried as an extra quadrature state through the same
four stages, so a single step returns both ``x_{n+1}`` and the integrated
stage cost. :func:`rk4_step_vjp` reverses those four stages using the tape
stored by :func:`rk4_step`; the result is the transpose Jacobian of the
discrete map, not a discretized continuous adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ContinuousModel

__all__ = ["NonFiniteError", "Rk4Step", "rk4_step", "rk4_step_vjp"]


class NonFiniteError(ArithmeticError):
    """A model evaluation produced NaN/Inf (or hit a singularity)."""


@dataclass(frozen=True)
class Rk4Step:
    x_next: np.ndarray
    stage_cost: float
    stage_tape: tuple  # the four stage states x1..x4


def _finite(value, what):
    if not np.isfinite(np.sum(value)):
        raise NonFiniteError(f"non-finite {what}")
    return value


def rk4_step(model: ContinuousModel, x, u, ts: float) -> Rk4Step:
    if not ts > 0:
        raise ValueError("ts must be positive")
    h = ts
    x1 = x
    # a non-finite stage derivative propagates into x_next, which is checked
    k1 = model.f_c(x1, u)
    c1 = model.ell_c(x1, u)
    x2 = x + (0.5 * h) * k1
    k2 = model.f_c(x2, u)
    c2 = model.ell_c(x2, u)
    x3 = x + (0.5 * h) * k2
    k3 = model.f_c(x3, u)
    c3 = model.ell_c(x3, u)
    x4 = x + h * k3
    k4 = model.f_c(x4, u)
    c4 = model.ell_c(x4, u)

    x_next = _finite(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), "state")
    cost = float(_finite((h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4), "stage cost"))
    return Rk4Step(x_next=x_next, stage_cost=cost, stage_tape=(x1, x2, x3, x4))


def rk4_step_vjp(step: Rk4Step, model: ContinuousModel, x, u, ts: float, w_x, w_c: float):
    """Pull ``(w_x, w_c)`` back through one RK4 step; returns ``(adj_x, adj_u)``."""
    h = ts
    x1, x2, x3, x4 = step.stage_tape
    w_x = np.asarray(w_x, dtype=float)
    w_c = float(w_c)

    # weights of k_i / c_i in the final combination
    kb = [h / 6.0 * w_x, h / 3.0 * w_x, h / 3.0 * w_x, h / 6.0 * w_x]
    cb = [h / 6.0 * w_c, h / 3.0 * w_c, h / 3.0 * w_c, h / 6.0 * w_c]
    # x_i = x + coef[i] * k_{i-1}
    coef = (None, 0.5 * h, 0.5 * h, h)
    stages = (x1, x2, x3, x4)

    adj_x = w_x.copy()
    adj_u = np.zeros_like(np.asarray(u, dtype=float))
    for i in (3, 2, 1, 0):
        xi = stages[i]
        a, au = model.vjp(xi, u, kb[i])
        adj_u = adj_u + au
        if cb[i] != 0.0:
            gx, gu = model.cost_grad(xi, u)
            a = a + cb[i] * gx
            adj_u = adj_u + cb[i] * gu
        adj_x = adj_x + a
        if i > 0:
            kb[i - 1] = kb[i - 1] + coef[i] * a
    return _finite(adj_x, "state adjoint"), _finite(adj_u, "input adjoint")
