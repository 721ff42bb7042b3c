"""Forward rollout and backward sweep for the smooth single-shooting cost.

:func:`rollout` simulates ``x_{n+1} = f_n(x_n, u_n)`` from ``x_bar`` and
accumulates stage costs plus the Moreau-smoothed soft-constraint penalties.
:func:`gradient` then runs the reverse sweep

    p_N = grad l_N(x_N) + dC_N^T q_N
    p_n = df_n/dx^T p_{n+1} + grad_x l_n + dC_n/dx^T q_n
    grad_{u_n} l = df_n/du^T p_{n+1} + grad_u l_n + dC_n/du^T q_n

using the per-stage tapes kept by the rollout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrator import NonFiniteError, rk4_step, rk4_step_vjp
from .problem import ContinuousModel, ProblemSpec
from .prox import SoftPenaltyResult, soft_penalty

__all__ = ["Rollout", "rollout", "gradient", "cost_and_gradient", "rollout_cost"]


@dataclass(frozen=True)
class Rollout:
    u: np.ndarray  # (N, nu)
    states: np.ndarray  # (N+1, nx)
    steps: tuple  # per-stage Rk4Step (continuous models) or None
    soft: tuple  # per-stage SoftPenaltyResult or None, length N+1
    stage_costs: np.ndarray  # (N,) stage cost without soft terms
    terminal_cost: float
    cost: float


def _soft_at(spec: ProblemSpec, n: int, x, u) -> Optional[SoftPenaltyResult]:
    soft = spec.soft
    if soft is None or spec.dims.m[n] == 0:
        return None
    z = soft.terminal(x) if u is None else soft.stage(x, u)
    return soft_penalty(z, soft.lower_at(n), soft.mu_at(n))


def rollout(spec: ProblemSpec, u) -> Rollout:
    d = spec.dims
    U = spec.split(u)
    model = spec.model
    continuous = isinstance(model, ContinuousModel)

    states = np.empty((d.N + 1, d.nx))
    states[0] = spec.x_bar
    steps = []
    softs = []
    stage_costs = np.empty(d.N)
    cost = 0.0
    x = states[0]
    for n in range(d.N):
        un = U[n]
        sp = _soft_at(spec, n, x, un)
        softs.append(sp)
        try:
            if continuous:
                step = rk4_step(model, x, un, spec.ts)
                x_next, c = step.x_next, step.stage_cost
            else:
                step = None
                x_next = np.asarray(model.f(x, un), dtype=float)
                c = float(model.ell(x, un))
                if not (np.all(np.isfinite(x_next)) and np.isfinite(c)):
                    raise NonFiniteError("non-finite stage map output")
        except NonFiniteError as exc:
            raise NonFiniteError(f"stage {n}: {exc}") from exc
        steps.append(step)
        stage_costs[n] = c
        cost += c + (sp.value if sp is not None else 0.0)
        states[n + 1] = x_next
        x = x_next

    sp = _soft_at(spec, d.N, x, None)
    softs.append(sp)
    term = float(spec.terminal_cost(x))
    cost += term + (sp.value if sp is not None else 0.0)
    if not np.isfinite(cost):
        raise NonFiniteError("non-finite total cost")
    return Rollout(
        u=U,
        states=states,
        steps=tuple(steps),
        soft=tuple(softs),
        stage_costs=stage_costs,
        terminal_cost=term,
        cost=cost,
    )


def rollout_cost(spec: ProblemSpec, u) -> float:
    return rollout(spec, u).cost


def gradient(spec: ProblemSpec, roll: Rollout) -> np.ndarray:
    """Reverse sweep; returns the flat gradient of ``roll.cost`` w.r.t. u."""
    d = spec.dims
    model = spec.model
    continuous = isinstance(model, ContinuousModel)
    soft = spec.soft
    X, U = roll.states, roll.u

    p = np.asarray(spec.terminal_grad(X[d.N]), dtype=float).copy()
    sp = roll.soft[d.N]
    if sp is not None:
        p = p + soft.vjp_terminal_x(X[d.N], sp.q)

    grad = np.empty((d.N, d.nu))
    for n in range(d.N - 1, -1, -1):
        x, un = X[n], U[n]
        if continuous:
            px, gu = rk4_step_vjp(roll.steps[n], model, x, un, spec.ts, p, 1.0)
        else:
            fx, fu = model.vjp_f(x, un, p)
            lx, lu = model.grad_ell(x, un)
            px, gu = fx + lx, fu + lu
        sp = roll.soft[n]
        if sp is not None:
            px = px + soft.vjp_stage_x(x, un, sp.q)
            gu = gu + soft.vjp_stage_u(x, un, sp.q)
        grad[n] = gu
        p = px
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient")
    return grad.reshape(-1)


def cost_and_gradient(spec: ProblemSpec, u):
    roll = rollout(spec, u)
    return roll.cost, gradient(spec, roll)
