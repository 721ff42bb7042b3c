"""Forward-backward step, fixed-point residual and forward-backward envelope.

For a stepsize ``gamma`` the forward-backward step at ``u`` is

    u_bar = prox_{gamma g}(u - gamma grad l(u)),   r = (u - u_bar) / gamma,

and the envelope value is computed in prox-point form

    fbe = l(u) + <grad l(u), u_bar - u> + g(u_bar) + ||u_bar - u||^2 / (2 gamma),

which reuses ``u_bar``. :func:`fbe_at` evaluates the same quantity through the
Moreau envelope of ``g`` and serves as a cross-check.

:func:`ensure_gamma` implements the adaptive Lipschitz safeguard: while the
quadratic upper bound on ``l`` fails at ``u_bar``, ``gamma`` and ``sigma``
are halved and ``L`` doubled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .adjoint import cost_and_gradient, rollout_cost
from .problem import ProblemSpec
from .prox import moreau_value, penalty_value, prox_apply

__all__ = [
    "FbStep",
    "GammaState",
    "fb_step",
    "fb_step_from",
    "fbe_at",
    "ensure_gamma",
    "initial_gamma_state",
    "LipschitzEstimationError",
]

# relative slack on the quadratic-upper-bound test; guards against roundoff
# triggering halvings once gamma*r is at machine-precision scale
QUB_RTOL = 1e-12
SIGMA_FRACTION = 0.1
GAMMA_LIPSCHITZ_PRODUCT = 0.95


class LipschitzEstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FbStep:
    u: np.ndarray
    grad: np.ndarray
    cost: float
    u_bar: np.ndarray
    r: np.ndarray
    gamma: float
    fbe: float
    g_bar: float  # g(u_bar)


@dataclass(frozen=True)
class GammaState:
    gamma: float
    L: float
    sigma: float
    halvings: int = 0


def _prox_blocks(spec: ProblemSpec, v, gamma):
    return prox_apply(spec.g, spec.split(v), gamma).reshape(-1)


def fb_step_from(spec: ProblemSpec, u, cost: float, grad, gamma: float) -> FbStep:
    """Forward-backward step when ``l(u)`` and its gradient are already known."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    u_bar = _prox_blocks(spec, u - gamma * grad, gamma)
    diff = u_bar - u
    g_bar = penalty_value(spec.g, spec.split(u_bar), at_prox=True)
    fbe = cost + float(grad @ diff) + g_bar + float(diff @ diff) / (2.0 * gamma)
    return FbStep(
        u=u, grad=grad, cost=cost, u_bar=u_bar, r=-diff / gamma, gamma=gamma, fbe=fbe, g_bar=g_bar
    )


def fb_step(spec: ProblemSpec, u, gamma: float) -> FbStep:
    cost, grad = cost_and_gradient(spec, u)
    return fb_step_from(spec, u, cost, grad, gamma)


def fbe_at(spec: ProblemSpec, u, gamma: float) -> float:
    """Envelope form ``l(u) - gamma/2 ||grad||^2 + g^gamma(u - gamma grad)``."""
    cost, grad = cost_and_gradient(spec, u)
    u = np.asarray(u, dtype=float)
    v = spec.split(u - gamma * grad)
    return cost - 0.5 * gamma * float(grad @ grad) + moreau_value(spec.g, v, gamma)


def _gamma_state(gamma: float, L: float, halvings: int = 0) -> GammaState:
    sigma = SIGMA_FRACTION * 0.5 * gamma * (1.0 - gamma * L)
    return GammaState(gamma=gamma, L=L, sigma=sigma, halvings=halvings)


def initial_gamma_state(spec: ProblemSpec, u0, grad0=None, seed: int = 0) -> GammaState:
    """Estimate ``L`` by a finite difference of gradients around ``u0``.

    The perturbation is a fixed pseudo-random direction of norm
    ``1e-3 (1 + ||u0||)``; ``gamma = 0.95 / L`` and
    ``sigma = 0.1 * gamma (1 - gamma L) / 2``.
    """
    u0 = np.asarray(u0, dtype=float)
    if grad0 is None:
        _, grad0 = cost_and_gradient(spec, u0)
    rng = np.random.default_rng(seed)
    delta = rng.standard_normal(u0.shape)
    delta *= 1e-3 * (1.0 + np.linalg.norm(u0)) / np.linalg.norm(delta)
    _, grad1 = cost_and_gradient(spec, u0 + delta)
    L = float(np.linalg.norm(grad1 - grad0) / np.linalg.norm(delta))
    L = max(L, 1e-6)
    return _gamma_state(GAMMA_LIPSCHITZ_PRODUCT / L, L)


def quadratic_bound_holds(step: FbStep, cost_bar: float, L: float) -> bool:
    gr = step.gamma * step.r
    bound = step.cost - float(step.grad @ gr) + 0.5 * L * float(gr @ gr)
    return cost_bar <= bound + QUB_RTOL * (1.0 + abs(step.cost))


def ensure_gamma(spec: ProblemSpec, state: GammaState, step: FbStep, max_halvings: int = 60):
    """Shrink ``gamma`` until ``l(u_bar)`` obeys the quadratic upper bound.

    Returns ``(state, step, changed)``; the gradient at ``step.u`` is reused,
    only the prox and one cost evaluation at ``u_bar`` are repeated.
    A non-finite cost at ``u_bar`` counts as a failed test.
    """
    changed = False
    while True:
        try:
            cost_bar = rollout_cost(spec, step.u_bar)
        except ArithmeticError:
            cost_bar = np.inf
        if quadratic_bound_holds(step, cost_bar, state.L):
            return state, step, changed
        if state.halvings >= max_halvings:
            raise LipschitzEstimationError("Lipschitz estimation diverged")
        state = replace(
            state,
            gamma=state.gamma / 2.0,
            L=state.L * 2.0,
            sigma=state.sigma / 2.0,
            halvings=state.halvings + 1,
        )
        step = fb_step_from(spec, step.u, step.cost, step.grad, state.gamma)
        changed = True
