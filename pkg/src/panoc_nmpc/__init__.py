"""Proximal averaged Newton-type optimal control (PANOC) for single-shooting NMPC.

The solver minimizes ``l(u) + g(u)`` where ``l`` is the smooth cost of a
dynamics rollout (with Moreau-smoothed soft state constraints) and ``g`` a
proximable input penalty. See :func:`panoc_solve` and :func:`fbs_solve`.
"""

from .adjoint import Rollout, cost_and_gradient, gradient, rollout
from .chain import ChainParams, build_scenario, chain_model, compute_equilibrium
from .fbe import FbStep, GammaState, ensure_gamma, fb_step, fbe_at
from .integrator import NonFiniteError, rk4_step, rk4_step_vjp
from .lbfgs import LbfgsBuffer
from .problem import (
    ContinuousModel,
    Dims,
    DiscreteModel,
    ProblemSpec,
    SoftConstraintSpec,
    validate,
)
from .prox import ProxSpec, moreau_value, prox_apply, soft_penalty
from .simulation import closed_loop
from .solver import Solution, SolverOptions, averaged_update, fbs_solve, panoc_solve

__version__ = "0.1.0"
