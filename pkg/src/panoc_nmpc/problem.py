"""Composite optimal control problems in single-shooting form.

A problem is the data needed to evaluate

    phi(u) = l(u) + g(u),

where ``l`` is the smooth cost obtained by rolling the dynamics forward from
``x_bar`` under the input sequence ``u = (u_0, ..., u_{N-1})`` (stage costs,
terminal cost and Moreau-smoothed soft state constraints) and ``g`` is a
stagewise-separable, possibly nonsmooth input penalty given by a
:class:`~panoc_nmpc.prox.ProxSpec`.

Dynamics are supplied either as a :class:`ContinuousModel`, discretized with
one RK4 step per sample, or as a :class:`DiscreteModel` with explicit stage
maps. Either way only vector-Jacobian products are required.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .prox import ProxSpec

Vector = np.ndarray

__all__ = [
    "Dims",
    "ContinuousModel",
    "DiscreteModel",
    "SoftConstraintSpec",
    "ProblemSpec",
    "ValidationReport",
    "validate",
]


@dataclass(frozen=True)
class Dims:
    """Horizon and dimensions; ``m[n]`` is the soft-constraint size at stage n."""

    N: int
    nx: int
    nu: int
    m: tuple = ()

    def __post_init__(self):
        if not self.m:
            object.__setattr__(self, "m", (0,) * (self.N + 1))
        else:
            object.__setattr__(self, "m", tuple(int(k) for k in self.m))

    @property
    def n_inputs(self) -> int:
        return self.N * self.nu


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time dynamics ``xdot = f_c(x, u)`` and running cost ``ell_c``.

    ``vjp_fx(x, u, w)`` and ``vjp_fu(x, u, w)`` return ``J_x^T w`` and
    ``J_u^T w`` for the Jacobians of ``f_c``. Models may also provide fused
    ``vjp_f(x, u, w) -> (J_x^T w, J_u^T w)`` and
    ``grad_ell(x, u) -> (dell/dx, dell/du)``, which the integrator prefers.
    """

    f_c: Callable[[Vector, Vector], Vector]
    ell_c: Callable[[Vector, Vector], float]
    vjp_fx: Callable[[Vector, Vector, Vector], Vector]
    vjp_fu: Callable[[Vector, Vector, Vector], Vector]
    grad_ell_x: Callable[[Vector, Vector], Vector]
    grad_ell_u: Callable[[Vector, Vector], Vector]
    vjp_f: Optional[Callable[[Vector, Vector, Vector], tuple]] = None
    grad_ell: Optional[Callable[[Vector, Vector], tuple]] = None

    def vjp(self, x, u, w):
        if self.vjp_f is not None:
            return self.vjp_f(x, u, w)
        return self.vjp_fx(x, u, w), self.vjp_fu(x, u, w)

    def cost_grad(self, x, u):
        if self.grad_ell is not None:
            return self.grad_ell(x, u)
        return self.grad_ell_x(x, u), self.grad_ell_u(x, u)


@dataclass(frozen=True)
class DiscreteModel:
    """Pre-discretized stage maps.

    ``f(x, u)`` is the next state, ``ell(x, u)`` the stage cost,
    ``vjp_f(x, u, w)`` returns ``(J_x^T w, J_u^T w)`` for ``f`` and
    ``grad_ell(x, u)`` returns ``(dell/dx, dell/du)``.
    """

    f: Callable[[Vector, Vector], Vector]
    ell: Callable[[Vector, Vector], float]
    vjp_f: Callable[[Vector, Vector, Vector], tuple]
    grad_ell: Callable[[Vector, Vector], tuple]


@dataclass(frozen=True)
class SoftConstraintSpec:
    """Soft lower bounds ``C_n(x_n, u_n) >= lower`` penalized by ``mu/2 * viol**2``.

    ``stage(x, u)`` is used for n < N and ``terminal(x)`` at n = N. The VJP
    callables follow the same split. ``mu`` and ``lower`` may be a single
    vector used at every stage or a sequence of N+1 vectors.
    """

    stage: Callable[[Vector, Vector], Vector]
    terminal: Callable[[Vector], Vector]
    vjp_stage_x: Callable[[Vector, Vector, Vector], Vector]
    vjp_stage_u: Callable[[Vector, Vector, Vector], Vector]
    vjp_terminal_x: Callable[[Vector, Vector], Vector]
    lower: Union[Vector, Sequence[Vector]]
    mu: Union[Vector, Sequence[Vector]]

    def _at(self, values, n):
        if isinstance(values, np.ndarray) and values.ndim == 1:
            return values
        return np.asarray(values[n], dtype=float)

    def mu_at(self, n: int) -> Vector:
        return self._at(self.mu, n)

    def lower_at(self, n: int) -> Vector:
        return self._at(self.lower, n)


def _zero_terminal_cost(x):
    return 0.0


def _zero_terminal_grad(x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class ProblemSpec:
    """Single-shooting composite problem ``min_u l(u) + g(u)``.

    ``g`` applies to each stage block ``u_n`` (identical ProxSpec per stage).
    ``ts`` is only used by continuous models.
    """

    dims: Dims
    model: Union[ContinuousModel, DiscreteModel]
    g: ProxSpec
    x_bar: Vector
    ts: float = 1.0
    soft: Optional[SoftConstraintSpec] = None
    terminal_cost: Callable[[Vector], float] = field(default=_zero_terminal_cost)
    terminal_grad: Callable[[Vector], Vector] = field(default=_zero_terminal_grad)

    def __post_init__(self):
        object.__setattr__(self, "x_bar", np.asarray(self.x_bar, dtype=float))

    def with_initial_state(self, x_bar) -> "ProblemSpec":
        """Copy of this problem starting from ``x_bar`` (used in closed loop)."""
        return replace(self, x_bar=np.array(x_bar, dtype=float))

    def split(self, u) -> np.ndarray:
        """View ``u`` as an ``(N, nu)`` array of stage inputs."""
        return np.asarray(u, dtype=float).reshape(self.dims.N, self.dims.nu)


@dataclass
class ValidationReport:
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.ok

    def raise_if_failed(self):
        if self.failures:
            raise ValueError("invalid problem: " + "; ".join(self.failures))


def validate(spec: ProblemSpec) -> ValidationReport:
    """Check dimensions and signs; never raises."""
    report = ValidationReport()
    fail = report.failures.append
    d = spec.dims

    if d.N < 1:
        fail("N must be >= 1")
    if d.nx < 1:
        fail("nx must be >= 1")
    if d.nu < 1:
        fail("nu must be >= 1")
    if len(d.m) != d.N + 1:
        fail(f"m must have N+1 = {d.N + 1} entries, got {len(d.m)}")
    if any(k < 0 for k in d.m):
        fail("soft-constraint dimensions must be >= 0")
    if spec.x_bar.shape != (d.nx,):
        fail(f"x_bar has shape {spec.x_bar.shape}, expected ({d.nx},)")
    if not (np.isfinite(spec.ts) and spec.ts > 0):
        fail("ts must be positive")
    if not isinstance(spec.model, (ContinuousModel, DiscreteModel)):
        fail("model must be a ContinuousModel or DiscreteModel")

    g_dim = spec.g.dim
    if g_dim is not None and g_dim != d.nu:
        fail(f"g acts on blocks of size {g_dim}, expected nu = {d.nu}")

    if spec.soft is None:
        if any(d.m):
            fail("soft-constraint dimensions given but no soft spec")
    elif len(d.m) == d.N + 1:
        for n in range(d.N + 1):
            try:
                mu = np.atleast_1d(spec.soft.mu_at(n))
                lo = np.atleast_1d(spec.soft.lower_at(n))
            except (IndexError, TypeError):
                fail(f"stage {n}: missing mu/lower entry")
                continue
            if mu.shape != (d.m[n],):
                fail(f"stage {n}: mu has length {mu.size}, expected m_{n} = {d.m[n]}")
            elif np.any(mu < 0):
                fail(f"stage {n}: mu must be nonnegative")
            if lo.shape != (d.m[n],):
                fail(f"stage {n}: lower bounds have length {lo.size}, expected {d.m[n]}")
    return report
