"""PANOC and plain forward-backward splitting.

Both solvers share the same oracle: one cost-and-gradient evaluation plus one
prox per forward-backward step, an extra cost-only rollout at ``u_bar`` for
the adaptive Lipschitz test, and the stopping rule ``||r||_inf <= tol``.

PANOC takes the averaged step

    u+ = u - (1 - tau) gamma r + tau d,   tau in {1, 1/2, 1/4, ...},

with ``d`` an L-BFGS direction, accepting the first ``tau`` for which the
envelope decreases by at least ``sigma ||r||^2``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .adjoint import cost_and_gradient
from .fbe import (
    FbStep,
    GammaState,
    LipschitzEstimationError,
    ensure_gamma,
    fb_step_from,
    initial_gamma_state,
)
from .integrator import NonFiniteError
from .lbfgs import LbfgsBuffer
from .problem import ProblemSpec, validate

__all__ = [
    "SolverOptions",
    "IterateRecord",
    "Solution",
    "panoc_solve",
    "fbs_solve",
    "averaged_update",
    "write_trace_csv",
    "TRACE_COLUMNS",
    "SOLVERS_BY_NAME",
]

TRACE_COLUMNS = ("k", "fbe", "res_inf", "tau", "gamma", "backtracks", "time_s")

CONVERGED = "converged"
MAX_ITER = "max_iter"
MAX_TIME = "max_time"
LINESEARCH_FAILURE = "linesearch_failure"
NUMERICAL_ERROR = "numerical_error"

# Relative roundoff allowance in the sufficient-decrease test. Near
# convergence sigma*||r||^2 drops below the resolution of the envelope value
# and the exact test would reject even the forward-backward step.
LS_RTOL = 1e-12


@dataclass
class SolverOptions:
    tol: float = 1e-3
    max_iter: int = 5000
    max_time: Optional[float] = None
    lbfgs_memory: int = 10
    max_backtracks: int = 20
    max_halvings: int = 60

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be >= 1")


@dataclass
class IterateRecord:
    """One trace row.

    ``tau`` and ``backtracks`` describe the step taken *from* this iterate
    (NaN / 0 on the final row). ``sigma``, ``res_sq`` and ``gamma_changed``
    are kept for checking the line-search inequality and are not written to
    CSV.
    """

    k: int
    fbe: float
    res_inf: float
    tau: float
    gamma: float
    backtracks: int
    time_s: float
    sigma: float = math.nan
    res_sq: float = math.nan
    gamma_changed: bool = False


@dataclass
class Solution:
    u: np.ndarray
    u_bar: np.ndarray
    iterations: int
    status: str
    final_residual: float
    fbe: float
    gamma: float
    trace: list = field(default_factory=list)
    fb_evaluations: int = 0  # cost+gradient+prox evaluations
    cost_evaluations: int = 0  # cost-only rollouts for the Lipschitz test
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def averaged_update(u, r, d, tau: float, gamma: float) -> np.ndarray:
    """``u - (1 - tau) gamma r + tau d``; tau = 0 gives u_bar, tau = 1 gives u + d."""
    return np.asarray(u) - (1.0 - tau) * gamma * np.asarray(r) + tau * np.asarray(d)


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for rec in trace:
            w.writerow([getattr(rec, c) for c in TRACE_COLUMNS])


class _Oracle:
    """Counts forward-backward steps and Lipschitz-test rollouts."""

    def __init__(self, spec, max_halvings):
        self.spec = spec
        self.max_halvings = max_halvings
        self.fb_evals = 0
        self.cost_evals = 0

    def fb(self, u, gamma) -> FbStep:
        self.fb_evals += 1
        cost, grad = cost_and_gradient(self.spec, u)
        return fb_step_from(self.spec, u, cost, grad, gamma)

    def ensure(self, state, step):
        before = state.halvings
        out = ensure_gamma(self.spec, state, step, self.max_halvings)
        self.cost_evals += out[0].halvings - before + 1
        return out


def _prepare(spec: ProblemSpec, u0, opts):
    validate(spec).raise_if_failed()
    n = spec.dims.n_inputs
    u0 = np.zeros(n) if u0 is None else np.array(u0, dtype=float).reshape(-1)
    if u0.shape != (n,):
        raise ValueError(f"u0 has size {u0.size}, expected N*nu = {n}")
    return u0, opts or SolverOptions()


def _record(k, step, state, t0, changed):
    r = step.r
    return IterateRecord(
        k=k,
        fbe=step.fbe,
        res_inf=float(np.max(np.abs(r))) if r.size else 0.0,
        tau=math.nan,
        gamma=state.gamma,
        backtracks=0,
        time_s=time.perf_counter() - t0,
        sigma=state.sigma,
        res_sq=float(r @ r),
        gamma_changed=changed,
    )


def _finish(oracle, step, state, trace, status, message=""):
    return Solution(
        u=step.u,
        u_bar=step.u_bar,
        iterations=len(trace),
        status=status,
        final_residual=trace[-1].res_inf if trace else math.inf,
        fbe=step.fbe,
        gamma=state.gamma,
        trace=trace,
        fb_evaluations=oracle.fb_evals,
        cost_evaluations=oracle.cost_evals,
        message=message,
    )


def _failed_start(u0, message):
    return Solution(u=u0, u_bar=u0, iterations=0, status=NUMERICAL_ERROR,
                    final_residual=math.inf, fbe=math.nan, gamma=math.nan,
                    message=f"cost is not finite at the initial point: {message}")


def _start(spec, u0, opts, gamma_state):
    oracle = _Oracle(spec, opts.max_halvings)
    oracle.fb_evals += 1
    cost, grad = cost_and_gradient(spec, u0)
    if gamma_state is None:
        gamma_state = initial_gamma_state(spec, u0, grad)
    step = fb_step_from(spec, u0, cost, grad, gamma_state.gamma)
    return oracle, gamma_state, step


def panoc_solve(
    spec: ProblemSpec,
    u0=None,
    opts: Optional[SolverOptions] = None,
    gamma_state: Optional[GammaState] = None,
) -> Solution:
    """Minimize ``l(u) + g(u)`` with PANOC using L-BFGS directions.

    Parameters
    ----------
    spec : ProblemSpec
    u0 : array, optional
        Initial input sequence of size ``N * nu``; zeros by default.
    opts : SolverOptions, optional
    gamma_state : GammaState, optional
        Initial stepsize/Lipschitz estimate. Estimated from gradients at
        ``u0`` when omitted.

    Returns
    -------
    Solution
        ``u_bar`` is the reported (prox-feasible) solution.
    """
    u0, opts = _prepare(spec, u0, opts)
    t0 = time.perf_counter()
    trace = []
    try:
        oracle, state, step = _start(spec, u0, opts, gamma_state)
    except NonFiniteError as exc:
        return _failed_start(u0, str(exc))

    buf = LbfgsBuffer(opts.lbfgs_memory)
    prev = None  # (u, r) of the previous accepted iterate at the current gamma
    forced_halving = False
    fallback_failed = False
    try:
        for k in range(opts.max_iter):
            state, step, changed = oracle.ensure(state, step)
            if changed:
                buf.reset()
            elif prev is not None:
                buf.push(step.u - prev[0], step.r - prev[1])
            rec = _record(k, step, state, t0, changed or forced_halving)
            forced_halving = False
            trace.append(rec)

            if rec.res_inf <= opts.tol:
                return _finish(oracle, step, state, trace, CONVERGED)
            if opts.max_time is not None and rec.time_s > opts.max_time:
                return _finish(oracle, step, state, trace, MAX_TIME)
            if k == opts.max_iter - 1:
                break

            # With no curvature pairs yet, -r is off by the factor 1/gamma; use
            # the forward-backward step itself so tau = 1 lands on u_bar.
            d = buf.direction(step.r) if buf.count else -state.gamma * step.r
            target = step.fbe - state.sigma * rec.res_sq + LS_RTOL * (1.0 + abs(step.fbe))
            new_step = None
            tau = 1.0
            for bt in range(opts.max_backtracks):
                u_new = averaged_update(step.u, step.r, d, tau, state.gamma)
                try:
                    trial = oracle.fb(u_new, state.gamma)
                except NonFiniteError:
                    trial = None
                if trial is not None and trial.fbe <= target:
                    new_step = trial
                    rec.backtracks = bt
                    break
                tau *= 0.5
            if new_step is None:
                rec.backtracks = opts.max_backtracks
                tau = 0.0
                new_step = oracle.fb(step.u_bar, state.gamma)
                if not new_step.fbe <= target:
                    # The fallback satisfies sufficient decrease whenever L is a
                    # valid local bound; force one halving before giving up.
                    if fallback_failed:
                        return _finish(oracle, step, state, trace, LINESEARCH_FAILURE,
                                       "forward-backward fallback violated sufficient decrease")
                    fallback_failed = True
                    state = replace(state, gamma=state.gamma / 2, L=state.L * 2,
                                    sigma=state.sigma / 2, halvings=state.halvings + 1)
                    step = fb_step_from(spec, step.u, step.cost, step.grad, state.gamma)
                    buf.reset()
                    prev = None
                    forced_halving = True
                    continue
            fallback_failed = False
            rec.tau = tau
            prev = (step.u, step.r)
            step = new_step
    except NonFiniteError as exc:
        return _finish(oracle, step, state, trace, NUMERICAL_ERROR, str(exc))
    except LipschitzEstimationError as exc:
        return _finish(oracle, step, state, trace, NUMERICAL_ERROR, str(exc))
    return _finish(oracle, step, state, trace, MAX_ITER)


def fbs_solve(
    spec: ProblemSpec,
    u0=None,
    opts: Optional[SolverOptions] = None,
    gamma_state: Optional[GammaState] = None,
) -> Solution:
    """Plain forward-backward splitting ``u+ = u_bar`` with the same safeguards."""
    u0, opts = _prepare(spec, u0, opts)
    t0 = time.perf_counter()
    trace = []
    try:
        oracle, state, step = _start(spec, u0, opts, gamma_state)
    except NonFiniteError as exc:
        return _failed_start(u0, str(exc))
    try:
        for k in range(opts.max_iter):
            state, step, changed = oracle.ensure(state, step)
            rec = _record(k, step, state, t0, changed)
            trace.append(rec)
            if rec.res_inf <= opts.tol:
                return _finish(oracle, step, state, trace, CONVERGED)
            if opts.max_time is not None and rec.time_s > opts.max_time:
                return _finish(oracle, step, state, trace, MAX_TIME)
            if k == opts.max_iter - 1:
                break
            rec.tau = 0.0
            step = oracle.fb(step.u_bar, state.gamma)
    except (NonFiniteError, LipschitzEstimationError) as exc:
        return _finish(oracle, step, state, trace, NUMERICAL_ERROR, str(exc))
    return _finish(oracle, step, state, trace, MAX_ITER)


def trace_rows(trace):
    """Trace as a list of dicts restricted to the CSV columns."""
    return [{c: getattr(r, c) for c in TRACE_COLUMNS} for r in trace]


SOLVERS_BY_NAME = {"panoc": panoc_solve, "fbs": fbs_solve}
