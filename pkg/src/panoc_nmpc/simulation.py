"""Closed-loop MPC simulation and solver comparison on a fixed problem."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .integrator import rk4_step
from .problem import ContinuousModel, ProblemSpec
from .solver import SOLVERS_BY_NAME as SOLVERS
from .solver import Solution, SolverOptions

__all__ = ["MpcStep", "MpcResult", "closed_loop", "shift_warm_start", "compare_solvers", "SOLVERS"]



class MpcAbort(RuntimeError):
    def __init__(self, step, solution):
        super().__init__(f"solve failed at MPC step {step}: {solution.status} {solution.message}".strip())
        self.step = step
        self.solution = solution


@dataclass
class MpcStep:
    step: int
    time_s: float
    solve_time_s: float
    iterations: int
    status: str
    u0: np.ndarray
    state: np.ndarray
    stage_cost: float
    min_p2: float = math.nan


@dataclass
class MpcResult:
    steps: list = field(default_factory=list)

    @property
    def solve_times(self):
        return np.array([s.solve_time_s for s in self.steps])

    @property
    def iterations(self):
        return np.array([s.iterations for s in self.steps])

    @property
    def all_converged(self) -> bool:
        return all(s.status == "converged" for s in self.steps)

    def summary(self, outputs: Optional[Callable] = None) -> dict:
        t = self.solve_times
        out = {
            "steps": len(self.steps),
            "all_converged": self.all_converged,
            "max_solve_time_s": float(t.max()) if t.size else 0.0,
            "mean_solve_time_s": float(t.mean()) if t.size else 0.0,
            "mean_iterations": float(self.iterations.mean()) if t.size else 0.0,
            "initial_stage_cost": self.steps[0].stage_cost if self.steps else math.nan,
            "final_stage_cost": self.steps[-1].stage_cost if self.steps else math.nan,
        }
        if outputs is not None and self.steps:
            traj = np.array([outputs(s.state) for s in self.steps])
            out["min_p2_per_point"] = traj.min(axis=0).tolist()
        return out


def shift_warm_start(u_bar, nu: int) -> np.ndarray:
    """Drop the first stage input and repeat the last one."""
    U = np.asarray(u_bar, dtype=float).reshape(-1, nu)
    return np.vstack([U[1:], U[-1:]]).reshape(-1)


def _plant_step(spec: ProblemSpec, x, u):
    model = spec.model
    if isinstance(model, ContinuousModel):
        return rk4_step(model, x, u, spec.ts).x_next
    return np.asarray(model.f(x, u), dtype=float)


def _stage_cost(spec: ProblemSpec, x, u) -> float:
    model = spec.model
    if isinstance(model, ContinuousModel):
        return float(model.ell_c(x, u))
    return float(model.ell(x, u))


def closed_loop(
    spec: ProblemSpec,
    steps: int,
    opts: Optional[SolverOptions] = None,
    algorithm: str = "panoc",
    warm_start: bool = False,
    outputs: Optional[Callable] = None,
    callback: Optional[Callable] = None,
) -> MpcResult:
    """Receding-horizon simulation starting from ``spec.x_bar``.

    At every step the OCP is solved from the current plant state, the first
    input of the solution is applied and the plant is advanced with the same
    one-step discretization used in the prediction model. ``outputs(x)``
    (e.g. the constrained coordinates) is used for ``min_p2``. Raises
    :class:`MpcAbort` if a solve does not converge.
    """
    solve = SOLVERS[algorithm]
    nu = spec.dims.nu
    x = spec.x_bar.copy()
    u_init = None
    result = MpcResult()
    for k in range(steps):
        problem = spec.with_initial_state(x)
        t0 = time.perf_counter()
        sol = solve(problem, u_init, opts)
        elapsed = time.perf_counter() - t0
        if not sol.converged:
            raise MpcAbort(k, sol)
        u0 = sol.u_bar[:nu].copy()
        rec = MpcStep(
            step=k,
            time_s=k * spec.ts,
            solve_time_s=elapsed,
            iterations=sol.iterations,
            status=sol.status,
            u0=u0,
            state=x.copy(),
            stage_cost=_stage_cost(spec, x, u0),
            min_p2=float(np.min(outputs(x))) if outputs is not None else math.nan,
        )
        result.steps.append(rec)
        if callback is not None:
            callback(rec)
        if warm_start:
            u_init = shift_warm_start(sol.u_bar, nu)
        x = _plant_step(spec, x, u0)
    return result


def compare_solvers(spec: ProblemSpec, opts_by_algorithm: dict, u0=None, threads: int = 1) -> dict:
    """Run several solvers on the same problem; returns ``{name: Solution}``."""
    names = list(opts_by_algorithm)

    def run(name) -> Solution:
        return SOLVERS[name](spec, u0, opts_by_algorithm[name])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(run, names))
    else:
        sols = [run(n) for n in names]
    return dict(zip(names, sols))
