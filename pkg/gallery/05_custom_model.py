"""
A custom continuous-time model
==============================

Any model with vector-Jacobian products can be solved. Here a damped
pendulum is swung towards the upright position with a torque bound above the gravity torque.
"""

# %%
import numpy as np

from panoc_nmpc import ContinuousModel, Dims, ProblemSpec, ProxSpec, SolverOptions, panoc_solve, validate
from panoc_nmpc.adjoint import rollout

# x = (angle, angular velocity), u = torque; cost drives the angle to pi.
c = 0.1


def f_c(x, u):
    return np.array([x[1], -np.sin(x[0]) - c * x[1] + u[0]])


def vjp_fx(x, u, w):
    return np.array([-np.cos(x[0]) * w[1], w[0] - c * w[1]])


def vjp_fu(x, u, w):
    return np.array([w[1]])


model = ContinuousModel(
    f_c=f_c,
    ell_c=lambda x, u: (x[0] - np.pi) ** 2 + 0.1 * x[1] ** 2 + 0.01 * u[0] ** 2,
    vjp_fx=vjp_fx,
    vjp_fu=vjp_fu,
    grad_ell_x=lambda x, u: np.array([2 * (x[0] - np.pi), 0.2 * x[1]]),
    grad_ell_u=lambda x, u: np.array([0.02 * u[0]]),
)

spec = ProblemSpec(Dims(N=60, nx=2, nu=1), model, ProxSpec.box([-1.5], [1.5]), np.zeros(2), ts=0.1)
print(validate(spec))

# %%
sol = panoc_solve(spec, opts=SolverOptions(tol=1e-5))
print(sol.status, sol.iterations, "iterations")
states = rollout(spec, sol.u_bar).states
print("final angle", states[-1, 0], "target", np.pi)
print("torque profile (every 10th stage)", np.round(sol.u_bar[::10], 2))
