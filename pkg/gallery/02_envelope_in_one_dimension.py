"""
The forward-backward envelope of a clipped quadratic
====================================================

phi(u) = u^2/2 - 3u restricted to [-1, 1]. The envelope is a real-valued
function below phi with the same minimizer.
"""

# %%
import numpy as np

from panoc_nmpc import DiscreteModel, Dims, ProblemSpec, ProxSpec, fb_step, fbe_at

model = DiscreteModel(
    f=lambda x, u: x,
    ell=lambda x, u: 0.5 * u @ u - 3.0 * u[0],
    vjp_f=lambda x, u, w: (w, np.zeros(1)),
    grad_ell=lambda x, u: (np.zeros(1), u - 3.0),
)
spec = ProblemSpec(Dims(N=1, nx=1, nu=1), model, ProxSpec.box([-1.0], [1.0]), np.zeros(1))

# %%
gamma = 0.5
grid = np.linspace(-2, 2, 9)
for u in grid:
    st = fb_step(spec, np.array([u]), gamma)
    inside = abs(u) <= 1
    phi = 0.5 * u * u - 3 * u if inside else np.inf
    print(f"u={u:+.2f}  phi={phi:+8.3f}  envelope={st.fbe:+8.3f}  u_bar={st.u_bar[0]:+.2f}")

# %%
# The envelope is finite everywhere and its minimizer is u = 1.
fine = np.linspace(-2, 2, 40001)
values = [fbe_at(spec, np.array([u]), gamma) for u in fine]
print("argmin of envelope:", fine[int(np.argmin(values))])
