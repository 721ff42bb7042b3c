"""
Proximal operators and the soft-constraint penalty
==================================================

Every nonsmooth term the solver handles goes through ``prox_apply``.
"""

# %%
import numpy as np

from panoc_nmpc import ProxSpec, moreau_value, prox_apply, soft_penalty

v = np.array([2.0, -0.5, 0.3])

# %%
# Indicators project. The input box used by the chain benchmark is the
# infinity ball of radius 1, so the prox is a clamp regardless of gamma.
for g in (ProxSpec.inf_ball(1.0), ProxSpec.euclidean_ball(1.0), ProxSpec.box([0, -1, -1], [1, 1, 1])):
    print(f"{g.kind:15s}", prox_apply(g, v, gamma=0.5))

# %%
# The l1 norm soft-thresholds by gamma * weight.
print(prox_apply(ProxSpec.l1(1.0), np.array([2.0, -0.2]), 0.5))

# A finite set picks the nearest point; ties go to the first listed one.
print(prox_apply(ProxSpec.finite_set([[-1.0], [1.0]]), np.array([0.0]), 1.0))

# %%
# Moreau envelope value: distance squared over 2 gamma for indicators.
print(moreau_value(ProxSpec.box([-1.0], [1.0]), np.array([3.0]), 0.5))

# %%
# Soft lower bounds z >= b with weights mu. The penalty is quadratic in the
# violation and its gradient q is what the backward sweep propagates.
z = np.array([-0.2, 0.5, -0.3])
res = soft_penalty(z, lower=np.full(3, -0.1), mu=np.array([100.0, 100.0, 0.0]))
print("value", res.value, "q", res.q, "s", res.s)
