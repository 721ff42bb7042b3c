"""
Receding-horizon control of the chain
=====================================

Three seconds of closed loop with and without the soft bound. With the
bound the masses stay close to p2 >= -0.1; without it they dip further.
"""

# %%
import numpy as np

from panoc_nmpc import ChainParams, SolverOptions, build_scenario, closed_loop
from panoc_nmpc.chain import chain_soft_outputs

params = ChainParams()
steps = 30

# %%
for label, p in (("soft", params), ("mu=0", params.with_mu((0.0,) * 6))):
    _, _, spec = build_scenario(p, 0.1, 40)
    result = closed_loop(spec, steps, SolverOptions(tol=1e-3), warm_start=True,
                         outputs=lambda x: chain_soft_outputs(params, x))
    summary = result.summary(lambda x: chain_soft_outputs(params, x))
    print(label, "mean iterations", round(summary["mean_iterations"], 1),
          "max solve time", round(summary["max_solve_time_s"], 3))
    print("   min p2 per point", np.round(summary["min_p2_per_point"], 3))
    print("   stage cost", round(summary["initial_stage_cost"], 3), "->", round(summary["final_stage_cost"], 3))
