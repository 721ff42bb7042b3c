from dataclasses import replace

import numpy as np
import pytest

from panoc_nmpc import (
    ChainParams,
    ContinuousModel,
    Dims,
    DiscreteModel,
    ProblemSpec,
    ProxSpec,
    SoftConstraintSpec,
    build_scenario,
    compute_equilibrium,
    cost_and_gradient,
    fbs_solve,
    gradient,
    rollout,
)
from panoc_nmpc.integrator import rk4_step
from panoc_nmpc.solver import SolverOptions
from problems import central_difference, random_chain_instance, relative_error


def identity_problem(N=4, nu=2, soft=None, m=()):
    model = DiscreteModel(
        f=lambda x, u: x.copy(),
        ell=lambda x, u: 0.5 * u @ u,
        vjp_f=lambda x, u, w: (w.copy(), np.zeros_like(u)),
        grad_ell=lambda x, u: (np.zeros_like(x), u.copy()),
    )
    return ProblemSpec(Dims(N, 2, nu, m), model, ProxSpec.zero(), np.array([0.3, -0.4]), soft=soft)


def coordinate_soft(mu, lower=0.0):
    return SoftConstraintSpec(
        stage=lambda x, u: x[:1].copy(),
        terminal=lambda x: x[:1].copy(),
        vjp_stage_x=lambda x, u, w: np.array([w[0], 0.0]),
        vjp_stage_u=lambda x, u, w: np.zeros_like(u),
        vjp_terminal_x=lambda x, w: np.array([w[0], 0.0]),
        lower=np.array([lower]),
        mu=mu,
    )


class TestRollout:
    def test_equilibrium_is_stationary(self):
        params = ChainParams()
        x_eq = compute_equilibrium(params)
        _, _, spec = build_scenario(params, 0.1, 10)
        roll = rollout(replace(spec, x_bar=x_eq), np.zeros(30))
        assert np.max(np.abs(roll.states - x_eq)) <= 1e-9
        step = rk4_step(spec.model, x_eq, np.zeros(3), 0.1)
        assert roll.cost == pytest.approx(10 * step.stage_cost, abs=1e-12)

    def test_zero_problem(self):
        zero = ContinuousModel(
            f_c=lambda x, u: np.zeros_like(x),
            ell_c=lambda x, u: 0.0,
            vjp_fx=lambda x, u, w: np.zeros_like(x),
            vjp_fu=lambda x, u, w: np.zeros_like(u),
            grad_ell_x=lambda x, u: np.zeros_like(x),
            grad_ell_u=lambda x, u: np.zeros_like(u),
        )
        spec = ProblemSpec(Dims(3, 2, 1), zero, ProxSpec.zero(), np.array([1.0, 2.0]), ts=0.1)
        roll = rollout(spec, np.arange(3.0))
        assert roll.cost == 0.0
        np.testing.assert_array_equal(roll.states, np.tile([1.0, 2.0], (4, 1)))

    def test_single_violation_adds_penalty(self):
        # x stays at x_bar = (0.3, -0.4); only stage 2 has a soft bound x_1 >= 0.5
        mu = [np.zeros(1)] * 5
        mu[2] = np.array([40.0])
        base = identity_problem()
        soft = replace(coordinate_soft(mu), lower=[np.array([0.5])] * 5)
        spec = replace(base, soft=soft, dims=Dims(4, 2, 2, (1,) * 5))
        u = np.linspace(-1, 1, 8)
        assert rollout(spec, u).cost - rollout(base, u).cost == pytest.approx(20.0 * 0.2**2, rel=1e-13)

    def test_initial_state_is_exact(self):
        spec, u = random_chain_instance(0)
        assert np.array_equal(rollout(spec, u).states[0], spec.x_bar)


class TestGradient:
    def test_decoupled_quadratic(self):
        spec = identity_problem()
        u = np.linspace(-2, 2, 8)
        np.testing.assert_array_equal(cost_and_gradient(spec, u)[1], u)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_finite_differences(self, seed):
        spec, u = random_chain_instance(seed)
        _, g = cost_and_gradient(spec, u)
        fd = central_difference(lambda v: rollout(spec, v).cost, u)
        assert relative_error(g, fd) <= 1e-6

    def test_vanishes_at_unconstrained_minimum(self):
        params = ChainParams(M=1, mu=(0.0, 0.0))
        _, _, spec = build_scenario(params, 0.1, 3)
        spec = replace(spec, g=ProxSpec.zero())
        sol = fbs_solve(spec, opts=SolverOptions(tol=1e-8, max_iter=200000))
        assert sol.converged
        assert np.max(np.abs(cost_and_gradient(spec, sol.u_bar)[1])) <= 1e-6


class TestCostAndGradient:
    def test_matches_separate_calls(self):
        spec, u = random_chain_instance(1)
        roll = rollout(spec, u)
        c, g = cost_and_gradient(spec, u)
        assert c == roll.cost
        np.testing.assert_array_equal(g, gradient(spec, roll))

    def test_deterministic(self):
        spec, u = random_chain_instance(2)
        c1, g1 = cost_and_gradient(spec, u)
        c2, g2 = cost_and_gradient(spec, u)
        assert c1 == c2 and np.array_equal(g1, g2)

    def test_no_soft_equals_zero_weights(self):
        plain = identity_problem()
        weighted = replace(plain, soft=coordinate_soft(np.zeros(1), lower=5.0), dims=Dims(4, 2, 2, (1,) * 5))
        u = np.linspace(-1, 1, 8)
        c1, g1 = cost_and_gradient(plain, u)
        c2, g2 = cost_and_gradient(weighted, u)
        assert c1 == c2 and np.array_equal(g1, g2)

    def test_cost_decomposition(self):
        spec, u = random_chain_instance(3)
        roll = rollout(spec, u)
        total = 0.0
        for n, (x, un) in enumerate(zip(roll.states[:-1], spec.split(u))):
            total += rk4_step(spec.model, x, un, spec.ts).stage_cost
            viol = np.minimum(0.0, spec.soft.stage(x, un) - spec.soft.lower_at(n))
            total += 0.5 * np.sum(spec.soft.mu_at(n) * viol**2)
        viol = np.minimum(0.0, spec.soft.terminal(roll.states[-1]) - spec.soft.lower_at(spec.dims.N))
        total += 0.5 * np.sum(spec.soft.mu_at(spec.dims.N) * viol**2)
        assert roll.cost == pytest.approx(total, rel=1e-12)

    def test_one_forward_and_one_backward_step_per_stage(self):
        params = ChainParams(M=2, mu=(100.0,) * 3)
        _, _, spec = build_scenario(params, 0.1, 5, compiled=False)
        calls = {"f": 0, "vjp": 0}
        model = spec.model

        def f_c(x, u):
            calls["f"] += 1
            return model.f_c(x, u)

        def vjp_f(x, u, w):
            calls["vjp"] += 1
            return model.vjp(x, u, w)

        counted = replace(model, f_c=f_c, vjp_f=vjp_f)
        cost_and_gradient(replace(spec, model=counted), np.zeros(15))
        # four RK4 stages per step, N = 5 steps each way
        assert calls == {"f": 4 * 5, "vjp": 4 * 5}
