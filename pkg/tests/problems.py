"""Small problem builders shared by the test modules."""

import numpy as np

from panoc_nmpc import ChainParams, DiscreteModel, Dims, ProblemSpec, ProxSpec, build_scenario


def quadratic(Q, c=None, g=None):
    """One-stage problem l(u) = u'Qu/2 + c'u with a dummy scalar state."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    model = DiscreteModel(
        f=lambda x, u: x.copy(),
        ell=lambda x, u: 0.5 * u @ Q @ u + c @ u,
        vjp_f=lambda x, u, w: (w.copy(), np.zeros(n)),
        grad_ell=lambda x, u: (np.zeros_like(x), Q @ u + c),
    )
    return ProblemSpec(Dims(N=1, nx=1, nu=n), model, g or ProxSpec.zero(), np.zeros(1))


def clipped_quadratic():
    """u^2/2 - 3u over [-1, 1]; the solution is u = 1 with phi = -2.5."""
    return quadratic([[1.0]], [-3.0], ProxSpec.box([-1.0], [1.0]))


def random_spd(rng, n, cond=10.0):
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.linspace(1.0, cond, n)
    return V @ np.diag(eig) @ V.T, eig


def small_chain(M=2, N=5, ts=0.1, **kw):
    params = ChainParams(M=M, mu=(100.0,) * (M + 1), **kw)
    x0, x_ref, spec = build_scenario(params, ts, N)
    return params, x0, x_ref, spec


def central_difference(fun, u, rel_step=1e-6):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    for j in range(u.size):
        h = rel_step * (1.0 + abs(u[j]))
        e = np.zeros_like(u)
        e[j] = h
        out[j] = (fun(u + e) - fun(u - e)) / (2 * h)
    return out


def relative_error(got, want):
    return float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300))


def random_chain_instance(seed):
    """Small chain OCP with a random perturbed start and random inputs in the unit box."""
    from dataclasses import replace

    from panoc_nmpc import compute_equilibrium

    rng = np.random.default_rng(seed)
    M = int(rng.choice([1, 2]))
    N = int(rng.choice([2, 5]))
    params = ChainParams(M=M, mu=tuple(rng.uniform(1.0, 100.0, M + 1)), bound=0.05)
    _, _, spec = build_scenario(params, 0.1, N)
    x_eq = compute_equilibrium(params)
    x_bar = x_eq + 0.1 * rng.standard_normal(x_eq.size)
    u = rng.uniform(-1.0, 1.0, N * 3)
    return replace(spec, x_bar=x_bar), u


def random_quadratic_box(seed, n=4):
    """Convex quadratic over a box with known L = largest eigenvalue.

    Returns ``(spec, L, phi)`` where ``phi(u)`` is the composite objective.
    """
    from panoc_nmpc.prox import penalty_value

    rng = np.random.default_rng(seed)
    Q, eig = random_spd(rng, n, cond=rng.uniform(1.0, 50.0))
    Q *= rng.uniform(0.1, 10.0)
    lo = -rng.uniform(0.1, 2.0, n)
    hi = rng.uniform(0.1, 2.0, n)
    spec = quadratic(Q, 3.0 * rng.standard_normal(n), ProxSpec.box(lo, hi))
    L = float(np.linalg.eigvalsh(Q).max())

    def phi(u):
        return float(spec.model.ell(np.zeros(1), u)) + penalty_value(spec.g, u)

    return spec, L, phi


def smooth_strongly_convex(n=5, seed=0):
    """l(u) = u'Qu/2 + c'u + sum log(1 + exp(u_i)), g = 0."""
    rng = np.random.default_rng(seed)
    Q, _ = random_spd(rng, n, cond=20.0)
    c = rng.standard_normal(n)

    def ell(x, u):
        return 0.5 * u @ Q @ u + c @ u + float(np.sum(np.logaddexp(0.0, u)))

    def grad_ell(x, u):
        return np.zeros_like(x), Q @ u + c + 1.0 / (1.0 + np.exp(-u))

    model = DiscreteModel(
        f=lambda x, u: x.copy(),
        ell=ell,
        vjp_f=lambda x, u, w: (w.copy(), np.zeros(n)),
        grad_ell=grad_ell,
    )
    return ProblemSpec(Dims(N=1, nx=1, nu=n), model, ProxSpec.zero(), np.zeros(1))


def constant_gamma_steps(trace):
    """Indices k whose step k -> k+1 was taken and judged at a single gamma."""
    return [k for k in range(len(trace) - 1) if not trace[k + 1].gamma_changed]


def line_search_slacks(trace):
    """``fbe_k - sigma ||r_k||^2 - fbe_{k+1}`` at every constant-gamma step."""
    return np.array([
        trace[k].fbe - trace[k].sigma * trace[k].res_sq - trace[k + 1].fbe
        for k in constant_gamma_steps(trace)
    ])


def telescoping_gaps(trace):
    """Per constant-gamma run: (budget, spent) with budget = (fbe_a - fbe_b)/sigma."""
    steps = set(constant_gamma_steps(trace))
    out = []
    k = 0
    while k < len(trace) - 1:
        if k not in steps:
            k += 1
            continue
        a = k
        while k in steps:
            k += 1
        sigma = trace[a].sigma
        spent = sum(trace[j].res_sq for j in range(a, k))
        out.append(((trace[a].fbe - trace[k].fbe) / sigma, spent))
    return out
