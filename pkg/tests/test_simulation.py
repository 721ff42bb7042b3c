import numpy as np
import pytest

from panoc_nmpc import ChainParams, SolverOptions, build_scenario, closed_loop
from panoc_nmpc.chain import chain_soft_outputs
from panoc_nmpc.simulation import MpcAbort, compare_solvers, shift_warm_start


@pytest.fixture(scope="module")
def scenario():
    params = ChainParams(M=3, mu=(100.0, 100.0, 10.0, 10.0))
    return params, build_scenario(params, 0.1, 10)[2]


def test_shift_warm_start():
    u = np.arange(6.0)
    np.testing.assert_array_equal(shift_warm_start(u, 2), [2, 3, 4, 5, 4, 5])


def test_closed_loop_records(scenario):
    params, spec = scenario
    seen = []
    res = closed_loop(spec, 4, outputs=lambda x: chain_soft_outputs(params, x), callback=seen.append)
    assert len(res.steps) == 4 and seen == res.steps and res.all_converged
    assert np.array_equal(res.steps[0].state, spec.x_bar)
    assert [s.time_s for s in res.steps] == pytest.approx([0.0, 0.1, 0.2, 0.3])
    summary = res.summary(lambda x: chain_soft_outputs(params, x))
    assert len(summary["min_p2_per_point"]) == 4
    assert summary["min_p2_per_point"] == pytest.approx(
        np.min([chain_soft_outputs(params, s.state) for s in res.steps], axis=0).tolist()
    )


def test_warm_start_converges(scenario):
    _, spec = scenario
    cold = closed_loop(spec, 5)
    warm = closed_loop(spec, 5, warm_start=True)
    assert cold.all_converged and warm.all_converged
    # first solve is identical; plant trajectories differ only through solver tolerance
    assert cold.steps[0].iterations == warm.steps[0].iterations


def test_abort_names_step(scenario):
    _, spec = scenario
    with pytest.raises(MpcAbort, match="step 0"):
        closed_loop(spec, 3, SolverOptions(tol=1e-12, max_iter=2))


def test_compare_solvers_threads(scenario):
    _, spec = scenario
    opts = {"panoc": SolverOptions(tol=1e-6), "fbs": SolverOptions(tol=1e-6, max_iter=50000)}
    serial = compare_solvers(spec, opts)
    threaded = compare_solvers(spec, opts, threads=2)
    for name in opts:
        assert np.array_equal(serial[name].u_bar, threaded[name].u_bar)
        assert serial[name].iterations == threaded[name].iterations
