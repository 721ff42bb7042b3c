"""Command-line driver: ``panoc-nmpc {solve,mpc,bench}``.

Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chain import build_scenario, chain_soft_outputs
from .config import ConfigError, RunConfig, load_config
from .problem import validate
from .simulation import MpcAbort, closed_loop, compare_solvers
from .solver import SOLVERS_BY_NAME, write_trace_csv

log = logging.getLogger("panoc_nmpc")

MPC_COLUMNS = ("step", "time_s", "solve_time_s", "iterations", "status",
               "u0_x", "u0_y", "u0_z", "min_p2")
BENCH_COLUMNS = ("algorithm", "k", "res_inf")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def build_problem(cfg: RunConfig):
    """Return ``(spec, outputs)``; ``outputs`` maps a state to its constrained coordinates."""
    ts, N = cfg.horizon.ts, cfg.horizon.N
    if cfg.is_chain:
        params = cfg.chain_params()
        _, _, spec = build_scenario(params, ts, N)
        return spec, (lambda x: chain_soft_outputs(params, x))
    spec = cfg.custom_factory()(ts, N)
    return spec, None


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _prepare(cfg: RunConfig):
    spec, outputs = build_problem(cfg)
    report = validate(spec)
    if not report.ok:
        raise ConfigError("problem validation failed: " + "; ".join(report.failures))
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return spec, outputs, out


def run_solve(cfg: RunConfig) -> int:
    spec, _, out = _prepare(cfg)
    solve = SOLVERS_BY_NAME[cfg.solver.algorithm]
    t0 = time.perf_counter()
    sol = solve(spec, None, cfg.solver.options())
    wall = time.perf_counter() - t0
    if cfg.output.trace:
        write_trace_csv(sol.trace, out / "trace.csv")
    _write_json(out / "summary.json", {
        "algorithm": cfg.solver.algorithm,
        "status": sol.status,
        "iterations": sol.iterations,
        "final_residual": sol.final_residual,
        "fbe_final": sol.fbe,
        "wall_time_s": wall,
    })
    log.info("%s: %s after %d iterations (|r|_inf = %.3e, %.2f s)",
             cfg.solver.algorithm, sol.status, sol.iterations, sol.final_residual, wall)
    if sol.status == "numerical_error":
        print(f"solver failed: {sol.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def run_mpc(cfg: RunConfig) -> int:
    spec, outputs, out = _prepare(cfg)
    steps = cfg.simulation_steps
    fh = open(out / "mpc.csv", "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(MPC_COLUMNS)

    def on_step(rec):
        writer.writerow([rec.step, rec.time_s, rec.solve_time_s, rec.iterations, rec.status,
                         *rec.u0.tolist(), rec.min_p2])
        log.debug("step %d: %d iterations", rec.step, rec.iterations)

    try:
        result = closed_loop(spec, steps, cfg.solver.options(), cfg.solver.algorithm,
                             cfg.simulation.warm_start, outputs, on_step)
    except MpcAbort as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER
    finally:
        fh.close()
    summary = result.summary(outputs)
    summary["algorithm"] = cfg.solver.algorithm
    summary["warm_start"] = cfg.simulation.warm_start
    _write_json(out / "mpc_summary.json", summary)
    log.info("closed loop: %d steps, mean solve %.3f s", summary["steps"], summary["mean_solve_time_s"])
    return EXIT_OK


def run_bench(cfg: RunConfig) -> int:
    spec, _, out = _prepare(cfg)
    opts = {
        "panoc": cfg.solver.options(tol=cfg.bench.tol),
        "fbs": cfg.solver.options(tol=cfg.bench.tol, max_iter=cfg.bench.max_iter),
    }
    threads = max(1, int(os.environ.get("NMPC_THREADS", "1") or 1))
    sols = compare_solvers(spec, opts, threads=threads)
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for name, sol in sols.items():
            for rec in sol.trace:
                w.writerow([name, rec.k, rec.res_inf])
    p, f = sols["panoc"], sols["fbs"]
    _write_json(out / "bench.json", {
        "panoc_iters": p.iterations,
        "fbs_iters": f.iterations,
        "ratio": f.iterations / p.iterations,
        "panoc_status": p.status,
        "fbs_status": f.status,
        "panoc_final_residual": p.final_residual,
        "fbs_final_residual": f.final_residual,
        "solution_distance_inf": float(np.max(np.abs(p.u_bar - f.u_bar))),
    })
    log.info("bench: panoc %d / fbs %d iterations", p.iterations, f.iterations)
    if any(s.status == "numerical_error" for s in sols.values()):
        return EXIT_SOLVER
    return EXIT_OK


COMMANDS = {"solve": run_solve, "mpc": run_mpc, "bench": run_bench}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which here means solver failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="panoc-nmpc", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--algorithm", choices=sorted(SOLVERS_BY_NAME))
    parser.add_argument("--tol", type=float)
    parser.add_argument("--warm-start", action="store_true", default=None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output = replace(cfg.output, dir=args.out)
        if args.algorithm:
            cfg.solver = replace(cfg.solver, algorithm=args.algorithm)
        if args.tol is not None:
            cfg.solver = replace(cfg.solver, tol=args.tol)
            try:
                cfg.solver.options()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if args.warm_start:
            cfg.simulation = replace(cfg.simulation, warm_start=True)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
