"""JSON run configuration for the command-line driver.

Every section and key is optional; missing values take the benchmark
defaults below. Unknown keys are rejected so typos do not silently fall back
to defaults.

.. code-block:: json

    {
      "problem": {"type": "chain", "M": 5, "m": 0.03, "D": 0.1, "L": 0.033,
                  "beta": 1.0, "gamma_w": 1.0, "delta": 0.01,
                  "mu": [100, 100, 100, 10, 10, 10], "p_end": [1, 0, 0],
                  "bound": -0.1, "input_bound": 1.0},
      "horizon": {"ts": 0.1, "N": 40},
      "solver": {"algorithm": "panoc", "tol": 1e-3, "max_iter": 5000,
                 "max_time": null, "lbfgs_memory": 10,
                 "max_backtracks": 20, "max_halvings": 60},
      "simulation": {"total_time": 15.0, "warm_start": false},
      "bench": {"tol": 1e-6, "max_iter": 50000},
      "output": {"dir": "out", "trace": true}
    }

A custom problem is given as ``{"type": "custom", "factory": "pkg.mod:func"}``
where ``func(ts, N)`` returns a :class:`~panoc_nmpc.problem.ProblemSpec`.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .chain import ChainParams
from .solver import SolverOptions

__all__ = ["ConfigError", "RunConfig", "load_config", "config_from_dict"]

ALGORITHMS = ("panoc", "fbs")


class ConfigError(ValueError):
    pass


@dataclass
class HorizonConfig:
    ts: float = 0.1
    N: int = 40


@dataclass
class SolverConfig:
    algorithm: str = "panoc"
    tol: float = 1e-3
    max_iter: int = 5000
    max_time: Optional[float] = None
    lbfgs_memory: int = 10
    max_backtracks: int = 20
    max_halvings: int = 60

    def options(self, **overrides) -> SolverOptions:
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "algorithm"}
        kw.update(overrides)
        return SolverOptions(**kw)


@dataclass
class SimulationConfig:
    total_time: float = 15.0
    warm_start: bool = False


@dataclass
class BenchConfig:
    tol: float = 1e-6
    max_iter: int = 50000


@dataclass
class OutputConfig:
    dir: str = "out"
    trace: bool = True


@dataclass
class RunConfig:
    problem: dict = field(default_factory=lambda: {"type": "chain"})
    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def simulation_steps(self) -> int:
        return int(round(self.simulation.total_time / self.horizon.ts))

    @property
    def is_chain(self) -> bool:
        return self.problem.get("type", "chain") == "chain"

    def chain_params(self) -> ChainParams:
        kw = {k: v for k, v in self.problem.items() if k != "type"}
        for key in ("mu", "p_end", "a"):
            if key in kw:
                kw[key] = tuple(float(v) for v in kw[key])
        try:
            return ChainParams(**kw)
        except TypeError as exc:
            raise ConfigError(f"problem: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def custom_factory(self):
        ref = self.problem.get("factory")
        if not ref or ":" not in ref:
            raise ConfigError("custom problem needs 'factory': 'module:function'")
        mod, _, name = ref.partition(":")
        try:
            return getattr(importlib.import_module(mod), name)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot load factory {ref!r}: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "horizon": HorizonConfig,
    "solver": SolverConfig,
    "simulation": SimulationConfig,
    "bench": BenchConfig,
    "output": OutputConfig,
}


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"problem"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    cfg = RunConfig(**{k: _section(cls, data[k], k) for k, cls in _SECTIONS.items() if k in data})
    if "problem" in data:
        if not isinstance(data["problem"], dict):
            raise ConfigError("section 'problem' must be an object")
        cfg.problem = dict(data["problem"])
        cfg.problem.setdefault("type", "chain")
    ptype = cfg.problem["type"]
    if ptype not in ("chain", "custom"):
        raise ConfigError(f"problem type must be 'chain' or 'custom', got {ptype!r}")
    if ptype == "chain":
        known = {f.name for f in fields(ChainParams)} | {"type"}
        unknown = set(cfg.problem) - known
        if unknown:
            raise ConfigError(f"unknown keys in 'problem': {sorted(unknown)}")
        cfg.chain_params()
    if cfg.solver.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {cfg.solver.algorithm!r}")
    if not cfg.horizon.ts > 0:
        raise ConfigError("horizon.ts must be positive")
    if cfg.horizon.N < 1:
        raise ConfigError("horizon.N must be >= 1")
    if not cfg.simulation.total_time > 0:
        raise ConfigError("simulation.total_time must be positive")
    try:
        cfg.solver.options()
        cfg.solver.options(tol=cfg.bench.tol, max_iter=cfg.bench.max_iter)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)
