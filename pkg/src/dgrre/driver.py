"""Run configuration and the experiment drivers behind the CLI."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

from .estimator import ConvergenceTable, EstimatorMonitor, EstimatorReport, estimator_initial
from .mesh import build_mesh
from .model import (
    TESTS,
    ConfigurationError,
    InitialData,
    ModelParams,
    case_params,
    initial_data,
    make_well,
)
from .solver import Discretization, SolveConfig, Trajectory, initial_state, run

CASES = TESTS + ("custom",)


@dataclass(frozen=True)
class RunConfig:
    test: str = "test1"
    N: int = 32
    p: int = 1
    gamma: float | None = None  # None -> the case default
    mu: float | None = None
    sigma: float | str = "auto"
    dt_coeff: float = 1.0
    T: float = 0.5
    bc_mode: str | None = None
    stride: int | str = "auto"
    output_dir: str = "dgrre_output"
    test3_variant: str = "c1"
    seed: int = 0
    well: str = "quartic"
    grading: str = "uniform"
    full_estimator: bool = True

    def __post_init__(self):
        if self.test not in CASES:
            raise ConfigurationError(f"test must be one of {CASES}")
        if not isinstance(self.N, int) or self.N < 2:
            raise ConfigurationError("N must be an integer >= 2")
        if not isinstance(self.p, int) or not 0 <= self.p <= 3:
            raise ConfigurationError("p must be an integer in 0..3")
        if self.sigma != "auto" and not (isinstance(self.sigma, (int, float)) and self.sigma > 0):
            raise ConfigurationError("sigma must be 'auto' or a positive number")
        if not self.T >= 0 or not self.dt_coeff > 0:
            raise ConfigurationError("T must be >= 0 and dt_coeff > 0")
        if self.stride != "auto" and not (isinstance(self.stride, int) and self.stride >= 1):
            raise ConfigurationError("stride must be 'auto' or a positive integer")
        if self.bc_mode not in (None, "periodic", "natural"):
            raise ConfigurationError("bc_mode must be periodic or natural")
        if self.test3_variant not in ("c1", "printed"):
            raise ConfigurationError("test3_variant must be 'c1' or 'printed'")
        if self.grading not in ("uniform", "random"):
            raise ConfigurationError("grading must be uniform or random")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # resolved values
    def resolved(self) -> dict[str, Any]:
        if self.test == "custom":
            raise ConfigurationError("the custom case is available through the Python API only")
        base = case_params(self.test)
        out = dict(base)
        if self.gamma is not None:
            out["gamma"] = float(self.gamma)
        if self.mu is not None:
            out["mu"] = float(self.mu)
        if self.bc_mode is not None:
            out["bc_mode"] = self.bc_mode
        return out

    @property
    def snapshot_stride(self) -> int:
        if self.stride == "auto":
            return 1 if self.N <= 128 else max(1, (self.N // 128) ** 2)
        return int(self.stride)


@dataclass
class RunResult:
    config: RunConfig
    disc: Discretization
    trajectory: Trajectory
    report: EstimatorReport
    initial_estimator: dict | None
    extras: dict = field(default_factory=dict)


def checkpoint_selector(count: int):
    """Keep ``count`` evenly spaced levels (always the first and the last)."""
    def keep(n: int, n_steps: int) -> bool:
        if n in (0, n_steps):
            return True
        if count < 2:
            return False
        marks = {round(i * n_steps / (count - 1)) for i in range(count)}
        return n in marks
    return keep


def run_case(config: RunConfig, data: InitialData | None = None, params: ModelParams | None = None,
             domain: tuple[float, float] | None = None, n_checkpoints: int = 11,
             keep=None) -> RunResult:
    """Solve one configuration and evaluate all indicators along the way.

    ``data``/``params``/``domain`` supply a custom case from Python.
    ``keep(n, n_steps)`` overrides which states the trajectory stores.
    """
    if config.test == "custom":
        if data is None or params is None:
            raise ConfigurationError("custom runs need initial data and model parameters")
        dom = domain or params.domain
    else:
        res = config.resolved()
        params = ModelParams(res["gamma"], res["mu"], make_well(config.well), res["bc_mode"], res["domain"])
        data = initial_data(config.test, params.gamma, config.test3_variant)
        dom = res["domain"]
    mesh = build_mesh(dom, config.N, config.grading, params.bc_mode, seed=config.seed)
    sigma = None if config.sigma == "auto" else float(config.sigma)
    disc = Discretization(mesh, config.p, params, sigma)
    solve = SolveConfig(T=config.T, dt_coeff=config.dt_coeff, sigma=sigma)
    dt = solve.time_step(config.N)
    state0 = initial_state(disc, data.u0, data.du0, data.v0)
    monitor = EstimatorMonitor(disc, dt, stride=config.snapshot_stride, exact=data.exact,
                               full=config.full_estimator, stationary_exact=data.stationary)
    traj = run(disc, state0, solve, stride=config.snapshot_stride, observer=monitor,
               keep=keep or checkpoint_selector(n_checkpoints))
    E0 = estimator_initial(data, state0, params, disc.sigma)
    monitor.report.E0 = E0
    monitor.report.meta.update({"test": config.test, "gamma": params.gamma, "mu": params.mu,
                                "sigma": disc.sigma, "bc_mode": params.bc_mode})
    return RunResult(config, disc, traj, monitor.report, E0)


def converge(template: RunConfig, Ns: list[int], ps: list[int], *, keep_results: bool = False):
    """Convergence sweep; returns one table per degree (and optionally the runs)."""
    if len(Ns) < 2:
        raise ConfigurationError("a convergence sweep needs at least two values of N")
    tables: dict[int, ConvergenceTable] = {}
    results: dict[tuple[int, int], RunResult | str] = {}
    with_error = template.test == "test1"
    for p in ps:
        table = ConvergenceTable(p, with_error=with_error)
        for N in sorted(Ns):
            cfg = template.replace(N=N, p=p)
            try:
                r = run_case(cfg)
            except Exception as exc:  # gap marker; the sweep goes on
                results[(p, N)] = f"failed: {exc}"
                table.add(N, _width(cfg), math.nan, math.nan if with_error else None)
                continue
            s = r.report.summary()
            if r.trajectory.failure:
                table.add(N, r.disc.mesh.h_max, math.nan, math.nan if with_error else None)
            else:
                table.add(N, r.disc.mesh.h_max, s["max_H_R"], s.get("max_e_R") if with_error else None)
            results[(p, N)] = r if keep_results else s
        tables[p] = table
    return tables, results


def _width(cfg: RunConfig) -> float:
    a, b = cfg.resolved()["domain"]
    return (b - a) / cfg.N
