"""Experiment runs: TOML configuration, epsilon sweeps, output files, slope fits.

Configuration schema (unknown keys are rejected)::

    problem = "sine-gordon"          # see ptcfem.problems.list_problems()
    epsilon = [1.0, 1e-2, 1e-4]      # one value or a list
    output_dir = "results"           # overridden by $PTCFEM_OUTPUT_DIR
    seed = 0                         # reserved for randomized fixtures
    workers = 1                      # concurrent epsilon runs

    [driver]                         # AdaptiveConfig fields
    theta = 0.5
    k0 = 1.0
    dof_max = 100000
    marking_fraction = 0.5
    k_min = 1e-8
    k_max = 1e8
    stationarity_tol = 1e-12
    max_iterations = 500
    record_timing = true             # false writes 0.0 seconds (byte-stable CSV)

    [mesh]
    resolution = 4

    [assembly]
    quadrature_order = "default"     # or an integer (verification rules)

    [solver]
    method = "direct"                # or "cg"
    tolerance = 1e-12
    max_iterations = 10000
    refinement_steps = 3

For every epsilon the run writes ``<stem>.csv`` (iteration log),
``<stem>_mesh.vtk``, ``<stem>_solution.vtk`` and finally ``summary.json``.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
import json
import os
from pathlib import Path
import sys

import numpy as np

from .driver import AdaptiveConfig, IterationLog, REFINE, run
from .errors import ConfigError, InsufficientData, UnknownProblem
from .linear_solver import METHODS, LinearSolveContract
from .mesh import build_initial_mesh
from .problems import builtin
from .vtk import write_vtk

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_DIR_ENV = "PTCFEM_OUTPUT_DIR"

_DRIVER_KEYS = {"theta", "k0", "dof_max", "marking_fraction", "k_min", "k_max",
                "stationarity_tol", "max_iterations", "record_timing"}
_SOLVER_KEYS = {f.name for f in fields(LinearSolveContract)}
_TOP_KEYS = {"problem", "epsilon", "output_dir", "seed", "workers"}
_SECTIONS = {"driver": _DRIVER_KEYS, "mesh": {"resolution"},
             "assembly": {"quadrature_order"}, "solver": _SOLVER_KEYS}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    epsilon_list: tuple
    driver: AdaptiveConfig = field(default_factory=AdaptiveConfig)
    output_dir: str = "results"
    seed: int = 0
    workers: int = 1

    def validate(self):
        try:
            spec = builtin(self.problem)
        except UnknownProblem as exc:
            raise ConfigError(str(exc)) from None
        if not self.epsilon_list:
            raise ConfigError("epsilon list is empty")
        if any(not (isinstance(e, (int, float)) and e > 0) for e in self.epsilon_list):
            raise ConfigError("all epsilon values must be positive numbers")
        initial = build_initial_mesh(spec.domain, self.driver.resolution).n_dofs
        if self.driver.dof_max < initial:
            raise ConfigError(
                f"dof_max={self.driver.dof_max} is below the initial DOF count {initial}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


def _reject_unknown(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def parse_config(text):
    """Build a validated :class:`RunConfig` from TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    _reject_unknown(data, _TOP_KEYS | set(_SECTIONS), "top level")
    for name, allowed in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        _reject_unknown(section, allowed, f"[{name}]")
    if "problem" not in data or "epsilon" not in data:
        raise ConfigError("'problem' and 'epsilon' are required")
    eps = data["epsilon"]
    eps = tuple(eps) if isinstance(eps, list) else (eps,)

    drv = dict(data.get("driver", {}))
    drv.update(data.get("mesh", {}))
    order = data.get("assembly", {}).get("quadrature_order", "default")
    if order != "default" and not (isinstance(order, int) and order > 0):
        raise ConfigError("quadrature_order must be 'default' or a positive integer")
    drv["quadrature_order"] = None if order == "default" else order
    solver = data.get("solver", {})
    if solver.get("method", "direct") not in METHODS:
        raise ConfigError(f"solver method must be one of {METHODS}")
    try:
        drv["solver"] = LinearSolveContract(**solver)
        driver = AdaptiveConfig(**drv)
        cfg = RunConfig(problem=data["problem"], epsilon_list=eps, driver=driver,
                        output_dir=str(data.get("output_dir", "results")),
                        seed=int(data.get("seed", 0)), workers=int(data.get("workers", 1)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def fit_slope(log):
    """Least-squares slope of ``log10(total)`` against ``log10(DOF)``.

    Uses the last row of each DOF level within the final decade of DOF.
    Needs at least five REFINE rows spanning a decade.
    """
    rows = list(log)
    refines = [r for r in rows if r.action == REFINE]
    if len(refines) < 5:
        raise InsufficientData(f"need >= 5 REFINE rows, got {len(refines)}")
    dofs = np.array([r.dof for r in rows], dtype=float)
    if dofs.max() < 10 * dofs.min():
        raise InsufficientData("DOF range spans less than one decade")
    levels = IterationLog(rows).levels()
    dof = np.array([r.dof for r in levels], dtype=float)
    total = np.array([r.total for r in levels], dtype=float)
    window = dof >= dof[-1] / 10.0
    if window.sum() < 2:
        raise InsufficientData("fewer than two DOF levels in the final decade")
    slope, _ = np.polyfit(np.log10(dof[window]), np.log10(total[window]), 1)
    return float(slope)


def estimator_at_dof(log, dof):
    """Total estimator at ``dof`` by log-log interpolation between DOF levels."""
    levels = IterationLog(list(log)).levels()
    x = np.log10([r.dof for r in levels])
    y = np.log10([r.total for r in levels])
    if not x[0] <= np.log10(dof) <= x[-1]:
        raise InsufficientData(f"DOF {dof} outside the logged range")
    return float(10 ** np.interp(np.log10(dof), x, y))


def run_stem(problem, epsilon):
    return f"{problem}_eps{epsilon:.0e}"


def run_single(config, epsilon, output_dir):
    """One adaptive run at ``epsilon``; writes its files and returns a summary entry."""
    problem = builtin(config.problem, epsilon)
    solution, log = run(problem, config.driver)
    out = Path(output_dir)
    stem = run_stem(config.problem, epsilon)
    log.to_csv(out / f"{stem}.csv")
    write_vtk(out / f"{stem}_mesh.vtk", solution.mesh, title=f"{stem} mesh")
    write_vtk(out / f"{stem}_solution.vtk", solution.mesh, {"u": solution.coefficients},
              title=f"{stem} solution")
    try:
        slope = fit_slope(log)
    except InsufficientData:
        slope = None
    last = log[-1]
    return {
        "epsilon": epsilon,
        "slope": slope,
        "iterations": len(log),
        "final_dof": last.dof,
        "final_total_estimator": last.total,
        "log": f"{stem}.csv",
        "mesh_vtk": f"{stem}_mesh.vtk",
        "solution_vtk": f"{stem}_solution.vtk",
    }


def _run_single_args(args):
    return run_single(*args)


def run_experiment(config):
    """Run every epsilon of ``config``; returns the summary dictionary."""
    output_dir = Path(os.environ.get(OUTPUT_DIR_ENV) or config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(config, eps, output_dir) for eps in config.epsilon_list]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(_run_single_args, jobs))
    else:
        runs = [run_single(*job) for job in jobs]
    summary = {"problem": config.problem, "runs": runs}
    with open(output_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def with_epsilons(config, epsilons):
    return replace(config, epsilon_list=tuple(epsilons))
