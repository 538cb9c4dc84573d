"""Adaptive pseudo-transient continuation Galerkin solver for -eps Lap u = f(u).

The public entry points are :func:`run` (the adaptive loop), :func:`builtin`
(registered benchmark problems) and :func:`ptc_solve` (PTC on an abstract
Hilbert-space problem).
"""
from .assembly import FemFunction, FemProblem, energy_error, energy_norm, evaluate
from .driver import AdaptiveConfig, DriverResult, IterationLog, IterationRow, mark, run, solve_on_mesh
from .errors import *  # noqa: F401,F403
from .estimator import EstimatorReport, total_report
from .experiment import RunConfig, fit_slope, load_config, parse_config, run_experiment
from .linear_solver import LinearSolveContract, solve
from .mesh import DomainSpec, Mesh, build_initial_mesh
from .problems import ProblemSpec, builtin, list_problems
from .ptc import DenseProblem, HilbertProblem, PtcState, propose_step_size, ptc_solve, ptc_step

__version__ = "0.1.0"
