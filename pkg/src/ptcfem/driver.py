"""Fully adaptive PTC-Galerkin loop.

Each iteration computes one PTC step on the current mesh, evaluates the
linearization and discretization residuals and then either refines the mesh
(discretization dominant, ``R^2 <= theta * sum eta^2``) or accepts the step
and predicts a new pseudo time step. The loop stops once the number of
degrees of freedom exceeds the budget.
"""
import csv
import io
import logging
import time
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from .assembly import FemFunction, FemProblem, interpolate_to_refined
from .errors import DegenerateIncrement, NonConvergence, SolverFailure
from .estimator import total_report
from .linear_solver import LinearSolveContract
from .mesh import build_initial_mesh
from .ptc import K_MAX, K_MIN, STATIONARITY_TOL, PtcState, propose_step_size, ptc_step

log = logging.getLogger(__name__)

CSV_HEADER = ("n", "dof", "k", "R", "eta", "total", "action", "seconds")
PTC, REFINE = "PTC", "REFINE"


@dataclass(frozen=True)
class AdaptiveConfig:
    theta: float = 0.5
    k0: float = 1.0
    dof_max: int = 10_000
    marking_fraction: float = 0.5
    k_min: float = K_MIN
    k_max: float = K_MAX
    stationarity_tol: float = STATIONARITY_TOL
    max_iterations: int = 500
    resolution: int = 4
    quadrature_order: Optional[int] = None
    solver: LinearSolveContract = LinearSolveContract()
    record_timing: bool = True

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0 < self.marking_fraction <= 1:
            raise ValueError("marking_fraction must lie in (0, 1]")
        if not 0 < self.k_min <= self.k0 <= self.k_max:
            raise ValueError("need 0 < k_min <= k0 <= k_max")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class IterationRow:
    n: int
    dof: int
    k: float
    R: float
    eta: float
    total: float
    action: str
    seconds: float


class IterationLog:
    """Rows of the adaptive loop, one per computed PTC step."""

    def __init__(self, rows=None):
        self.rows = list(rows or [])
        self.sigma_f = []  # diagnostic: max f'(u_n) per row, never used for control

    def append(self, row):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path=None):
        """CSV text (``repr`` floats, so parsing reproduces the rows exactly)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([int(r.n), int(r.dof), *(repr(float(v)) for v in (r.k, r.R, r.eta, r.total)),
                        r.action, repr(float(r.seconds))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Parse CSV text or a path to a CSV file written by :meth:`to_csv`."""
        if "\n" not in str(source):
            with open(source, encoding="utf-8") as fh:
                source = fh.read()
        reader = csv.reader(io.StringIO(source))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        types = [f.type for f in fields(IterationRow)]
        conv = {int: int, float: float, str: str, "int": int, "float": float, "str": str}
        rows = [IterationRow(*(conv[t](v) for t, v in zip(types, rec))) for rec in reader if rec]
        return cls(rows)

    def levels(self):
        """Last row at each DOF level, in order."""
        out = []
        for r in self.rows:
            if out and out[-1].dof == r.dof:
                out[-1] = r
            else:
                out.append(r)
        return out


class DriverResult(NamedTuple):
    solution: FemFunction
    log: IterationLog


def mark(eta_per_element, marking_fraction):
    """Doerfler marking: fewest elements carrying ``marking_fraction`` of ``sum eta^2``.

    Ties are broken by element id. If every indicator vanishes the lowest id
    is returned so that refinement still makes progress.
    """
    eta = np.asarray(eta_per_element, dtype=float)
    if np.any(eta < 0):
        raise ValueError("indicators must be non-negative")
    if eta.size == 0:
        return np.zeros(0, dtype=np.int64)
    sq = eta**2
    order = np.lexsort((np.arange(eta.size), -sq))
    cum = np.cumsum(sq[order])
    if cum[-1] == 0:
        return np.array([0], dtype=np.int64)
    count = int(np.searchsorted(cum, marking_fraction * cum[-1], side="left")) + 1
    return np.sort(order[:min(count, eta.size)])


def refine_with_dofs(mesh, u, marked, max_passes=8):
    """Refine ``marked`` and carry ``u`` over, guaranteeing at least one new DOF.

    A bisection pass can create only Dirichlet vertices (all bisected edges on
    the boundary); the freshly created elements are then bisected again.
    """
    base = mesh.n_dofs
    child, ancestry = mesh.refine(marked)
    u = interpolate_to_refined(u, mesh, child, ancestry)
    for _ in range(max_passes):
        if child.n_dofs > base:
            break
        fresh = np.flatnonzero((child.elements >= mesh.n_vertices).any(axis=1))
        mesh = child
        child, ancestry = mesh.refine(fresh)
        u = interpolate_to_refined(u, mesh, child, ancestry)
    else:  # pragma: no cover - bisecting interior edges always adds DOF
        raise RuntimeError("refinement did not add degrees of freedom")
    return child, u


def run(problem, config=None, mesh=None, callback=None):
    """Solve ``problem`` with the fully adaptive PTC-Galerkin method.

    Parameters
    ----------
    problem : ProblemSpec
    config : AdaptiveConfig, optional
    mesh : Mesh, optional
        Starting mesh; by default the criss-cross mesh of ``problem.domain``
        with ``config.resolution`` cells per side.
    callback : callable, optional
        Called as ``callback(row, mesh, report)`` after every iteration.

    Returns
    -------
    DriverResult
        ``(solution, log)``; the solution is the latest iterate on the
        latest mesh.
    """
    config = config or AdaptiveConfig()
    if mesh is None:
        mesh = build_initial_mesh(problem.domain, config.resolution)
    u = FemFunction(mesh, problem.initial_coefficients(mesh))
    k = float(config.k0)
    out = IterationLog()
    n = 0
    while mesh.n_dofs <= config.dof_max:
        if n >= config.max_iterations:
            raise NonConvergence(
                f"iteration cap {config.max_iterations} reached at {mesh.n_dofs} DOF", out)
        t0 = time.perf_counter()
        fem = FemProblem(mesh, problem, config.quadrature_order)
        try:
            d_int, unext_int = ptc_step(fem, PtcState(n, u.interior, k), config.solver)
        except SolverFailure as exc:
            exc.log = out
            raise
        delta = fem.function(d_int)
        u_next = fem.function(unext_int)
        report = total_report(u, delta, k, problem, config.quadrature_order)
        refine = report.R_omega_sq <= config.theta * report.eta_total_sq
        out.sigma_f.append(float(np.max(problem.f_prime(u.interior), initial=-np.inf)))
        if refine:
            report.marked = mark(report.eta_per_element, config.marking_fraction)
            mesh, u = refine_with_dofs(mesh, u_next, report.marked)
            action, k_next = REFINE, k
        else:
            action = PTC
            dnorm_sq = fem.inner_product(d_int, d_int)
            k_next = k
            try:
                rec = propose_step_size(fem.pairing(u.interior, d_int),
                                        fem.pairing(unext_int, d_int),
                                        dnorm_sq, k, config.k_min, config.k_max)
                k_next = rec.k_star
            except DegenerateIncrement:
                pass
            u = u_next
        seconds = time.perf_counter() - t0 if config.record_timing else 0.0
        row = IterationRow(n, fem.mesh.n_dofs, k, report.R_omega, report.eta_total,
                           report.total_estimator, action, seconds)
        out.append(row)
        log.debug("n=%d dof=%d k=%.3e R=%.3e eta=%.3e %s", n, row.dof, k, row.R, row.eta, action)
        if callback is not None:
            callback(row, fem.mesh, report)
        k = k_next
        n += 1
    return DriverResult(u, out)


def solve_on_mesh(problem, mesh, u0=None, k0=K_MAX, config=None, max_steps=100):
    """PTC with step control on a fixed mesh until the update is negligible.

    Stops once the update ``k_n delta_n`` (not ``delta_n`` alone, which is tiny
    whenever ``k_n`` is large) drops below ``stationarity_tol`` relative to
    the iterate. Returns ``(u_n, delta_n, k_n)`` of the last step taken, so
    the estimator can be evaluated at the converged iterate.
    """
    config = config or AdaptiveConfig()
    fem = FemProblem(mesh, problem, config.quadrature_order)
    u = u0 if u0 is not None else FemFunction(mesh, problem.initial_coefficients(mesh))
    k = float(k0)
    for n in range(max_steps):
        d_int, unext_int = ptc_step(fem, PtcState(n, u.interior, k), config.solver)
        delta = fem.function(d_int)
        dnorm_sq = fem.inner_product(d_int, d_int)
        if k * np.sqrt(dnorm_sq) <= config.stationarity_tol * max(1.0, fem.norm(unext_int)):
            break
        if n == max_steps - 1:
            break
        rec = propose_step_size(fem.pairing(u.interior, d_int), fem.pairing(unext_int, d_int),
                                dnorm_sq, k, config.k_min, config.k_max)
        u, k = fem.function(unext_int), rec.k_star
    return u, delta, k
