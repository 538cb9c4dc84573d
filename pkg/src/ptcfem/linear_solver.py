"""Linear solves for the symmetric PTC systems.

Two interchangeable strategies: sparse LU (SuperLU) with a few steps of
iterative refinement, and Jacobi-preconditioned conjugate gradients. Every
solve ends with a residual check against the contract; a violation raises.
"""
from dataclasses import dataclass
import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (IndefiniteMatrix, MaxIterationsExceeded, SingularFactorization,
                     SolverFailure)

log = logging.getLogger(__name__)

METHODS = ("direct", "cg")


@dataclass(frozen=True)
class LinearSolveContract:
    """How to solve, and what counts as success.

    ``tolerance`` bounds the relative residual ``|Ax - b| / |b|``.
    """

    method: str = "direct"
    tolerance: float = 1e-12
    max_iterations: int = 10000
    refinement_steps: int = 3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver method {self.method!r}; choose from {METHODS}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


DEFAULT_CONTRACT = LinearSolveContract()


@dataclass(frozen=True)
class SolveReport:
    method: str
    relative_residual: float
    iterations: int


def _direct_factor(A):
    if sp.issparse(A):
        try:
            lu = spla.splu(sp.csc_matrix(A))
        except RuntimeError as exc:
            raise SingularFactorization(str(exc)) from exc
        if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0):
            raise SingularFactorization("zero pivot in sparse LU factorization")
        return lu.solve
    A = np.asarray(A, dtype=float)
    with warnings.catch_warnings():
        # singularity is reported by the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True, overwrite_a=False)
    d = np.abs(np.diag(lu))
    if np.any(d == 0) or d.min() <= np.finfo(float).eps * d.max() * A.shape[0]:
        raise SingularFactorization("matrix is numerically singular")
    return lambda b: scipy.linalg.lu_solve((lu, piv), b)


def _pcg(A, b, tol, maxiter):
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise IndefiniteMatrix("non-positive diagonal entry; matrix is not SPD")
    inv_diag = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    for it in range(1, maxiter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise IndefiniteMatrix(f"non-positive curvature at CG iteration {it}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise MaxIterationsExceeded(f"CG did not reach tolerance in {maxiter} iterations")


def solve(A, b, contract=None, return_report=False):
    """Solve ``A x = b`` under ``contract`` (defaults to sparse direct, 1e-12)."""
    contract = contract or DEFAULT_CONTRACT
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        x = np.zeros_like(b)
        rep = SolveReport(contract.method, 0.0, 0)
        return (x, rep) if return_report else x

    if contract.method == "direct":
        apply_inv = _direct_factor(A)
        x = apply_inv(b)
        iterations = 0
        rel = np.linalg.norm(b - A @ x) / bnorm
        while rel > contract.tolerance and iterations < contract.refinement_steps:
            x = x + apply_inv(b - A @ x)
            iterations += 1
            rel = np.linalg.norm(b - A @ x) / bnorm
    else:
        # a slightly tighter internal target leaves room for the recomputed residual
        x, iterations = _pcg(A, b, 0.5 * contract.tolerance, contract.max_iterations)
        rel = np.linalg.norm(b - A @ x) / bnorm

    if not np.all(np.isfinite(x)):
        raise SingularFactorization("solution contains non-finite values")
    log.debug("%s solve: n=%d rel.residual=%.3e iterations=%d",
              contract.method, b.size, rel, iterations)
    if rel > contract.tolerance:
        raise SolverFailure(
            f"{contract.method} solve residual {rel:.3e} exceeds tolerance {contract.tolerance:.1e}")
    rep = SolveReport(contract.method, float(rel), iterations)
    return (x, rep) if return_report else x
