"""Pseudo-transient continuation on an abstract Hilbert-space problem.

A problem supplies the residual ``F(u)`` as a dual vector (its pairings with
the basis), the Jacobian matrix and the Gram matrix of the inner product.
One PTC step solves

    (G - k J(u_n)) delta = F(u_n),    u_{n+1} = u_n + k delta,

and the next pseudo time step is predicted from two pairings, so no dual
norms are needed in production.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIncrement, NotApplicable
from .linear_solver import solve

K_MIN = 1e-8
K_MAX = 1e8
EPS_DEN = 1e-14
STATIONARITY_TOL = 1e-12


class HilbertProblem(ABC):
    """Finite-dimensional view of ``F: X -> X'`` in a fixed basis.

    ``apply_residual(u) @ v`` is the pairing ``<F(u), v>``, ``v @ jacobian(u) @ w``
    is ``<F'(u) w, v>`` and ``gram()`` is the matrix of ``(., .)_X``.
    Implementations must not mutate state inside these calls.
    """

    @abstractmethod
    def apply_residual(self, u):
        ...

    @abstractmethod
    def jacobian(self, u):
        ...

    @abstractmethod
    def gram(self):
        ...

    def apply_jacobian(self, u, w):
        return self.jacobian(u) @ w

    def pairing(self, u, v):
        return float(self.apply_residual(u) @ v)

    def inner_product(self, u, v):
        return float(u @ (self.gram() @ v))

    def norm(self, u):
        return np.sqrt(max(self.inner_product(u, u), 0.0))

    def dual_norm(self, phi):
        """``sup <phi, x> / |x|_X`` via the Riesz map (a solve with the Gram matrix)."""
        riesz = solve(self.gram(), phi)
        return np.sqrt(max(float(phi @ riesz), 0.0))

    def system_matrix(self, t, u):
        """Matrix of ``A[t; u] = (., .)_X - t <F'(u) ., .>``."""
        return self.gram() - t * self.jacobian(u)


class DenseProblem(HilbertProblem):
    """Algebraic backend from callables; ``gram`` defaults to the identity."""

    def __init__(self, residual, jacobian, gram=None, size=None):
        self._residual = residual
        self._jacobian = jacobian
        if gram is None:
            if size is None:
                raise ValueError("either gram or size is required")
            gram = np.eye(size)
        self._gram = np.asarray(gram, dtype=float)

    def apply_residual(self, u):
        return np.asarray(self._residual(u), dtype=float)

    def jacobian(self, u):
        return np.asarray(self._jacobian(u), dtype=float)

    def gram(self):
        return self._gram


@dataclass
class PtcState:
    n: int
    u: np.ndarray
    k: float
    residual_norm_estimate: float = float("nan")

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("pseudo time step must be positive")


@dataclass(frozen=True)
class StepControlRecord:
    pairing_n: float
    pairing_np1: float
    delta_norm_sq: float
    k_n: float
    mu_n: float
    L_n: float
    k_star: float
    k_star_raw: float
    degenerate: bool = False


def ptc_step(problem, state, solver=None):
    """One PTC step from ``state``; returns ``(delta, u_next)``.

    Raises :class:`~ptcfem.errors.SolverFailure` if the system cannot be solved.
    """
    A = problem.system_matrix(state.k, state.u)
    delta = solve(A, problem.apply_residual(state.u), solver)
    return delta, state.u + state.k * delta


def propose_step_size(pairing_n, pairing_np1, delta_norm_sq, k_n,
                      k_min=K_MIN, k_max=K_MAX, eps_den=EPS_DEN):
    """Next pseudo time step from ``<F(u_n), d>``, ``<F(u_{n+1}), d>`` and ``|d|_X^2``.

    ``k* = k_n / 2 * |(<F(u_n),d> - |d|^2) / (<F(u_{n+1}),d> - |d|^2)|``, clamped
    to ``[k_min, k_max]``. A vanishing denominator means the step behaved
    linearly, so ``k_max`` is proposed.
    """
    if delta_norm_sq < 0:
        raise ValueError("delta_norm_sq must be non-negative")
    if delta_norm_sq == 0:
        raise DegenerateIncrement("zero increment: the iterate is stationary")
    num = pairing_n - delta_norm_sq
    den = pairing_np1 - delta_norm_sq
    mu_n = num / (k_n * delta_norm_sq)
    L_n = 2.0 * abs(den) / (k_n**2 * delta_norm_sq**1.5)
    degenerate = abs(den) < eps_den * delta_norm_sq
    if degenerate:
        raw = np.inf
        k_star = k_max
    else:
        raw = 0.5 * k_n * abs(num / den)
        k_star = float(np.clip(raw, k_min, k_max))
    return StepControlRecord(float(pairing_n), float(pairing_np1), float(delta_norm_sq),
                             float(k_n), float(mu_n), float(L_n), k_star, float(raw),
                             bool(degenerate))


def theoretical_step_size(mu, L, residual_norm):
    """Minimizer ``mu / (L |F| - mu^2)`` of the reduction factor."""
    excess = L * residual_norm - mu**2
    if not excess > 0:
        raise NotApplicable("L*|F| <= mu^2: every step size reduces the residual")
    return mu / excess


def reduction_factor(t, mu, L, residual_norm):
    """Guaranteed residual reduction ``|F(u(t))| / |F(u_0)|`` after pseudo time ``t``."""
    s = 1.0 + t * mu
    return (1.0 + L * t**2 * residual_norm / (2.0 * s)) / s


def verify_reduction(problem, u0, t, mu, L, solver=None):
    """Measured residual ratio after one linearized step of length ``t`` and its bound.

    Dual norms are computed exactly, so this is meant for small dense
    backends. Returns ``(measured_ratio, gamma_bound)``.
    """
    r0 = problem.apply_residual(u0)
    norm0 = problem.dual_norm(r0)
    if t == 0:
        return 1.0, reduction_factor(0.0, mu, L, norm0)
    delta, u_t = ptc_step(problem, PtcState(0, np.asarray(u0, dtype=float), t), solver)
    ratio = problem.dual_norm(problem.apply_residual(u_t)) / norm0
    return ratio, reduction_factor(t, mu, L, norm0)


@dataclass
class PtcResult:
    u: np.ndarray
    converged: bool
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)


def ptc_solve(problem, u0, k0=1.0, solver=None, max_steps=200,
              stationarity_tol=STATIONARITY_TOL, k_min=K_MIN, k_max=K_MAX):
    """Run PTC with adaptive step control until the increment is negligible.

    Convergence is declared when ``|delta|_X <= tol * max(1, |u|_X)``.
    """
    state = PtcState(0, np.array(u0, dtype=float), float(k0))
    result = PtcResult(state.u, False)
    for _ in range(max_steps):
        delta, u_next = ptc_step(problem, state, solver)
        dnorm_sq = problem.inner_product(delta, delta)
        result.states.append(state)
        if np.sqrt(dnorm_sq) <= stationarity_tol * max(1.0, problem.norm(state.u)):
            result.u, result.converged = u_next, True
            return result
        rec = propose_step_size(problem.pairing(state.u, delta), problem.pairing(u_next, delta),
                                dnorm_sq, state.k, k_min, k_max)
        result.records.append(rec)
        state = PtcState(state.n + 1, u_next, rec.k_star)
        result.u = u_next
    return result

