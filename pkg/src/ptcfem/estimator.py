"""Residual indicators for one PTC-Galerkin step.

With ``u_{n+1} = u_n + k delta`` and the linearization
``T_f(w) = f(u_n) + f'(u_n)(w - u_n)``, the two families are

* linearization residual  ``R_T = |T_f(u_{n+1}) - delta - f(u_{n+1})|_{0,T}``,
* discretization residual ``eta_T^2 = a_T^2 |eps Lap u_{n+1} + T_f(u_{n+1}) - delta|_{0,T}^2
  + 1/2 sum_E eps^{-1/2} a_E |eps [grad u_{n+1}]|_{0,E}^2``

with the capped weights ``a = min(1, h / sqrt(eps))``. Only interior facets
enter the sum. In 1D a facet is an interior node and its "norm" is the
absolute point value.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import FemFunction, _check_same_mesh, _checked, p1_space
from .quadrature import edge_rule


def weights(h_T, h_E, epsilon):
    """Capped weights ``(min(1, h_T/sqrt(eps)), min(1, h_E/sqrt(eps)))``."""
    s = 1.0 / np.sqrt(epsilon)
    return np.minimum(1.0, s * np.asarray(h_T)), np.minimum(1.0, s * np.asarray(h_E))


def elementwise_laplacian(u, order=None):
    """``Lap u`` at quadrature points; identically zero for P1 functions.

    Kept so that the interior residual is written in full; see
    :func:`fem_residual_parts`.
    """
    V = p1_space(u.mesh, order)
    return np.zeros_like(V.qp_weights)


def _step_fields(u_n, delta_n, k_n, problem, order):
    _check_same_mesh(u_n, delta_n)
    V = p1_space(u_n.mesh, order)
    x = V.qp_coords if problem.source is not None else None
    un = V.at_qp(u_n.coefficients)
    d = V.at_qp(delta_n.coefficients)
    unp1 = un + k_n * d
    f_n = _checked(problem.reaction(un, x), "f(u_n)")
    fp_n = _checked(problem.f_prime(un), "f'(u_n)")
    f_np1 = _checked(problem.reaction(unp1, x), "f(u_{n+1})")
    lin_minus_delta = f_n + fp_n * (k_n * d) - d  # T_f(u_{n+1}) - delta
    return V, lin_minus_delta, f_np1


def linearization_residual(u_n, delta_n, k_n, problem, order=None):
    """Per-element linearization residuals ``R_{n,T}``."""
    V, lin_minus_delta, f_np1 = _step_fields(u_n, delta_n, k_n, problem, order)
    return np.sqrt(V.element_l2_sq(lin_minus_delta - f_np1))


def taylor_remainder(u_n, delta_n, k_n, problem, order=None):
    """Per-element ``|T_f(u_{n+1}) - f(u_{n+1})|_{0,T}``, the part of ``R_{n,T}`` that is ``O(k^2)``."""
    V, lin_minus_delta, f_np1 = _step_fields(u_n, delta_n, k_n, problem, order)
    d = V.at_qp(delta_n.coefficients)
    return np.sqrt(V.element_l2_sq(lin_minus_delta + d - f_np1))


def facet_jumps(u):
    """Normal-derivative jumps ``[grad u]`` on the interior facets.

    The jump is the sum over both sides of the one-sided limit taken in the
    direction of that side's outward normal, i.e. ``(g_flat - g_sharp) . n_sharp``.
    Returns ``(facet_ids, jumps)``.
    """
    mesh = u.mesh
    facets = mesh.interior_facets
    g = p1_space(mesh).gradients(u.coefficients)
    sharp, flat = mesh.facet_elements[facets].T
    n = mesh.facet_normals[facets]
    jump = np.einsum("fd,fd->f", g[flat], n) + np.einsum("fd,fd->f", g[sharp], -n)
    return facets, jump


def facet_terms(u, epsilon):
    """Per-interior-facet ``eps^{-1/2} a_E |eps [grad u]|_{0,E}^2``; returns ``(facet_ids, terms)``."""
    mesh = u.mesh
    facets, jump = facet_jumps(u)
    h_E = mesh.facet_sizes[facets]
    _, alpha_E = weights(1.0, h_E, epsilon)
    if mesh.dim == 1:
        norm_sq = (epsilon * jump) ** 2
    else:
        _, w = edge_rule()
        # the jump of a P1 gradient is constant along each edge
        norm_sq = h_E * w.sum() * (epsilon * jump) ** 2
    return facets, epsilon**-0.5 * alpha_E * norm_sq


def fem_residual_parts(u_n, delta_n, k_n, problem, order=None, include_laplacian=True):
    """Per-element ``(interior_sq, facet_sq)`` contributions to ``eta_T^2``."""
    V, lin_minus_delta, _ = _step_fields(u_n, delta_n, k_n, problem, order)
    mesh = u_n.mesh
    eps = problem.epsilon
    u_np1 = FemFunction(mesh, u_n.coefficients + k_n * delta_n.coefficients)
    strong = lin_minus_delta
    if include_laplacian:
        strong = strong + eps * elementwise_laplacian(u_np1, order)
    alpha_T, _ = weights(mesh.diameters, 1.0, eps)
    interior_sq = alpha_T**2 * V.element_l2_sq(strong)
    facets, terms = facet_terms(u_np1, eps)
    facet_sq = np.zeros(mesh.n_elements)
    sharp, flat = mesh.facet_elements[facets].T
    np.add.at(facet_sq, sharp, 0.5 * terms)
    np.add.at(facet_sq, flat, 0.5 * terms)
    return interior_sq, facet_sq


def fem_residual(u_n, delta_n, k_n, problem, order=None):
    """Per-element discretization indicators ``eta_{n,T}``."""
    interior_sq, facet_sq = fem_residual_parts(u_n, delta_n, k_n, problem, order)
    return np.sqrt(interior_sq + facet_sq)


@dataclass
class EstimatorReport:
    eta_per_element: np.ndarray
    eta_total_sq: float
    R_per_element: np.ndarray
    R_omega_sq: float
    marked: Optional[np.ndarray] = None

    @property
    def total_estimator(self):
        return float(np.sqrt(self.R_omega_sq + self.eta_total_sq))

    @property
    def R_omega(self):
        return float(np.sqrt(self.R_omega_sq))

    @property
    def eta_total(self):
        return float(np.sqrt(self.eta_total_sq))


def total_report(u_n, delta_n, k_n, problem, order=None):
    """Both indicator families and their global aggregates for one step."""
    eta = fem_residual(u_n, delta_n, k_n, problem, order)
    R = linearization_residual(u_n, delta_n, k_n, problem, order)
    return EstimatorReport(eta, float(np.sum(eta**2)), R, float(np.sum(R**2)))
