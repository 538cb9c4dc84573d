"""P1 finite elements: function representation, matrices, forms and norms.

All forms are assembled vectorized over elements. Boundary vertices are
eliminated, so system matrices live on the interior vertices only.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AncestryMismatch, MeshMismatch, NonFiniteCoefficient
from .linear_solver import solve
from .ptc import HilbertProblem
from .quadrature import simplex_rule


class FemFunction:
    """Continuous piecewise-linear function with zero trace, by vertex values."""

    def __init__(self, mesh, coefficients):
        c = np.array(coefficients, dtype=float)
        if c.shape != (mesh.n_vertices,):
            raise ValueError(f"expected {mesh.n_vertices} coefficients, got shape {c.shape}")
        if np.any(c[mesh.boundary] != 0.0):
            raise ValueError("coefficients at Dirichlet vertices must be zero")
        self.mesh = mesh
        self.coefficients = c

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def from_interior(cls, mesh, values):
        c = np.zeros(mesh.n_vertices)
        c[mesh.interior_vertices] = values
        return cls(mesh, c)

    @property
    def mesh_generation(self):
        return self.mesh.generation

    @property
    def dirichlet_mask(self):
        return self.mesh.boundary

    @property
    def interior(self):
        return self.coefficients[self.mesh.interior_vertices]

    def __add__(self, other):
        _check_same_mesh(self, other)
        return FemFunction(self.mesh, self.coefficients + other.coefficients)

    def __mul__(self, scalar):
        return FemFunction(self.mesh, float(scalar) * self.coefficients)

    __rmul__ = __mul__

    def __neg__(self):
        return FemFunction(self.mesh, -self.coefficients)

    def __call__(self, points):
        return evaluate(self, points)

    def __repr__(self):
        return f"FemFunction(mesh={self.mesh!r})"


def _check_same_mesh(u, v):
    if u.mesh is v.mesh:
        return
    if u.mesh.generation != v.mesh.generation or u.mesh.n_vertices != v.mesh.n_vertices:
        raise MeshMismatch(
            f"functions live on different meshes (generations {u.mesh.generation} "
            f"and {v.mesh.generation})")


class P1Space:
    """Per-mesh cache of quadrature data and the constant-coefficient matrices."""

    def __init__(self, mesh, order=None):
        self.mesh = mesh
        self.order = order
        self.bary, w = simplex_rule(mesh.dim, order)
        self.qp_weights = np.outer(mesh.volumes, w)  # (M, Q), include |T|
        el = mesh.elements
        k = mesh.dim + 1
        self._rows = np.repeat(el, k, axis=1).ravel()
        self._cols = np.tile(el, (1, k)).ravel()
        self._stiffness = None
        self._mass = None
        self._qp_coords = None

    @property
    def qp_coords(self):
        if self._qp_coords is None:
            p = self.mesh.vertices[self.mesh.elements]  # (M, k, d)
            self._qp_coords = np.einsum("qi,mid->mqd", self.bary, p)
        return self._qp_coords

    def scatter_matrix(self, local):
        N = self.mesh.n_vertices
        A = sp.coo_matrix((local.ravel(), (self._rows, self._cols)), shape=(N, N))
        return A.tocsr()

    def scatter_vector(self, local):
        return np.bincount(self.mesh.elements.ravel(), weights=local.ravel(),
                           minlength=self.mesh.n_vertices)

    def local_stiffness(self):
        G = self.mesh.barycentric_gradients
        return np.einsum("mid,mjd->mij", G, G) * self.mesh.volumes[:, None, None]

    def local_mass(self):
        k = self.mesh.dim + 1
        ref = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
        return self.mesh.volumes[:, None, None] * ref

    @property
    def stiffness(self):
        """Full stiffness matrix (boundary rows included)."""
        if self._stiffness is None:
            self._stiffness = self.scatter_matrix(self.local_stiffness())
        return self._stiffness

    @property
    def mass(self):
        if self._mass is None:
            self._mass = self.scatter_matrix(self.local_mass())
        return self._mass

    def weighted_mass(self, c_qp):
        """Matrix of ``int c phi_i phi_j`` for ``c`` given at quadrature points."""
        local = np.einsum("mq,qi,qj->mij", c_qp * self.qp_weights, self.bary, self.bary)
        return self.scatter_matrix(local)

    def load(self, c_qp):
        """Vector of ``int c phi_i`` for ``c`` given at quadrature points."""
        local = (c_qp * self.qp_weights) @ self.bary
        return self.scatter_vector(local)

    def at_qp(self, coefficients):
        return coefficients[self.mesh.elements] @ self.bary.T

    def gradients(self, coefficients):
        """(M, d) elementwise constant gradients."""
        return np.einsum("mi,mid->md", coefficients[self.mesh.elements],
                         self.mesh.barycentric_gradients)

    def element_l2_sq(self, values_qp):
        """Per-element squared L2 norms of a field given at quadrature points."""
        return np.sum(values_qp**2 * self.qp_weights, axis=1)

    def restrict(self, A):
        dofs = self.mesh.interior_vertices
        return A[dofs][:, dofs].tocsr()


def p1_space(mesh, order=None):
    """Cached :class:`P1Space` for ``mesh`` and the given quadrature order."""
    cache = mesh.__dict__.setdefault("_p1_spaces", {})
    if order not in cache:
        cache[order] = P1Space(mesh, order)
    return cache[order]


def local_stiffness(points):
    """Stiffness matrix of a single simplex with vertices ``points``."""
    points = np.asarray(points, dtype=float)
    dim = 1 if points.ndim == 1 or points.shape[1] == 1 else 2
    grads = _single_element_gradients(points.reshape(dim + 1, dim))
    vol = _single_volume(points.reshape(dim + 1, dim))
    return vol * grads @ grads.T


def local_mass(points):
    """Mass matrix of a single simplex with vertices ``points``."""
    points = np.asarray(points, dtype=float)
    dim = 1 if points.ndim == 1 or points.shape[1] == 1 else 2
    vol = _single_volume(points.reshape(dim + 1, dim))
    k = dim + 1
    return vol * (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))


def _single_volume(p):
    if p.shape[1] == 1:
        return abs(p[1, 0] - p[0, 0])
    a, b = p[1] - p[0], p[2] - p[0]
    return 0.5 * abs(a[0] * b[1] - a[1] * b[0])


def _single_element_gradients(p):
    g = np.linalg.inv((p[1:] - p[0]).T)  # rows: gradients of lambda_1..lambda_d
    return np.vstack([-g.sum(axis=0), g])


@dataclass
class AssembledSystem:
    """Reduced system on the interior vertices; ``dof_map[i]`` is the vertex of row ``i``."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray

    def solve(self, contract=None):
        return solve(self.matrix, self.rhs, contract)


def assemble_x_inner_product(mesh, epsilon, order=None):
    """Matrix of ``(u, v)_X = int u v + eps grad u . grad v`` on interior vertices."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    V = p1_space(mesh, order)
    return V.restrict(V.mass + epsilon * V.stiffness)


def _checked(values, what):
    if not np.all(np.isfinite(values)):
        raise NonFiniteCoefficient(f"{what} is not finite at some quadrature point")
    return values


def reaction_at_qp(u, problem, order=None):
    V = p1_space(u.mesh, order)
    x = V.qp_coords if problem.source is not None else None
    return _checked(problem.reaction(V.at_qp(u.coefficients), x), "f(u)")


def residual_vector(u, problem, order=None):
    """Full-length vector of ``l(u; phi_i) = int f(u) phi_i - eps grad u . grad phi_i``."""
    V = p1_space(u.mesh, order)
    return V.load(reaction_at_qp(u, problem, order)) - problem.epsilon * (V.stiffness @ u.coefficients)


def jacobian_matrix(u, problem, order=None):
    """Full matrix of ``<F'(u) phi_j, phi_i> = int f'(u) phi_j phi_i - eps grad . grad``."""
    V = p1_space(u.mesh, order)
    fp = _checked(problem.f_prime(V.at_qp(u.coefficients)), "f'(u)")
    return V.weighted_mass(fp) - problem.epsilon * V.stiffness


def assemble_ptc_system(u_n, k_n, problem, order=None):
    """Reduced matrix of ``a_eps(u_n, k_n; ., .)`` and load ``l_eps(u_n; .)``.

    ``a_eps(u, t; d, v) = (d, v)_X - t int {f'(u) d v - eps grad d . grad v}``.
    """
    if k_n < 0:
        raise ValueError("k_n must be non-negative")
    V = p1_space(u_n.mesh, order)
    eps = problem.epsilon
    gram = V.mass + eps * V.stiffness
    if k_n == 0:
        A = gram
    else:
        A = gram - k_n * jacobian_matrix(u_n, problem, order)
    dofs = u_n.mesh.interior_vertices
    rhs = residual_vector(u_n, problem, order)[dofs]
    return AssembledSystem(V.restrict(A), rhs, dofs)


def evaluate_dual_pairing(u, v, problem, order=None):
    """``<F_eps(u), v> = int f(u) v - eps grad u . grad v`` by quadrature."""
    _check_same_mesh(u, v)
    return float(residual_vector(u, problem, order) @ v.coefficients)


def interpolate_to_refined(u, parent, child, ancestry):
    """Nodal interpolant of ``u`` on a mesh produced by ``parent.refine``.

    New vertices are edge midpoints, so the interpolant is the same function.
    """
    ancestry = np.asarray(ancestry, dtype=np.int64).reshape(-1, 2) if len(ancestry) else \
        np.zeros((0, 2), dtype=np.int64)
    if u.mesh is not parent and u.mesh.n_vertices != parent.n_vertices:
        raise AncestryMismatch("function does not live on the parent mesh")
    if child.n_vertices != parent.n_vertices + ancestry.shape[0]:
        raise AncestryMismatch("ancestry table does not match the child mesh")
    if ancestry.size and ancestry.max() >= parent.n_vertices:
        raise AncestryMismatch("ancestry refers to vertices outside the parent mesh")
    c = u.coefficients
    new = 0.5 * (c[ancestry[:, 0]] + c[ancestry[:, 1]])
    return FemFunction(child, np.concatenate([c, new]))


def element_energy_sq(u, epsilon):
    """Per-element ``eps |grad u|^2_T + |u|^2_T`` (exact for P1)."""
    V = p1_space(u.mesh)
    g = V.gradients(u.coefficients)
    loc = u.coefficients[u.mesh.elements]
    l2 = np.einsum("mi,mij,mj->m", loc, V.local_mass(), loc)
    return epsilon * np.sum(g * g, axis=1) * u.mesh.volumes + l2


def energy_norm(u, epsilon, subdomain=None):
    """The eps-weighted energy norm ``(eps |grad u|^2 + |u|^2)^(1/2)`` over ``subdomain``."""
    e = element_energy_sq(u, epsilon)
    if subdomain is not None:
        e = e[np.asarray(subdomain)]
    return float(np.sqrt(e.sum()))


def energy_error(u, exact, exact_gradient, epsilon, order=8):
    """Energy norm of ``exact - u`` by high-order quadrature."""
    V = p1_space(u.mesh, order)
    x = V.qp_coords
    diff = exact(x) - V.at_qp(u.coefficients)
    gdiff = exact_gradient(x) - V.gradients(u.coefficients)[:, None, :]
    e = V.qp_weights * (diff**2 + epsilon * np.sum(gdiff**2, axis=-1))
    return float(np.sqrt(e.sum()))


def locate(mesh, points, tol=1e-12):
    """Element index and barycentric coordinates of each point (chunked brute force)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.dim == 1 and points.shape[1] != 1:
        points = points.reshape(-1, 1)
    G = mesh.barycentric_gradients  # (M, k, d)
    p0 = mesh.vertices[mesh.elements[:, 0]]
    elem = np.full(points.shape[0], -1, dtype=np.int64)
    bary = np.zeros((points.shape[0], mesh.dim + 1))
    chunk = max(1, 2_000_000 // max(mesh.n_elements, 1))
    for s in range(0, points.shape[0], chunk):
        P = points[s:s + chunk]
        lam = np.einsum("mkd,pmd->pmk", G, P[:, None, :] - p0[None, :, :])
        lam[:, :, 0] += 1.0
        inside = lam.min(axis=2) >= -tol
        found = inside.any(axis=1)
        idx = np.argmax(inside, axis=1)
        if not found.all():
            raise ValueError("some points lie outside the mesh")
        elem[s:s + chunk] = idx
        bary[s:s + chunk] = lam[np.arange(P.shape[0]), idx]
    return elem, bary


def evaluate(u, points):
    """Point values of a P1 function."""
    elem, bary = locate(u.mesh, points)
    return np.einsum("pk,pk->p", u.coefficients[u.mesh.elements[elem]], bary)


class FemProblem(HilbertProblem):
    """The discrete ``F_eps`` on the interior vertices of a fixed mesh."""

    def __init__(self, mesh, problem, order=None):
        self.mesh = mesh
        self.problem = problem
        self.order = order
        V = p1_space(mesh, order)
        self._gram = V.restrict(V.mass + problem.epsilon * V.stiffness)

    def function(self, interior_values):
        return FemFunction.from_interior(self.mesh, interior_values)

    def apply_residual(self, u):
        r = residual_vector(self.function(u), self.problem, self.order)
        return r[self.mesh.interior_vertices]

    def jacobian(self, u):
        V = p1_space(self.mesh, self.order)
        return V.restrict(jacobian_matrix(self.function(u), self.problem, self.order))

    def gram(self):
        return self._gram

    def system_matrix(self, t, u):
        # same matrix as assemble_ptc_system, without recomputing the load
        return self._gram - t * self.jacobian(u)
