"""Conforming simplicial meshes (intervals in 1D, triangles in 2D).

Triangles are stored counter-clockwise with local vertex 0 as the *newest
vertex*: the refinement edge of element ``[p0, p1, p2]`` is ``(p1, p2)``.
Refinement is newest-vertex bisection with a vectorized conformity closure,
so nested meshes are produced and every parent vertex keeps its index.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BoundaryFacet, UnsupportedDomain

# local edge i of a triangle is opposite local vertex i
_TRI_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True)
class DomainSpec:
    """An interval ``(lower, upper)`` or the square ``(lower, upper)^2``."""

    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in ("interval", "square"):
            raise UnsupportedDomain(f"unsupported domain kind {self.kind!r}")
        if not self.upper > self.lower:
            raise UnsupportedDomain("domain bounds must satisfy lower < upper")

    @classmethod
    def interval(cls, a=0.0, b=1.0):
        return cls("interval", float(a), float(b))

    @classmethod
    def square(cls, lower=0.0, upper=1.0):
        return cls("square", float(lower), float(upper))

    @property
    def dim(self):
        return 1 if self.kind == "interval" else 2

    @property
    def side(self):
        return self.upper - self.lower

    @property
    def measure(self):
        return self.side ** self.dim

    @property
    def center(self):
        return np.full(self.dim, 0.5 * (self.lower + self.upper))

    def poincare_constant(self):
        """Sharp Poincare constant ``1/sqrt(lambda_1)`` of the Dirichlet Laplacian."""
        return self.side / (np.pi * np.sqrt(self.dim))

    def distance_to_boundary(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.minimum(points - self.lower, self.upper - points)
        return d.min(axis=1)


class Mesh:
    """Immutable conforming simplicial mesh.

    Parameters
    ----------
    vertices : (N, d) array
    elements : (M, d+1) int array
        Vertex indices; orientation is normalized on construction (1D
        intervals left-to-right, triangles counter-clockwise with vertex 0
        kept in place).
    boundary : (N,) bool array
        Dirichlet vertex markers.
    domain : DomainSpec
    generation : int
        Number of refinement passes since the initial mesh.
    """

    def __init__(self, vertices, elements, boundary, domain, generation=0):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        elements = np.array(elements, dtype=np.int64)
        if vertices.shape[1] != domain.dim or elements.shape[1] != domain.dim + 1:
            raise ValueError("vertex/element shapes do not match the domain dimension")
        if domain.dim == 1:
            swap = vertices[elements[:, 0], 0] > vertices[elements[:, 1], 0]
            elements[swap] = elements[swap][:, ::-1]
        else:
            swap = _signed_areas(vertices, elements) < 0
            elements[swap] = elements[swap][:, [0, 2, 1]]
        self.vertices = vertices
        self.elements = elements
        self.boundary = np.array(boundary, dtype=bool)
        self.domain = domain
        self.generation = int(generation)
        for a in (self.vertices, self.elements, self.boundary):
            a.setflags(write=False)
        if np.any(self.volumes <= 1e-14 * domain.measure):
            raise ValueError("mesh contains degenerate or inverted elements")

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, vertices={self.n_vertices}, "
                f"elements={self.n_elements}, generation={self.generation})")

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @cached_property
    def interior_vertices(self):
        """Indices of the non-Dirichlet vertices (the degrees of freedom)."""
        return np.flatnonzero(~self.boundary)

    @property
    def n_dofs(self):
        return self.interior_vertices.size

    @cached_property
    def volumes(self):
        if self.dim == 1:
            x = self.vertices[:, 0]
            return x[self.elements[:, 1]] - x[self.elements[:, 0]]
        return _signed_areas(self.vertices, self.elements)

    @cached_property
    def diameters(self):
        if self.dim == 1:
            return self.volumes.copy()
        p = self.vertices[self.elements]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
        return lengths.max(axis=1)

    @cached_property
    def centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def barycentric_gradients(self):
        """(M, d+1, d) array of the constant gradients of the hat functions."""
        p = self.vertices[self.elements]
        if self.dim == 1:
            g = 1.0 / self.volumes
            return np.stack([-g, g], axis=1)[:, :, None]
        B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        g12 = np.linalg.inv(B)  # rows are the gradients of lambda_1, lambda_2
        return np.concatenate([-g12.sum(axis=1, keepdims=True), g12], axis=1)

    # -- facets -------------------------------------------------------------

    @cached_property
    def _facet_data(self):
        M = self.n_elements
        if self.dim == 1:
            facet_of_entry = self.elements.ravel()
            local = np.tile(np.arange(2), M)
            n_facets = self.n_vertices
            facets = np.arange(n_facets)[:, None]
            element_facets = self.elements.copy()
        else:
            pairs = np.sort(self.elements[:, _TRI_EDGES].reshape(-1, 2), axis=1)
            keys = pairs[:, 0] * self.n_vertices + pairs[:, 1]
            _, first, facet_of_entry = np.unique(keys, return_index=True, return_inverse=True)
            facet_of_entry = facet_of_entry.ravel()
            facets = pairs[first]
            n_facets = facets.shape[0]
            local = np.tile(np.arange(3), M)
            element_facets = facet_of_entry.reshape(M, 3)
        elem = np.repeat(np.arange(M), self.dim + 1)
        order = np.lexsort((elem, facet_of_entry))
        counts = np.bincount(facet_of_entry, minlength=n_facets)
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: a facet has more than two elements")
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        adjacent = np.full((n_facets, 2), -1, dtype=np.int64)
        sharp_local = np.full(n_facets, -1, dtype=np.int64)
        used = counts > 0
        adjacent[used, 0] = elem[order[start[used]]]
        sharp_local[used] = local[order[start[used]]]
        two = counts == 2
        adjacent[two, 1] = elem[order[start[two] + 1]]
        return facets, element_facets, adjacent, sharp_local

    @property
    def facets(self):
        """Facet vertex lists: (F, 2) edges in 2D, (F, 1) nodes in 1D."""
        return self._facet_data[0]

    @property
    def element_facets(self):
        """(M, d+1) facet ids; column i is the facet opposite local vertex i in 2D.

        In 1D column i is the node at local vertex i.
        """
        return self._facet_data[1]

    @property
    def facet_elements(self):
        """(F, 2) adjacent elements ``[sharp, flat]``; flat is -1 on the boundary.

        The sharp side is always the lower element id.
        """
        return self._facet_data[2]

    @cached_property
    def interior_facets(self):
        fe = self.facet_elements
        return np.flatnonzero((fe[:, 0] >= 0) & (fe[:, 1] >= 0))

    @cached_property
    def boundary_facets(self):
        fe = self.facet_elements
        return np.flatnonzero((fe[:, 0] >= 0) & (fe[:, 1] < 0))

    @cached_property
    def facet_sizes(self):
        """h_E: edge length in 2D, mean length of the adjacent intervals in 1D."""
        if self.dim == 2:
            p = self.vertices[self.facets]
            return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        fe = self.facet_elements
        h = self.volumes
        sizes = np.zeros(fe.shape[0])
        one = fe[:, 0] >= 0
        sizes[one] = h[fe[one, 0]]
        two = fe[:, 1] >= 0
        sizes[two] = 0.5 * (h[fe[two, 0]] + h[fe[two, 1]])
        return sizes

    @cached_property
    def facet_normals(self):
        """(F, d) unit normals pointing out of the sharp element."""
        _, _, adjacent, sharp_local = self._facet_data
        sharp = adjacent[:, 0]
        if self.dim == 1:
            # the node is the right end of the sharp interval iff local index 1
            return np.where(sharp_local == 1, 1.0, -1.0)[:, None]
        p = self.vertices[self.facets]
        t = p[:, 1] - p[:, 0]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        opposite = self.vertices[self.elements[sharp, sharp_local]]
        flip = np.einsum("ij,ij->i", n, opposite - p[:, 0]) > 0
        n[flip] *= -1.0
        return n

    def facet_jump_frame(self, facet):
        """Geometry of one interior facet, used to evaluate normal-derivative jumps."""
        fe = self.facet_elements[facet]
        if fe[1] < 0:
            raise BoundaryFacet(f"facet {facet} lies on the boundary")
        return FacetGeometry(
            h_E=float(self.facet_sizes[facet]),
            normal=self.facet_normals[facet].copy(),
            adjacent=(int(fe[0]), int(fe[1])),
        )

    # -- refinement ---------------------------------------------------------

    def refine(self, marked):
        """Bisect every marked element at least once, keeping the mesh conforming.

        Returns
        -------
        child : Mesh
        ancestry : (K, 2) int array
            Parent-mesh endpoints of the edge bisected by each new vertex; new
            vertex ``n_vertices + i`` is the midpoint of ``ancestry[i]``.
        """
        marked = np.unique(np.asarray(marked, dtype=np.int64).ravel())
        if marked.size and (marked[0] < 0 or marked[-1] >= self.n_elements):
            raise IndexError("marked element id out of range")
        if self.dim == 1:
            return self._refine_1d(marked)
        return self._refine_2d(marked)

    def uniform_refine(self):
        return self.refine(np.arange(self.n_elements))

    def _child(self, vertices, elements, boundary):
        return Mesh(vertices, elements, boundary, self.domain, self.generation + 1)

    def _refine_1d(self, marked):
        N = self.n_vertices
        ancestry = self.elements[marked]
        mid = self.vertices[ancestry].mean(axis=1)
        new_ids = N + np.arange(marked.size)
        split = np.zeros(self.n_elements, dtype=bool)
        split[marked] = True
        new_of = np.full(self.n_elements, -1, dtype=np.int64)
        new_of[marked] = new_ids
        # keep parent order; a split parent is replaced by its two halves
        reps = np.where(split, 2, 1)
        parent = np.repeat(np.arange(self.n_elements), reps)
        first = np.concatenate([[True], parent[1:] != parent[:-1]])
        el = self.elements[parent].copy()
        s = split[parent]
        el[s & first, 1] = new_of[parent[s & first]]
        el[s & ~first, 0] = new_of[parent[s & ~first]]
        vertices = np.vstack([self.vertices, mid])
        boundary = np.concatenate([self.boundary, np.zeros(marked.size, dtype=bool)])
        return self._child(vertices, el, boundary), ancestry.copy()

    def _refine_2d(self, marked):
        edges = self.facets
        el_edges = self.element_facets
        edge_marked = np.zeros(edges.shape[0], dtype=bool)
        edge_marked[el_edges[marked, 0]] = True
        # conformity closure: any element with a marked edge must also bisect
        # its own refinement edge first
        for _ in range(edges.shape[0] + 1):
            need = edge_marked[el_edges].any(axis=1) & ~edge_marked[el_edges[:, 0]]
            if not need.any():
                break
            edge_marked[el_edges[need, 0]] = True
        else:  # pragma: no cover - guarded by the edge count
            raise RuntimeError("newest-vertex bisection closure did not terminate")

        N = self.n_vertices
        ancestry = edges[edge_marked]
        new_id = np.full(edges.shape[0], -1, dtype=np.int64)
        new_id[edge_marked] = N + np.arange(ancestry.shape[0])
        mid = self.vertices[ancestry].mean(axis=1)
        fe = self.facet_elements[edge_marked]
        new_boundary = fe[:, 1] < 0

        t = self.elements
        m0 = new_id[el_edges[:, 0]]
        m1 = new_id[el_edges[:, 1]]
        m2 = new_id[el_edges[:, 2]]
        p0, p1, p2 = t[:, 0], t[:, 1], t[:, 2]
        M = t.shape[0]
        ids = np.arange(M)

        groups = []  # (parent id, child order, element rows)
        keep = m0 < 0
        groups.append((ids[keep], 0, t[keep]))
        b = ~keep
        left_split = b & (m2 >= 0)
        right_split = b & (m1 >= 0)
        # left child [m0, p0, p1], refinement edge (p0, p1) = local edge 2
        s = b & ~left_split
        groups.append((ids[s], 0, np.column_stack([m0[s], p0[s], p1[s]])))
        s = left_split
        groups.append((ids[s], 0, np.column_stack([m2[s], m0[s], p0[s]])))
        groups.append((ids[s], 1, np.column_stack([m2[s], p1[s], m0[s]])))
        # right child [m0, p2, p0], refinement edge (p2, p0) = local edge 1
        s = b & ~right_split
        groups.append((ids[s], 2, np.column_stack([m0[s], p2[s], p0[s]])))
        s = right_split
        groups.append((ids[s], 2, np.column_stack([m1[s], m0[s], p2[s]])))
        groups.append((ids[s], 3, np.column_stack([m1[s], p0[s], m0[s]])))

        parent = np.concatenate([g[0] for g in groups])
        rank = np.concatenate([np.full(g[0].size, g[1]) for g in groups])
        rows = np.vstack([g[2] for g in groups])
        order = np.lexsort((rank, parent))
        vertices = np.vstack([self.vertices, mid])
        boundary = np.concatenate([self.boundary, new_boundary])
        return self._child(vertices, rows[order], boundary), ancestry.copy()


@dataclass(frozen=True)
class FacetGeometry:
    """Size, sharp-side outward normal and ``(sharp, flat)`` elements of a facet."""

    h_E: float
    normal: np.ndarray
    adjacent: tuple


def _signed_areas(vertices, elements):
    p = vertices[elements]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def _assign_longest_edge(vertices, elements):
    # rotate each triangle so the longest edge is opposite local vertex 0
    p = vertices[elements]
    lengths = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
    shift = np.argmax(lengths, axis=1)
    idx = (np.arange(3)[None, :] + shift[:, None]) % 3
    return np.take_along_axis(elements, idx, axis=1)


def build_initial_mesh(domain, resolution=1):
    """Structured starting mesh.

    Intervals are split into ``resolution`` equal pieces. Squares are divided
    into ``resolution x resolution`` cells, each cut by both diagonals through
    a center vertex (criss-cross), giving ``4 * resolution**2`` triangles.
    """
    if not isinstance(domain, DomainSpec):
        raise UnsupportedDomain(f"unsupported domain {domain!r}")
    n = int(resolution)
    if n < 1:
        raise ValueError("resolution must be >= 1")
    lo, hi = domain.lower, domain.upper
    if domain.dim == 1:
        x = np.linspace(lo, hi, n + 1)
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        boundary = np.zeros(n + 1, dtype=bool)
        boundary[[0, -1]] = True
        return Mesh(x[:, None], elements, boundary, domain)

    g = np.linspace(lo, hi, n + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    c = 0.5 * (g[:-1] + g[1:])
    CX, CY = np.meshgrid(c, c, indexing="xy")
    centers = np.column_stack([CX.ravel(), CY.ravel()])
    vertices = np.vstack([corners, centers])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    a = j * (n + 1) + i
    b = a + 1
    d = a + (n + 1)
    cc = d + 1
    m = (n + 1) ** 2 + j * n + i
    elements = np.stack([
        np.column_stack([m, a, b]),
        np.column_stack([m, b, cc]),
        np.column_stack([m, cc, d]),
        np.column_stack([m, d, a]),
    ], axis=1).reshape(-1, 3)
    elements = _assign_longest_edge(vertices, elements)
    on_edge = np.isclose(vertices, lo) | np.isclose(vertices, hi)
    boundary = on_edge.any(axis=1)
    return Mesh(vertices, elements, boundary, domain)


def min_angles(mesh):
    """Smallest interior angle (radians) of every triangle."""
    p = mesh.vertices[mesh.elements]
    out = np.full(mesh.n_elements, np.pi)
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cos = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out = np.minimum(out, np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


def conformity_defects(mesh):
    """List of human-readable conformity violations (empty when conforming).

    Checks that interior facets have two neighbours, that single-neighbour
    facets lie on the domain boundary (no hanging nodes), that Dirichlet
    flags agree with geometry and that the elements tile the domain.
    """
    defects = []
    fe = mesh.facet_elements
    if mesh.dim == 2:
        counts = (fe >= 0).sum(axis=1)
        if np.any(counts == 0):
            defects.append("orphan edges present")
        lone = np.flatnonzero(counts == 1)
        mids = mesh.vertices[mesh.facets[lone]].mean(axis=1)
        off = mesh.domain.distance_to_boundary(mids) > 1e-12 * mesh.domain.side
        if off.any():
            defects.append(f"{off.sum()} single-element edges inside the domain (hanging nodes)")
    on_bnd = mesh.domain.distance_to_boundary(mesh.vertices) <= 1e-12 * mesh.domain.side
    if np.any(on_bnd != mesh.boundary):
        defects.append("boundary flags disagree with geometry")
    total = mesh.volumes.sum()
    if abs(total - mesh.domain.measure) > 1e-12 * mesh.domain.measure:
        defects.append(f"element measures sum to {total!r}, expected {mesh.domain.measure!r}")
    return defects
