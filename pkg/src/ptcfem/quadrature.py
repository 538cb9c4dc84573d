"""Quadrature rules on the reference simplex, in barycentric form.

Every rule returns ``(bary, weights)`` with ``bary`` of shape ``(Q, d+1)`` and
weights summing to one, so that ``sum(w * g(x_q)) * |T|`` integrates ``g``
over a simplex ``T``.
"""
from functools import lru_cache

import numpy as np

# symmetric 6-point rule on triangles, exact up to degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322


def _triangle_degree4():
    pts, wts = [], []
    for a, w in ((_A1, _W1), (_A2, _W2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return np.array(pts), np.array(wts)


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _triangle_collapsed(n):
    # Duffy map of an n x n Gauss product rule; exact up to degree 2n - 2
    s, ws = _gauss01(n)
    t, wt = _gauss01(n)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * S * 2.0
    l1 = (S * (1.0 - T)).ravel()
    l2 = (S * T).ravel()
    bary = np.column_stack([1.0 - l1 - l2, l1, l2])
    return bary, W.ravel()


@lru_cache(maxsize=None)
def _rule(dim, order):
    if dim == 1:
        x, w = _gauss01(3 if order is None else order)
        bary, w = np.column_stack([1.0 - x, x]), w
    elif dim == 2:
        bary, w = _triangle_degree4() if order is None else _triangle_collapsed(order)
    else:
        raise ValueError(f"unsupported dimension {dim}")
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def simplex_rule(dim, order=None):
    """Quadrature rule on the reference simplex of dimension ``dim``.

    ``order=None`` selects the production rule (3-point Gauss in 1D, the
    symmetric 6-point degree-4 rule in 2D). An integer selects an ``order``-point
    Gauss rule in 1D or an ``order x order`` collapsed Gauss rule in 2D; these
    are used for verification.
    """
    return _rule(dim, order)


def edge_rule():
    """Two-point Gauss rule on [0, 1] (positions along the edge, weights)."""
    return _gauss01(2)
