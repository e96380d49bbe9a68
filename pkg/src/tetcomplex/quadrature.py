"""Simplex quadrature: Grundmann-Moller rules of arbitrary odd degree.

Rules are returned in reference coordinates of the unit simplex (segment
[0,1], triangle {xi,eta>=0, xi+eta<=1}, tetrahedron likewise) with weights
summing to the simplex volume (1, 1/2, 1/6).  An Alfeld-aware composite
variant maps a tet rule into each subtetrahedron of the reference split.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import factorial

import numpy as np

from .polyalg.split import SUBTET_VERTICES


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for cut in combinations(range(total + parts - 1), parts - 1):
        out = []
        prev = -1
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


@lru_cache(maxsize=None)
def grundmann_moller(dim, degree):
    """Rule exact for polynomials of total degree <= degree on the unit simplex."""
    # the rule of degree 2s+1 also covers the even degree 2s
    s = max(0, degree // 2)
    n = dim
    d = 2 * s + 1
    pts = []
    wts = []
    for i in range(s + 1):
        denom = d + n - 2 * i
        coeff = (
            (-1) ** i
            * 2.0 ** (-2 * s)
            * float(denom) ** d
            / (factorial(i) * factorial(d + n - i))
        )
        for beta in _compositions(s - i, n + 1):
            bary = [(2 * b + 1) / denom for b in beta]
            pts.append(bary[1:])  # drop the first barycentric coordinate
            wts.append(coeff)
    points = np.array(pts, dtype=float).reshape(-1, n)
    weights = np.array(wts, dtype=float)
    return points, weights


@lru_cache(maxsize=None)
def gauss_segment(degree):
    """Gauss-Legendre on [0, 1], exact to the requested degree."""
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    return ((x + 1.0) / 2.0).reshape(-1, 1), w / 2.0


@lru_cache(maxsize=None)
def collapsed_gauss(dim, degree):
    """Tensor Gauss rule under the collapsed (Duffy) map; positive weights.

    Slightly more points than Grundmann-Moller at equal degree, but far
    better conditioned on non-polynomial integrands (all weights positive),
    which matters for the trigonometric moment and error integrals.
    """
    n = degree // 2 + 2  # the Jacobian raises the per-direction degree
    x, w = np.polynomial.legendre.leggauss(n)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    if dim == 2:
        xi, eta = np.meshgrid(x, x, indexing="ij")
        wx, wy = np.meshgrid(w, w, indexing="ij")
        pts = np.column_stack([xi.ravel(), (eta * (1 - xi)).ravel()])
        wts = (wx * wy * (1 - xi)).ravel()
        return pts, wts
    if dim == 3:
        xi, eta, zeta = np.meshgrid(x, x, x, indexing="ij")
        wx, wy, wz = np.meshgrid(w, w, w, indexing="ij")
        px = xi
        py = eta * (1 - xi)
        pz = zeta * (1 - xi) * (1 - eta)
        jac = (1 - xi) ** 2 * (1 - eta)
        pts = np.column_stack([px.ravel(), py.ravel(), pz.ravel()])
        wts = (wx * wy * wz * jac).ravel()
        return pts, wts
    raise ValueError(f"unsupported dimension {dim}")


def rule(dim, degree, family="collapsed"):
    if dim == 1:
        return gauss_segment(degree)
    if dim in (2, 3):
        if family == "collapsed":
            return collapsed_gauss(dim, degree)
        return grundmann_moller(dim, degree)
    raise ValueError(f"unsupported dimension {dim}")


@lru_cache(maxsize=None)
def alfeld_composite(degree):
    """Tet rule mapped into the 4 subtets of the reference Alfeld split.

    Exactly integrates piecewise polynomials of the given degree on the
    split (each subtet sees an affine image of the base rule).
    """
    base_pts, base_wts = rule(3, degree)
    pts = []
    wts = []
    for i in range(4):
        verts = np.array([[float(c) for c in v] for v in SUBTET_VERTICES[i]])
        a = verts[1:] - verts[0]
        mapped = verts[0] + base_pts @ a
        pts.append(mapped)
        wts.append(base_wts * abs(np.linalg.det(a.T)))
    return np.vstack(pts), np.concatenate(wts)


class QuadratureRule:
    """Named rule bundle with a declared degree of exactness."""

    def __init__(self, degree):
        self.degree = degree
        self.tet = rule(3, degree)
        self.triangle = rule(2, degree)
        self.segment = rule(1, degree)
        self.tet_split = alfeld_composite(degree)

    def __repr__(self):
        return f"QuadratureRule(degree={self.degree})"
