"""Reference Alfeld split and piecewise polynomial fields on it.

The reference tetrahedron (vertices 0, e1, e2, e3) is split into four
subtetrahedra by coning its barycenter.  Piecewise fields store one
polynomial (scalar or vector) per subtet, expressed in the *global*
reference coordinates, which makes continuity checks exact coefficient
comparisons after restriction to the shared interface planes.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from .poly import Polynomial, VectorField, grad, curl, div, integrate_unit_simplex

REF_VERTICES = (
    (Fraction(0), Fraction(0), Fraction(0)),
    (Fraction(1), Fraction(0), Fraction(0)),
    (Fraction(0), Fraction(1), Fraction(0)),
    (Fraction(0), Fraction(0), Fraction(1)),
)
REF_CENTER = (Fraction(1, 4), Fraction(1, 4), Fraction(1, 4))

# subtet i replaces parent vertex i by the barycenter
SUBTET_VERTICES = tuple(
    tuple(REF_CENTER if j == i else REF_VERTICES[j] for j in range(4))
    for i in range(4)
)

# internal face shared by subtets i and j: parent edge {k, l} coned with the center
INTERNAL_FACES = tuple(
    (pair, tuple(k for k in range(4) if k not in pair))
    for pair in combinations(range(4), 2)
)

# parent face i (opposite parent vertex i) is a boundary face of subtet i only
PARENT_FACE_VERTICES = tuple(
    tuple(j for j in range(4) if j != i) for i in range(4)
)


def _affine_cols(points):
    p0 = points[0]
    return [[points[j + 1][i] - p0[i] for j in range(len(points) - 1)] for i in range(3)], list(p0)


def subtet_affine(i):
    """Map of the unit tet onto subtet ``i`` (matrix columns, shift)."""
    return _affine_cols(SUBTET_VERTICES[i])


def face_param(points):
    """Affine parametrization (xi, eta) -> p0 + xi (p1-p0) + eta (p2-p0)."""
    return _affine_cols(points)


def segment_param(p0, p1):
    return [[p1[i] - p0[i]] for i in range(3)], list(p0)


def locate_subtet(point):
    """Index of a subtet containing ``point`` (ties resolved to the lowest index)."""
    for i in range(4):
        if _in_subtet(point, i):
            return i
    raise ValueError(f"point {point} is outside the reference tetrahedron")


def _in_subtet(point, i, tol=Fraction(0)):
    matrix, shift = subtet_affine(i)
    # barycentric solve: subtets have rational vertices, so this is exact
    from .poly import _inv3  # noqa: deferred to avoid cycle at import time

    inv = _inv3([[Fraction(matrix[r][c]) for c in range(3)] for r in range(3)])
    local = [sum(inv[r][c] * (Fraction(point[c]) - shift[c]) for c in range(3)) for r in range(3)]
    lam0 = 1 - sum(local)
    return all(v >= -tol for v in local) and lam0 >= -tol


class PiecewiseField:
    """Field on the reference Alfeld split: one piece per subtet.

    ``continuity`` is one of ``"single"`` (all pieces the same polynomial),
    ``"C0"`` (claimed continuous across internal faces) or ``"L2"``.  The
    C0 claim can be verified exactly with :meth:`check_c0`.
    """

    __slots__ = ("pieces", "continuity")

    def __init__(self, pieces, continuity="L2"):
        pieces = tuple(pieces)
        assert len(pieces) == 4
        self.pieces = pieces
        self.continuity = continuity

    @classmethod
    def from_single(cls, field):
        return cls((field, field, field, field), "single")

    @property
    def is_vector(self):
        return isinstance(self.pieces[0], VectorField)

    @property
    def degree(self):
        return max(p.degree for p in self.pieces)

    def is_zero(self):
        return all(p.is_zero() for p in self.pieces)

    def map(self, fn, continuity=None):
        return PiecewiseField(
            tuple(fn(p) for p in self.pieces),
            continuity if continuity is not None else ("single" if self.continuity == "single" else "L2"),
        )

    def __add__(self, other):
        other = as_piecewise(other)
        cont = "single" if self.continuity == "single" and other.continuity == "single" else (
            "C0" if self.continuity in ("single", "C0") and other.continuity in ("single", "C0") else "L2"
        )
        return PiecewiseField(tuple(a + b for a, b in zip(self.pieces, other.pieces)), cont)

    def __sub__(self, other):
        other = as_piecewise(other)
        return self + (-other)

    def __neg__(self):
        return PiecewiseField(tuple(-p for p in self.pieces), self.continuity)

    def __mul__(self, scalar):
        return PiecewiseField(tuple(p * scalar for p in self.pieces), self.continuity)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PiecewiseField) and all(
            a == b for a, b in zip(self.pieces, other.pieces)
        )

    # -- structure checks ----------------------------------------------

    def is_single(self):
        return all(p == self.pieces[0] for p in self.pieces[1:])

    def check_c0(self):
        """Exact trace agreement across all six internal split faces."""
        for pair, edge in INTERNAL_FACES:
            i, j = pair
            k, l = edge
            pts = (REF_VERTICES[k], REF_VERTICES[l], REF_CENTER)
            matrix, shift = face_param(pts)
            ti = self.pieces[i].compose_affine(matrix, shift)
            tj = self.pieces[j].compose_affine(matrix, shift)
            if not (ti - tj).is_zero():
                return False
        return True

    def boundary_trace(self, face_index):
        """Restriction to parent face ``face_index`` as a 2-var field.

        Parametrized by the face's vertices in index order (p0, p1, p2).
        """
        pts = tuple(REF_VERTICES[v] for v in PARENT_FACE_VERTICES[face_index])
        matrix, shift = face_param(pts)
        return self.pieces[face_index].compose_affine(matrix, shift)

    def vanishes_on_boundary(self):
        return all(self.boundary_trace(i).is_zero() for i in range(4))

    # -- calculus --------------------------------------------------------

    def grad(self):
        return self.map(grad)

    def curl(self):
        return self.map(curl)

    def div(self):
        return self.map(div)

    def matmul(self, matrix):
        return self.map(lambda p: p.matmul(matrix), continuity=self.continuity)

    def dot_const(self, vec):
        nv = self.pieces[0].nvars
        const = VectorField.constant(vec, nv)
        return self.map(lambda p: p.dot(const), continuity=self.continuity)

    def integrate(self):
        """Exact integral over the whole reference tet (sum over subtets).

        Vector fields integrate component-wise to a tuple.
        """
        from .poly import _det3

        if self.is_vector:
            totals = [Fraction(0)] * 3
        else:
            totals = [Fraction(0)]
        for i in range(4):
            matrix, shift = subtet_affine(i)
            scale = abs(_det3(matrix))
            piece = self.pieces[i]
            comps = piece.comps if self.is_vector else (piece,)
            for c, comp in enumerate(comps):
                composed = comp.compose_affine(matrix, shift)
                totals[c] += integrate_unit_simplex(composed) * scale
        return tuple(totals) if self.is_vector else totals[0]

    def evaluate(self, point):
        return self.pieces[locate_subtet(point)](point)

    def to_float(self):
        return PiecewiseField(tuple(p.to_float() for p in self.pieces), self.continuity)

    def dump(self):
        out = []
        for i, p in enumerate(self.pieces):
            out.append(f"[piece {i}]")
            out.extend(p.dump())
        return out

    def __repr__(self):
        kind = "vector" if self.is_vector else "scalar"
        return f"PiecewiseField({kind}, deg={self.degree}, {self.continuity})"


def as_piecewise(field):
    if isinstance(field, PiecewiseField):
        return field
    return PiecewiseField.from_single(field)


def piecewise_poincare2(field, base=None, matrix=None):
    """Apply the vector potential operator piece by piece.

    Valid only when ``base`` is the split center: every ray from the center
    to a point of a subtet then stays inside that subtet, and continuity is
    preserved because internal faces contain the center.  Single-polynomial
    fields accept any base point.
    """
    from .poincare import poincare2

    pw = as_piecewise(field)
    if pw.is_single():
        b = base if base is not None else (Fraction(0),) * 3
        return PiecewiseField.from_single(poincare2(pw.pieces[0], b, matrix))
    if base is None or tuple(base) != REF_CENTER:
        raise ValueError(
            "piecewise vector potential requires the split center as base point"
        )
    cont = "C0" if pw.continuity in ("C0", "single") else "L2"
    return PiecewiseField(tuple(poincare2(p, REF_CENTER, matrix) for p in pw.pieces), cont)
