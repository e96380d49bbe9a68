"""Polynomial space bases, homogeneous layers, and exact linear algebra.

Provides monomial bases, the homogeneous layers H_k and their two-layer
sums S_k with mean-corrected variants, coefficient-vector embeddings for
(piecewise) fields, and fraction-exact row reduction used for rank checks,
nullspaces, and rank-revealing basis selection.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement

from .poly import Polynomial, VectorField
from .split import PiecewiseField, as_piecewise


def monomial_exponents(degree, nvars=3):
    """Exponent tuples of total degree <= degree, graded lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    # stable, deterministic order: by degree then lexicographic
    return sorted(set(out), key=lambda e: (sum(e), e))


def scalar_monomials(degree, nvars=3):
    return [Polynomial.monomial(e) for e in monomial_exponents(degree, nvars)]


def vector_monomials(degree):
    """Basis of vector polynomials of degree <= degree (component-major)."""
    out = []
    for e in monomial_exponents(degree, 3):
        for c in range(3):
            comps = [Polynomial.zero(3)] * 3
            comps[c] = Polynomial.monomial(e)
            out.append(VectorField(comps))
    return out


def dim_poly(degree, dim=3):
    """Dimension of polynomials of total degree <= degree in ``dim`` variables."""
    if degree < 0:
        return 0
    n = 1
    for i in range(1, dim + 1):
        n = n * (degree + i) // i
    return n


def dim_homogeneous(degree, dim=3):
    if degree < 0:
        return 0
    return dim_poly(degree, dim) - dim_poly(degree - 1, dim)


def homogeneous_basis(degree):
    """Monomials of exact total degree ``degree`` (about the origin)."""
    return [Polynomial.monomial(e) for e in monomial_exponents(degree, 3) if sum(e) == degree]


def layered_basis(k):
    """Basis of the two-layer space S_k: H_k for k = 1, H_k + H_{k-1} for k >= 2."""
    if k < 1:
        raise ValueError("layer order must be >= 1")
    basis = homogeneous_basis(k)
    if k >= 2:
        basis = basis + homogeneous_basis(k - 1)
    return basis


def layered_mean_zero_basis(k):
    """S_k basis corrected to zero mean over the reference tetrahedron."""
    from .poly import integrate_unit_simplex

    vol = Fraction(1, 6)
    out = []
    for p in layered_basis(k):
        mean = integrate_unit_simplex(p) / vol
        out.append(p - Polynomial.constant(mean))
    return out


def dim_layered(k):
    return dim_homogeneous(k) + (dim_homogeneous(k - 1) if k >= 2 else 0)


# ---------------------------------------------------------------------------
# coefficient embeddings

class Embedding:
    """Canonical coordinates for (piecewise) fields of bounded degree.

    Scalars embed as 4 * dim P_D coefficients (one block per subtet);
    vectors as three times that.  Single polynomials repeat across blocks.
    """

    def __init__(self, degree, vector):
        self.degree = degree
        self.vector = vector
        self.exponents = monomial_exponents(degree, 3)
        self.index = {e: i for i, e in enumerate(self.exponents)}
        self.block = len(self.exponents) * (3 if vector else 1)
        self.size = 4 * self.block

    def coords(self, field):
        pw = as_piecewise(field)
        vec = [Fraction(0)] * self.size
        for piece_i, piece in enumerate(pw.pieces):
            base = piece_i * self.block
            comps = piece.comps if self.vector else (piece,)
            for c, comp in enumerate(comps):
                for e, v in comp.coeffs.items():
                    try:
                        j = self.index[e]
                    except KeyError:
                        raise ValueError(
                            f"field degree {sum(e)} exceeds embedding degree {self.degree}"
                        ) from None
                    vec[base + c * len(self.exponents) + j] = v
        return vec

    def field(self, vec, continuity="L2"):
        pieces = []
        n = len(self.exponents)
        for piece_i in range(4):
            base = piece_i * self.block
            if self.vector:
                comps = []
                for c in range(3):
                    table = {
                        self.exponents[j]: vec[base + c * n + j]
                        for j in range(n)
                        if vec[base + c * n + j] != 0
                    }
                    comps.append(Polynomial(table, 3))
                pieces.append(VectorField(comps))
            else:
                table = {self.exponents[j]: vec[base + j] for j in range(n) if vec[base + j] != 0}
                pieces.append(Polynomial(table, 3))
        return PiecewiseField(pieces, continuity)


# ---------------------------------------------------------------------------
# exact linear algebra over the rationals

def rref(matrix):
    """In-place fraction-exact reduced row echelon form.

    Returns (rows, pivot_columns).  ``matrix`` is a list of Fraction lists.
    """
    rows = [list(r) for r in matrix]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for rr in range(r, nrows):
            if rows[rr][c] != 0:
                pivot = rr
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pv = rows[r][c]
        rows[r] = [v / pv for v in rows[r]]
        for rr in range(nrows):
            if rr != r and rows[rr][c] != 0:
                f = rows[rr][c]
                rows[rr] = [a - f * b for a, b in zip(rows[rr], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return rows, pivots


def rank(matrix):
    if not matrix:
        return 0
    return len(rref(matrix)[1])


def nullspace(matrix):
    """Exact nullspace basis vectors of a Fraction matrix."""
    if not matrix:
        return []
    rows, pivots = rref(matrix)
    ncols = len(matrix[0])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -rows[r][f]
        basis.append(v)
    return basis


def select_independent(columns):
    """Indices of a rank-revealing independent subset (first-come pivots).

    ``columns`` is a list of coordinate vectors; deterministic: earlier
    generators win ties, matching the documented generator ordering.
    """
    if not columns:
        return []
    ncols = len(columns)
    nrows = len(columns[0])
    matrix = [
        row
        for row in ([columns[j][i] for j in range(ncols)] for i in range(nrows))
        if any(v != 0 for v in row)
    ]
    _, pivots = rref(matrix)
    return pivots


def solve_exact(matrix, rhs_list):
    """Solve ``matrix x = rhs`` exactly for several right-hand sides.

    Returns (solutions, consistent) where inconsistent systems yield None
    entries.  ``matrix`` is row-major with Fraction entries.
    """
    nrows = len(matrix)
    ncols = len(matrix[0]) if nrows else 0
    nrhs = len(rhs_list)
    aug = [list(matrix[i]) + [rhs[i] for rhs in rhs_list] for i in range(nrows)]
    rows, pivots = rref(aug)
    # pivots in the RHS block mean inconsistency for that system
    solutions = []
    for s in range(nrhs):
        col = ncols + s
        ok = all(p < ncols or p != col for p in pivots)
        if col in pivots:
            solutions.append(None)
            continue
        x = [Fraction(0)] * ncols
        for r, p in enumerate(pivots):
            if p < ncols:
                x[p] = rows[r][col]
        # verify (guards against free-variable interplay between systems)
        if ok:
            solutions.append(x)
    # exact residual check
    checked = []
    for s, x in enumerate(solutions):
        if x is None:
            checked.append(None)
            continue
        good = True
        for i in range(nrows):
            acc = Fraction(0)
            row = matrix[i]
            for j in range(ncols):
                if x[j] != 0 and row[j] != 0:
                    acc += row[j] * x[j]
            if acc != rhs_list[s][i]:
                good = False
                break
        checked.append(x if good else None)
    return checked
