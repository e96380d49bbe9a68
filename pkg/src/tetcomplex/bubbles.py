"""Bubble fields on the reference Alfeld split.

Three constructions, all exact rational:

- continuous piecewise-polynomial spaces on the split (optionally with zero
  boundary trace), built as nullspaces of interface/boundary trace constraints;
- a local divergence solver: given a mean-zero piecewise polynomial target,
  produce a zero-trace continuous piecewise field with exactly that
  divergence (minimal H1-seminorm representative);
- the modified face bubbles (cubic face bubbles corrected to have constant
  divergence) and interior bubbles whose divergences span the mean-corrected
  two-layer polynomial spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .polyalg.poly import Polynomial, VectorField, div, grad
from .polyalg.spaces import (
    Embedding,
    layered_mean_zero_basis,
    monomial_exponents,
    nullspace,
    rref,
)
from .polyalg.split import (
    INTERNAL_FACES,
    PARENT_FACE_VERTICES,
    REF_CENTER,
    REF_VERTICES,
    PiecewiseField,
    as_piecewise,
    face_param,
    subtet_affine,
)

# scalar face bubbles B_i = prod_{j != i} lambda_j and their ascending-vertex
# rational face directions on the reference cell
_X = [Polynomial.variable(i) for i in range(3)]
_LAMBDA = (
    Polynomial.constant(1) - _X[0] - _X[1] - _X[2],
    _X[0],
    _X[1],
    _X[2],
)
REF_FACE_DIRECTIONS = (
    (Fraction(1), Fraction(1), Fraction(1)),
    (Fraction(1), Fraction(0), Fraction(0)),
    (Fraction(0), Fraction(-1), Fraction(0)),
    (Fraction(0), Fraction(0), Fraction(1)),
)


def scalar_face_bubble(i):
    out = Polynomial.constant(1)
    for j in range(4):
        if j != i:
            out = out * _LAMBDA[j]
    return out


def scalar_interior_bubble():
    out = Polynomial.constant(1)
    for lam in _LAMBDA:
        out = out * lam
    return out


@dataclass
class SplitC0Space:
    """Continuous piecewise-P_m space on the reference split (scalar basis)."""

    degree: int
    zero_trace: bool
    scalar_basis: list

    @property
    def dimension(self):
        return len(self.scalar_basis)

    def vector_basis(self):
        """Component-wise vector basis (3 x scalar dimension fields)."""
        out = []
        for phi in self.scalar_basis:
            for c in range(3):
                out.append(
                    phi.map(
                        lambda p, c=c: VectorField(
                            tuple(p if cc == c else Polynomial.zero() for cc in range(3))
                        ),
                        continuity="C0",
                    )
                )
        return out


@lru_cache(maxsize=None)
def build_split_space(m, zero_trace=False):
    """Nullspace construction of the continuous piecewise-P_m split space."""
    if m < 1:
        raise ValueError("degree must be >= 1")
    exps = monomial_exponents(m, 3)
    nb = len(exps)
    keys2 = monomial_exponents(m, 2)
    k2i = {e: i for i, e in enumerate(keys2)}
    rows = []

    def trace_block(pts):
        matrix, shift = face_param(pts)
        cols = []
        for e in exps:
            cols.append(Polynomial.monomial(e).compose_affine(matrix, shift))
        return cols

    for pair, edge in INTERNAL_FACES:
        i, j = pair
        k, l = edge
        cols = trace_block((REF_VERTICES[k], REF_VERTICES[l], REF_CENTER))
        block = [[Fraction(0)] * (4 * nb) for _ in keys2]
        for col, composed in enumerate(cols):
            for ke, v in composed.coeffs.items():
                block[k2i[ke]][i * nb + col] += v
                block[k2i[ke]][j * nb + col] -= v
        rows.extend(block)
    if zero_trace:
        for i in range(4):
            pts = tuple(REF_VERTICES[v] for v in PARENT_FACE_VERTICES[i])
            cols = trace_block(pts)
            block = [[Fraction(0)] * (4 * nb) for _ in keys2]
            for col, composed in enumerate(cols):
                for ke, v in composed.coeffs.items():
                    block[k2i[ke]][i * nb + col] += v
            rows.extend(block)

    basis_vecs = nullspace(rows)
    emb = Embedding(m, vector=False)
    basis = [emb.field(v, continuity="C0") for v in basis_vecs]
    for b in basis:
        assert b.check_c0()
        if zero_trace:
            assert b.vanishes_on_boundary()
    return SplitC0Space(m, zero_trace, basis)


class _ExactLinearSolver:
    """Reusable exact solver for D z = r with recorded row operations."""

    def __init__(self, matrix):
        self.ncols = len(matrix[0]) if matrix else 0
        nrows = len(matrix)
        aug = [list(matrix[i]) + [Fraction(1) if j == i else Fraction(0) for j in range(nrows)] for i in range(nrows)]
        reduced, pivots = rref(aug)
        self.pivots = [p for p in pivots if p < self.ncols]
        self.reduced = [row[: self.ncols] for row in reduced]
        self.transform = [row[self.ncols:] for row in reduced]
        self.matrix = matrix
        self.null_basis = nullspace(matrix) if matrix else []

    def solve(self, rhs):
        nrows = len(self.matrix)
        t_rhs = [sum(self.transform[r][i] * rhs[i] for i in range(nrows) if rhs[i] != 0) for r in range(nrows)]
        x = [Fraction(0)] * self.ncols
        for r, p in enumerate(self.pivots):
            x[p] = t_rhs[r]
        # consistency: rows beyond the pivot count must transform rhs to zero
        for r in range(len(self.pivots), nrows):
            if t_rhs[r] != 0:
                return None
        return x


@lru_cache(maxsize=None)
def _div_solver(k):
    """Cached machinery for the zero-trace divergence problem at degree k."""
    space = build_split_space(k, zero_trace=True)
    vec_basis = space.vector_basis()
    emb = Embedding(k - 1, vector=False)
    cols = [emb.coords(v.div()) for v in vec_basis]
    matrix = [[cols[j][i] for j in range(len(cols))] for i in range(emb.size)]
    solver = _ExactLinearSolver(matrix)

    # H1-seminorm Gram of the scalar basis, expanded to components
    ns = space.dimension
    gram_scalar = [[Fraction(0)] * ns for _ in range(ns)]
    grads = [phi.map(grad) for phi in space.scalar_basis]
    for a in range(ns):
        for b in range(a, ns):
            val = Fraction(0)
            for piece in range(4):
                ga = grads[a].pieces[piece]
                gb = grads[b].pieces[piece]
                prod = ga.dot(gb)
                matrix_s, shift_s = subtet_affine(piece)
                from .polyalg.poly import _det3, integrate_unit_simplex

                val += integrate_unit_simplex(prod.compose_affine(matrix_s, shift_s)) * abs(
                    _det3(matrix_s)
                )
            gram_scalar[a][b] = gram_scalar[b][a] = val

    null = solver.null_basis

    def gram_dot(z1, z2):
        # basis order: (scalar index a, component c) -> 3a + c
        acc = Fraction(0)
        for a in range(ns):
            for b in range(ns):
                g = gram_scalar[a][b]
                if g == 0:
                    continue
                for c in range(3):
                    acc += g * z1[3 * a + c] * z2[3 * b + c]
        return acc

    nn = len(null)
    reduced_gram = [[gram_dot(null[i], null[j]) for j in range(nn)] for i in range(nn)]
    reduced_solver = _ExactLinearSolver(reduced_gram) if nn else None
    return space, vec_basis, emb, solver, null, reduced_solver, gram_dot


def solve_div(target, k):
    """Zero-trace continuous piecewise field with exact divergence ``target``.

    ``target`` must be a mean-zero (piecewise) polynomial of degree <= k-1.
    Among all solutions the minimal H1-seminorm representative is returned,
    which makes the selection well defined.
    """
    target = as_piecewise(target)
    if target.degree > k - 1:
        raise ValueError("divergence target degree exceeds k-1")
    if target.integrate() != 0:
        raise ValueError("divergence target must have zero mean")
    space, vec_basis, emb, solver, null, reduced_solver, gram_dot = _div_solver(k)
    rhs = emb.coords(target)
    z0 = solver.solve(rhs)
    if z0 is None:
        raise ArithmeticError("divergence target is outside the attainable range")
    if null:
        b = [-gram_dot(n, z0) for n in null]
        q = reduced_solver.solve(b)
        z = list(z0)
        for qi, n in zip(q, null):
            if qi != 0:
                z = [zz + qi * nn for zz, nn in zip(z, n)]
    else:
        z = z0
    out = None
    for coef, basis_field in zip(z, vec_basis):
        if coef == 0:
            continue
        term = basis_field * coef
        out = term if out is None else out + term
    if out is None:
        out = PiecewiseField.from_single(VectorField.zero())
    out = PiecewiseField(out.pieces, "C0")
    assert (out.div() - target).is_zero(), "exact divergence postcondition violated"
    return out


@dataclass
class FaceBubble:
    """Modified cubic face bubble with exactly constant divergence."""

    index: int
    direction: tuple
    raw: VectorField
    modified: PiecewiseField
    div_value: Fraction


@dataclass
class InteriorBubble:
    """Zero-trace bubble with prescribed mean-zero two-layer divergence."""

    order: int
    target: Polynomial
    field: PiecewiseField


@lru_cache(maxsize=None)
def modified_face_bubble(i, direction=None):
    """Face bubble B_i * d corrected on the split to have constant divergence."""
    if i not in range(4):
        raise ValueError("face index must be in 0..3")
    d = REF_FACE_DIRECTIONS[i] if direction is None else direction
    scalar = scalar_face_bubble(i)
    raw = VectorField(tuple(scalar * dc for dc in d))
    g = div(raw)
    mean = PiecewiseField.from_single(g).integrate() * 6  # |ref tet| = 1/6
    corrected = solve_div(as_piecewise(g - Polynomial.constant(mean)), 3)
    beta = as_piecewise(raw) - corrected
    beta = PiecewiseField(beta.pieces, "C0")
    dv = beta.div()
    assert dv.is_single() and dv.pieces[0] == Polynomial.constant(mean)
    return FaceBubble(i, tuple(d), raw, beta, mean)


@lru_cache(maxsize=None)
def interior_bubbles(k):
    """One bubble of order k+1 per mean-corrected two-layer basis member."""
    if k < 1:
        raise ValueError("order must be >= 1")
    out = []
    for g in layered_mean_zero_basis(k):
        field = solve_div(as_piecewise(g), k + 1)
        out.append(InteriorBubble(k + 1, g, field))
    return tuple(out)
