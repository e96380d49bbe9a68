"""Exact polynomial and piecewise-polynomial algebra on the reference tetrahedron."""

from .poly import (
    Polynomial,
    Rational,
    VectorField,
    curl,
    differential,
    div,
    grad,
    integrate_simplex,
    integrate_unit_simplex,
    jacobian,
    koszul2,
    pullback_affine,
    pushforward_affine,
)
from .poincare import poincare1, poincare2, poincare3
from .spaces import (
    Embedding,
    dim_homogeneous,
    dim_layered,
    dim_poly,
    homogeneous_basis,
    layered_basis,
    layered_mean_zero_basis,
    monomial_exponents,
    nullspace,
    rank,
    rref,
    scalar_monomials,
    select_independent,
    solve_exact,
    vector_monomials,
)
from .split import (
    INTERNAL_FACES,
    PARENT_FACE_VERTICES,
    REF_CENTER,
    REF_VERTICES,
    SUBTET_VERTICES,
    PiecewiseField,
    as_piecewise,
    face_param,
    locate_subtet,
    piecewise_poincare2,
    segment_param,
    subtet_affine,
)

__all__ = [
    "Polynomial",
    "Rational",
    "VectorField",
    "PiecewiseField",
    "Embedding",
    "curl",
    "div",
    "grad",
    "jacobian",
    "differential",
    "koszul2",
    "poincare1",
    "poincare2",
    "poincare3",
    "piecewise_poincare2",
    "pullback_affine",
    "pushforward_affine",
    "integrate_simplex",
    "integrate_unit_simplex",
    "monomial_exponents",
    "scalar_monomials",
    "vector_monomials",
    "homogeneous_basis",
    "layered_basis",
    "layered_mean_zero_basis",
    "dim_poly",
    "dim_homogeneous",
    "dim_layered",
    "rref",
    "rank",
    "nullspace",
    "select_independent",
    "solve_exact",
    "as_piecewise",
    "locate_subtet",
    "subtet_affine",
    "face_param",
    "segment_param",
    "REF_VERTICES",
    "REF_CENTER",
    "SUBTET_VERTICES",
    "INTERNAL_FACES",
    "PARENT_FACE_VERTICES",
]
