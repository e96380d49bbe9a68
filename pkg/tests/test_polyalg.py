"""Exact algebra: differentials, vector potentials, integration, pullbacks."""

from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tetcomplex.polyalg import (
    Embedding,
    PiecewiseField,
    Polynomial,
    REF_CENTER,
    VectorField,
    as_piecewise,
    curl,
    differential,
    div,
    grad,
    homogeneous_basis,
    integrate_simplex,
    integrate_unit_simplex,
    koszul2,
    monomial_exponents,
    nullspace,
    piecewise_poincare2,
    poincare1,
    poincare2,
    poincare3,
    pullback_affine,
    pushforward_affine,
    rank,
)

X, Y, Z = (Polynomial.variable(i) for i in range(3))


def random_polynomial(rng, degree, density=0.6):
    table = {}
    for e in monomial_exponents(degree):
        if rng.random() < density:
            table[e] = F(int(rng.integers(-6, 7)), int(rng.integers(1, 5)))
    return Polynomial(table)


def random_vector(rng, degree):
    return VectorField(tuple(random_polynomial(rng, degree) for _ in range(3)))


coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def polynomials(draw, max_degree=3):
    exps = monomial_exponents(draw(st.integers(0, max_degree)))
    table = {}
    for e in draw(st.lists(st.sampled_from(exps), min_size=1, max_size=6)):
        table[e] = draw(coeffs)
    return Polynomial(table)


@st.composite
def vector_fields(draw, max_degree=3):
    return VectorField(tuple(draw(polynomials(max_degree)) for _ in range(3)))


class TestDifferential:
    def test_grad_product_rule(self):
        assert grad(X * Y) == VectorField((Y, X, Polynomial.zero()))

    def test_div_direct(self):
        u = VectorField((X * X, Y * Y, Z * Z))
        assert div(u) == 2 * X + 2 * Y + 2 * Z

    @given(polynomials())
    @settings(max_examples=25, deadline=None)
    def test_curl_grad_is_zero(self, p):
        assert curl(grad(p)).is_zero()

    @given(vector_fields())
    @settings(max_examples=25, deadline=None)
    def test_div_curl_is_zero(self, u):
        assert div(curl(u)).is_zero()

    @given(polynomials())
    @settings(max_examples=15, deadline=None)
    def test_degree_drops(self, p):
        g = grad(p)
        if not g.is_zero():
            assert g.degree == p.degree - 1

    def test_dispatch(self):
        assert differential(X * Y, "grad") == grad(X * Y)
        u = VectorField((Y, X, Z))
        assert differential(u, "curl") == curl(u)
        assert differential(u, "div") == div(u)
        with pytest.raises(ValueError):
            differential(u, "laplace")


class TestPoincare:
    def test_scalar_potential_of_gradient(self):
        # potentials of gradients recover the function (vanishing at the base)
        u = VectorField((Y, X, Polynomial.zero()))
        assert poincare1(u) == X * Y

    def test_linear_example(self):
        u = VectorField((Y, Polynomial.zero(), Polynomial.zero()))
        assert poincare1(u) == X * Y * F(1, 2)

    def test_zero(self):
        assert poincare1(VectorField.zero()).is_zero()

    def test_constant_2field(self):
        u = VectorField.constant((0, 0, 1))
        assert poincare2(u) == VectorField((Y * F(-1, 2), X * F(1, 2), Polynomial.zero()))

    def test_constant_3field(self):
        assert poincare3(Polynomial.constant(1)) == VectorField(
            (X * F(1, 3), Y * F(1, 3), Z * F(1, 3))
        )

    def test_split_identity_example(self):
        # grad p1(u) + p2(curl u) reassembles u = (y, 0, 0)
        u = VectorField((Y, Polynomial.zero(), Polynomial.zero()))
        g = grad(poincare1(u))
        c = poincare2(curl(u))
        assert g == VectorField((Y * F(1, 2), X * F(1, 2), Polynomial.zero()))
        assert c == VectorField((Y * F(1, 2), X * F(-1, 2), Polynomial.zero()))
        assert g + c == u

    @pytest.mark.parametrize("degree", range(6))
    def test_null_homotopy_all_degrees(self, degree):
        rng = np.random.default_rng(degree)
        base = (F(1, 3), F(-1, 5), F(2, 7))
        for _ in range(5):
            u = random_vector(rng, degree)
            assert grad(poincare1(u, base)) + poincare2(curl(u), base) == u
            assert curl(poincare2(u, base)) + poincare3(div(u), base) == u
            q = random_polynomial(rng, degree)
            assert div(poincare3(q, base)) == q

    @pytest.mark.parametrize("degree", range(6))
    def test_complex_property(self, degree):
        rng = np.random.default_rng(100 + degree)
        base = (F(0), F(0), F(0))
        for _ in range(5):
            u = random_vector(rng, degree)
            q = random_polynomial(rng, degree)
            assert poincare1(poincare2(u, base), base).is_zero()
            assert poincare2(poincare3(q, base), base).is_zero()

    @given(vector_fields())
    @settings(max_examples=20, deadline=None)
    def test_polynomial_preserving(self, u):
        out = poincare2(u)
        if not out.is_zero():
            assert out.degree <= u.degree + 1

    def test_koszul_direct(self):
        assert koszul2(VectorField.constant((1, 0, 0))) == VectorField(
            (Polynomial.zero(), -Z, Y)
        )

    def test_koszul_kills_radial(self):
        radial = VectorField((X, Y, Z))
        p = X + Y * Z
        assert koszul2(VectorField(tuple(p * c for c in radial.comps))).is_zero()

    @pytest.mark.parametrize("m", range(4))
    def test_koszul_poincare_scaling(self, m):
        for p in homogeneous_basis(m):
            v = VectorField((p, Polynomial.zero(), p))
            assert poincare2(v) == koszul2(v) * F(1, m + 2)


class TestIntegration:
    def test_reference_volume(self):
        assert integrate_unit_simplex(Polynomial.constant(1)) == F(1, 6)

    def test_barycentric_product(self):
        lam = (1 - X - Y - Z) * X * Y * Z
        assert integrate_unit_simplex(lam) == F(1, 5040)

    def test_face_relative_value(self):
        # xi*eta*(1-xi-eta) over the parametric triangle is 1/60 of its area
        xi = Polynomial.variable(0, 2)
        eta = Polynomial.variable(1, 2)
        val = integrate_unit_simplex(xi * eta * (1 - xi - eta))
        assert val == F(1, 120) and val / F(1, 2) == F(1, 60)

    def test_affine_tet(self):
        verts = [(F(0), F(0), F(0)), (F(2), F(0), F(0)), (F(0), F(3), F(0)), (F(0), F(0), F(1))]
        assert integrate_simplex(Polynomial.constant(1), verts) == F(1, 1)

    def test_degenerate_rejected(self):
        verts = [(F(0),) * 3, (F(1), F(0), F(0)), (F(2), F(0), F(0)), (F(3), F(0), F(0))]
        with pytest.raises(ValueError):
            integrate_simplex(Polynomial.constant(1), verts)

    def test_quadrature_agreement(self):
        from tetcomplex.quadrature import rule

        rng = np.random.default_rng(11)
        pts, wts = rule(3, 12)
        for _ in range(50):
            e = tuple(int(v) for v in rng.integers(0, 5, size=3))
            if sum(e) > 12:
                continue
            p = Polynomial.monomial(e)
            exact = float(integrate_unit_simplex(p))
            approx = float((wts * p.eval_many(pts)).sum())
            assert abs(approx - exact) < 1e-14


class TestPullback:
    B = [[F(2), F(1), F(0)], [F(0), F(1), F(1)], [F(1), F(0), F(3)]]
    b = [F(1, 2), F(0), F(-1, 3)]

    def test_identity(self):
        eye = [[F(1), F(0), F(0)], [F(0), F(1), F(0)], [F(0), F(0), F(1)]]
        u = VectorField((X * Y, Y, Z * Z))
        for kind in ("scalar", "covariant", "contravariant"):
            target = u if kind != "scalar" else X * Y
            assert pullback_affine(target, eye, [F(0)] * 3, kind) == target

    @given(vector_fields())
    @settings(max_examples=15, deadline=None)
    def test_roundtrip(self, u):
        for kind in ("covariant", "contravariant"):
            assert pullback_affine(pushforward_affine(u, self.B, self.b, kind), self.B, self.b, kind) == u

    @given(vector_fields())
    @settings(max_examples=15, deadline=None)
    def test_curl_transforms_contravariantly(self, uhat):
        lhs = curl(pushforward_affine(uhat, self.B, self.b, "covariant"))
        rhs = pushforward_affine(curl(uhat), self.B, self.b, "contravariant")
        assert lhs == rhs

    def test_singular_rejected(self):
        sing = [[F(1), F(0), F(0)], [F(1), F(0), F(0)], [F(0), F(0), F(1)]]
        with pytest.raises(ValueError):
            pullback_affine(VectorField.zero(), sing, [F(0)] * 3, "covariant")


class TestPiecewise:
    def test_single_is_c0(self):
        pw = PiecewiseField.from_single(VectorField((X * Y, Y * Z, Z)))
        assert pw.check_c0() and pw.is_single()

    def test_c0_violation_detected(self):
        pieces = [Polynomial.constant(i) for i in range(4)]
        pw = PiecewiseField(pieces, "L2")
        assert not pw.check_c0()

    def test_piecewise_poincare_needs_center(self):
        pieces = [Polynomial.constant(i) for i in range(4)]
        pw = PiecewiseField(
            [VectorField((p, p, p)) for p in pieces], "L2"
        )
        with pytest.raises(ValueError):
            piecewise_poincare2(pw, (F(0), F(0), F(0)))
        out = piecewise_poincare2(pw, REF_CENTER)
        assert isinstance(out, PiecewiseField)

    def test_embedding_roundtrip(self):
        emb = Embedding(2, vector=False)
        f = PiecewiseField((X * Y, Y * Y, X + Z, Polynomial.constant(2)), "L2")
        assert emb.coords(emb.field(emb.coords(f))) == emb.coords(f)

    def test_dump_sorted(self):
        p = X * Y * 2 + Z
        lines = p.dump()
        assert lines == sorted(lines) or len(lines) == 2


class TestExactLinearAlgebra:
    def test_rank_and_nullspace(self):
        m = [[F(1), F(2), F(3)], [F(2), F(4), F(6)], [F(0), F(1), F(1)]]
        assert rank(m) == 2
        ns = nullspace(m)
        assert len(ns) == 1
        v = ns[0]
        for row in m:
            assert sum(a * b for a, b in zip(row, v)) == 0
