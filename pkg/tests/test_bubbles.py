"""Bubble constructions: split spaces, divergence solver, face/interior bubbles."""

from fractions import Fraction as F

import numpy as np
import pytest

from tetcomplex.bubbles import (
    build_split_space,
    interior_bubbles,
    modified_face_bubble,
    solve_div,
)
from tetcomplex.polyalg import (
    PiecewiseField,
    Polynomial,
    as_piecewise,
    grad,
    layered_mean_zero_basis,
    rank,
)


class TestSplitSpaces:
    def test_linear_dimension(self):
        space = build_split_space(1)
        assert space.dimension == 5  # nodal values at the five split vertices
        assert len(space.vector_basis()) == 15

    def test_linear_zero_trace(self):
        space = build_split_space(1, zero_trace=True)
        assert space.dimension == 1  # only the split-center node survives

    @pytest.mark.parametrize("m,expected", [(2, 5), (3, 15)])
    def test_zero_trace_dimensions(self, m, expected):
        assert build_split_space(m, zero_trace=True).dimension == expected

    def test_members_continuous(self):
        for b in build_split_space(2).scalar_basis:
            assert b.check_c0()

    def test_zero_trace_members_vanish(self):
        for b in build_split_space(2, zero_trace=True).scalar_basis:
            assert b.vanishes_on_boundary()

    def test_basis_independent(self):
        from tetcomplex.polyalg import Embedding

        space = build_split_space(2)
        emb = Embedding(2, vector=False)
        cols = [emb.coords(b) for b in space.scalar_basis]
        mat = [[cols[j][i] for j in range(len(cols))] for i in range(emb.size)]
        assert rank(mat) == space.dimension


class TestSolveDiv:
    def test_zero_gives_zero(self):
        v = solve_div(as_piecewise(Polynomial.zero()), 2)
        assert v.is_zero()

    def test_piecewise_constant_pattern(self):
        p = PiecewiseField(
            tuple(Polynomial.constant(c) for c in (1, -1, 1, -1)), "L2"
        )
        v = solve_div(p, 1)
        assert (v.div() - p).is_zero()
        assert v.vanishes_on_boundary()

    def test_mean_zero_required(self):
        with pytest.raises(ValueError):
            solve_div(as_piecewise(Polynomial.constant(1)), 2)

    def test_degree_guard(self):
        x = Polynomial.variable(0)
        with pytest.raises(ValueError):
            solve_div(as_piecewise(x * x - Polynomial.constant(F(1, 20) * 2)), 2)

    def test_idempotent_divergence(self):
        # resolving the divergence of a solution reproduces that divergence
        p = PiecewiseField(
            tuple(Polynomial.constant(c) for c in (2, -1, 0, -1)), "L2"
        )
        v = solve_div(p, 2)
        again = solve_div(v.div(), 2)
        assert (again.div() - v.div()).is_zero()

    def test_stability_bound(self):
        # H1 norms stay bounded by a single constant over random unit targets
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(20):
            vals = rng.integers(-4, 5, size=4)
            consts = [F(int(v)) for v in vals]
            mean = sum(consts) / 4
            consts = [c - mean for c in consts]
            p = PiecewiseField(tuple(Polynomial.constant(c) for c in consts), "L2")
            norm_p = float(p.map(lambda q: q * q, continuity="L2").integrate()) ** 0.5
            if norm_p == 0:
                continue
            v = solve_div(p, 1)
            h1 = 0.0
            for c in range(3):
                comp = v.map(lambda u, c=c: u.comps[c], continuity="L2")
                gsq = comp.map(lambda q: grad(q).dot(grad(q)), continuity="L2")
                sq = comp.map(lambda q: q * q, continuity="L2")
                h1 += float(gsq.integrate()) + float(sq.integrate())
            worst = max(worst, h1**0.5 / norm_p)
        assert worst < 50.0  # single constant across all targets


class TestFaceBubbles:
    @pytest.mark.parametrize("i", range(4))
    def test_constant_divergence_exact(self, i):
        fb = modified_face_bubble(i)
        dv = fb.modified.div()
        assert dv.is_single()
        assert dv.pieces[0] == Polynomial.constant(fb.div_value)

    @pytest.mark.parametrize("i", range(4))
    def test_trace_matches_raw(self, i):
        fb = modified_face_bubble(i)
        assert (fb.modified - as_piecewise(fb.raw)).vanishes_on_boundary()

    @pytest.mark.parametrize("i", range(4))
    def test_genuinely_piecewise(self, i):
        # documents why single polynomials cannot carry the correction
        assert not modified_face_bubble(i).modified.is_single()

    def test_divergence_value_via_flux(self):
        # the constant equals the boundary flux divided by the volume
        fb = modified_face_bubble(0)
        flux = as_piecewise(fb.raw).div().integrate()
        assert fb.div_value == flux * 6


class TestInteriorBubbles:
    def test_counts(self):
        assert len(interior_bubbles(1)) == 3
        assert len(interior_bubbles(2)) == 9

    @pytest.mark.parametrize("k", [1, 2])
    def test_exact_divergence_and_trace(self, k):
        for ib in interior_bubbles(k):
            assert (ib.field.div() - as_piecewise(ib.target)).is_zero()
            assert ib.field.vanishes_on_boundary()
            assert ib.order == k + 1

    def test_dof_gram_invertible(self):
        # integration against gradients of the divergence targets is unisolvent
        for k in (1, 2):
            qs = layered_mean_zero_basis(k)
            gram = []
            for ib in interior_bubbles(k):
                gram.append(
                    [
                        ib.field.map(lambda v, q=q: v.dot(grad(q)), continuity="L2").integrate()
                        for q in qs
                    ]
                )
            assert rank(gram) == len(qs)


class TestGoldenDumps:
    def test_polynomial_dump_sorted_lines(self):
        from tetcomplex.polyalg import Polynomial

        p = Polynomial({(1, 1, 0): F(2), (0, 0, 1): F(1, 3)})
        assert p.dump() == ["1/3 * z^1", "2 * x^1 y^1"]

    def test_face_bubble_divergence_dump(self):
        # frozen golden line: the constant-divergence value of bubble 0
        fb = modified_face_bubble(0)
        dv = fb.modified.div()
        assert dv.pieces[0].dump() == ["3/20 * 1"]

    def test_bubble_dump_has_four_pieces(self):
        fb = modified_face_bubble(1)
        lines = fb.modified.dump()
        assert sum(1 for ln in lines if ln.startswith("[piece")) == 4
        assert any("*" in ln for ln in lines)
