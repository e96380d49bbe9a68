"""Local elements: dimensions, unisolvence, exactness, polynomial reproduction."""

import numpy as np
import pytest

from tetcomplex.elements import (
    CellGeometry,
    SPACE_KINDS,
    entity_dof_counts,
    element_info,
    local_element,
    local_exactness_table,
    phys_curl,
    phys_div,
    phys_grad,
    poly_inclusion_check,
    reference_cell,
    space_dimension,
    validate_family,
)
from tetcomplex.mesh import random_rational_cell
from tetcomplex.polyalg import Embedding, as_piecewise

CONFIGS = [(1, 1), (2, 1), (3, 1), (2, 2), (3, 3)]


class TestDimensions:
    def test_lowest_order_fingerprint(self):
        dims = [space_dimension(kind, 1, 1) for kind in SPACE_KINDS]
        assert dims == [4, 18, 16, 1]

    @pytest.mark.parametrize(
        "r,k,expected",
        [
            (2, 1, [10, 24, 16, 1]),
            (3, 1, [20, 34, 16, 1]),
            (2, 2, [10, 42, 37, 4]),
            (3, 3, [20, 78, 69, 10]),
        ],
    )
    def test_family_dimensions(self, r, k, expected):
        assert [space_dimension(kind, r, k) for kind in SPACE_KINDS] == expected

    @pytest.mark.parametrize("r,k", CONFIGS)
    def test_alternating_sum(self, r, k):
        dims = {kind: space_dimension(kind, r, k) for kind in SPACE_KINDS}
        assert (
            1 - dims["lagrange"] + dims["gradcurl"] - dims["velocity"] + dims["pressure"]
        ) == 0

    def test_velocity_case_split(self):
        assert space_dimension("velocity", 1, 1) == 16  # 12 + 4 face bubbles
        assert space_dimension("velocity", 2, 2) == 37  # 30 + 4 + 3
        assert space_dimension("velocity", 3, 3) == 69  # 60 + 9

    def test_family_constraint(self):
        with pytest.raises(ValueError):
            validate_family(4, 1)
        with pytest.raises(ValueError):
            validate_family(1, 2)
        with pytest.raises(ValueError):
            validate_family(0, 0)

    @pytest.mark.parametrize("r,k", CONFIGS)
    def test_dof_counts_match_dimensions(self, r, k):
        for kind in SPACE_KINDS:
            counts = entity_dof_counts(kind, r, k)
            total = (
                4 * counts["vertex"]
                + 6 * counts["edge"]
                + 4 * counts["face"]
                + counts["cell"]
            )
            assert total == space_dimension(kind, r, k)

    def test_gradcurl_dof_layout_lowest(self):
        counts = entity_dof_counts("gradcurl", 1, 1)
        assert counts == {"vertex": 3, "edge": 1, "face": 0, "cell": 0}

    def test_gradcurl_dof_layout_22(self):
        counts = entity_dof_counts("gradcurl", 2, 2)
        assert counts == {"vertex": 3, "edge": 5, "face": 0, "cell": 0}
        assert 4 * 3 + 6 * 5 == 42

    def test_velocity_dof_layout_lowest(self):
        counts = entity_dof_counts("velocity", 1, 1)
        assert counts == {"vertex": 3, "edge": 0, "face": 1, "cell": 0}


class TestUnisolvence:
    @pytest.mark.parametrize("r,k", CONFIGS)
    def test_reference_cell(self, r, k):
        for kind in SPACE_KINDS:
            el = local_element(kind, r, k)
            assert el.dimension == space_dimension(kind, r, k)
            assert el.condition < 1e8
            resid = np.abs(el.dof_matrix @ el.nodal - np.eye(el.dimension)).max()
            assert resid < 1e-12

    @pytest.mark.parametrize("r,k", [(1, 1), (2, 2)])
    def test_random_cells(self, r, k):
        rng = np.random.default_rng(17 * r + k)
        for _ in range(3):
            cell = CellGeometry.standalone(random_rational_cell(rng))
            for kind in ("gradcurl", "velocity"):
                el = local_element(kind, r, k, cell)
                assert el.condition < 1e8


class TestLocalExactness:
    @pytest.mark.parametrize("r,k", CONFIGS)
    def test_rank_table(self, r, k):
        t = local_exactness_table(r, k)
        dims = t["dims"]
        assert t["curl_grad_zero"] and t["div_curl_zero"]
        assert t["rank_grad"] == dims["lagrange"] - 1
        assert t["nullity_curl"] == t["rank_grad"]
        assert t["rank_curl"] == t["nullity_div"]
        assert t["rank_div"] == dims["pressure"]
        assert t["alternating_sum"] == 0 and t["exact"]


class TestConformity:
    @pytest.mark.parametrize("r,k", [(1, 1), (2, 2)])
    def test_curl_of_gradcurl_inside_velocity(self, r, k):
        # the physical curl of every grad-curl basis field lies in the
        # velocity span, exactly
        from tetcomplex.elements import build_raw_basis
        from tetcomplex.polyalg.spaces import solve_exact

        cell = reference_cell()
        gc = build_raw_basis("gradcurl", cell, r, k)
        vel = build_raw_basis("velocity", cell, r, k)
        deg = max(max(f.degree for f in vel), max(f.degree for f in gc))
        emb = Embedding(deg, vector=True)
        cols = [emb.coords(v) for v in vel]
        matrix = [[cols[j][i] for j in range(len(cols))] for i in range(emb.size)]
        rhs = [emb.coords(phys_curl(cell, u)) for u in gc]
        sols = solve_exact(matrix, rhs)
        assert all(s is not None for s in sols)

    def test_gradients_inside_gradcurl(self):
        from tetcomplex.elements import build_raw_basis
        from tetcomplex.polyalg.spaces import solve_exact
        from tetcomplex.polyalg import Polynomial

        cell = reference_cell()
        gc = build_raw_basis("gradcurl", cell, 2, 1)
        emb = Embedding(max(f.degree for f in gc), vector=True)
        cols = [emb.coords(g) for g in gc]
        matrix = [[cols[j][i] for j in range(len(cols))] for i in range(emb.size)]
        x, y = Polynomial.variable(0), Polynomial.variable(1)
        probe = as_piecewise(phys_grad(cell, as_piecewise(x * y)).pieces[0])
        sols = solve_exact(matrix, [emb.coords(probe)])
        assert sols[0] is not None


class TestPolynomialReproduction:
    @pytest.mark.parametrize("r,k,s", [(1, 1, 0), (2, 1, 1), (3, 1, 2)])
    def test_inclusion_order(self, r, k, s):
        rep = poly_inclusion_check(r, k)
        assert rep["s"] == s and rep["ok"]


def test_element_info_shape():
    info = element_info(1, 1)
    assert info["dimensions"]["gradcurl"] == 18
    assert info["exactness"]["exact"]
    assert set(info["entity_dofs"]) == set(SPACE_KINDS)
