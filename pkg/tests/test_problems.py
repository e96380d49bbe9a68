"""Model problems: manufactured fields, solves, Stokes, convergence machinery."""

import numpy as np
import pytest

from tetcomplex.assembly import assemble, discrete_d, restrict_operator, restrict_vector
from tetcomplex.problems import (
    ConfigError,
    ConvergenceReport,
    ManufacturedSolution,
    QuadCurlProblem,
    StokesProblem,
    get_spaces,
    inf_sup_constant,
    interpolation_study,
    run_convergence,
    solve_quadcurl,
    solve_stokes,
)
from tetcomplex.quadrature import QuadratureRule
from tetcomplex.sampling import FieldSample


@pytest.fixture(scope="module")
def manufactured():
    return ManufacturedSolution()


class TestManufactured:
    def test_validation(self, manufactured):
        rep = manufactured.validate()
        assert rep["div"] < 1e-10
        assert rep["boundary_value"] < 1e-12 and rep["boundary_curl"] < 1e-12
        assert rep["forcing_fd"] < 1e-8
        assert rep["ok"]

    def test_sample_fd_consistency(self, manufactured):
        rng = np.random.default_rng(1)
        pts = rng.random((15, 3)) * 0.8 + 0.1
        rep = manufactured.solution_sample().fd_check(pts)
        assert rep["ok"], rep

    def test_forcing_is_divergence_free(self, manufactured):
        # f = -curl(...) + u with div u = 0, checked by finite differences
        rng = np.random.default_rng(2)
        pts = rng.random((10, 3)) * 0.8 + 0.1
        step = 1e-5
        eye = np.eye(3)
        divf = sum(
            (manufactured.forcing(pts + step * eye[j])[:, j]
             - manufactured.forcing(pts - step * eye[j])[:, j]) / (2 * step)
            for j in range(3)
        )
        assert np.abs(divf).max() < 1e-4 * max(1.0, np.abs(manufactured.forcing(pts)).max())

    def test_pressure_mean_zero(self, manufactured):
        quad = QuadratureRule(10)
        pts, w = quad.tet
        # tensorized check over the cube via the structured mesh
        spaces = get_spaces(2, 1, 1, ["pressure"])
        pre = spaces["pressure"]
        coeffs = pre.interpolate(manufactured.pressure_sample(), quad)
        mass = assemble("mass", pre)
        total = float(np.ones(pre.dim) @ (mass.matrix @ coeffs))
        assert abs(total) < 1e-12


class TestQuadCurlSolve:
    def test_zero_forcing_zero_solution(self):
        zero = FieldSample(value=lambda pts: np.zeros((len(pts), 3)))
        prob = QuadCurlProblem(n=2, r=1, k=1)
        prob.solution = ManufacturedSolution()
        spaces = get_spaces(2, 1, 1, ["gradcurl"])
        v = spaces["gradcurl"]
        from tetcomplex.assembly import assemble_load
        import scipy.sparse.linalg as spla

        a = assemble("gradcurl_stiffness", v, 8)
        mask = v.boundary_mask
        a0 = restrict_operator(a, mask, mask)
        f0 = np.zeros(a0.shape[0])
        x = spla.splu(a0.tocsc()).solve(f0)
        assert np.abs(x).max() == 0.0

    def test_errors_decrease(self):
        rows = []
        for n in (2, 4):
            _, row = solve_quadcurl(QuadCurlProblem(n=n, r=2, k=1))
            rows.append(row)
        assert rows[1]["l2"] < rows[0]["l2"]
        assert rows[1]["hcurl"] < rows[0]["hcurl"]
        assert rows[1]["gradcurl"] < rows[0]["gradcurl"]

    def test_residual_reported(self):
        _, row = solve_quadcurl(QuadCurlProblem(n=1, r=1, k=1))
        assert row["residual"] < 1e-10
        assert row["iterations"] >= 1

    def test_cg_solver_matches_direct(self):
        _, row_d = solve_quadcurl(QuadCurlProblem(n=2, r=1, k=1, solver="direct"))
        _, row_c = solve_quadcurl(QuadCurlProblem(n=2, r=1, k=1, solver="cg"))
        assert row_c["l2"] == pytest.approx(row_d["l2"], rel=1e-6)
        assert row_c["residual"] < 1e-9

    def test_galerkin_orthogonality(self):
        coeffs, row = solve_quadcurl(QuadCurlProblem(n=2, r=1, k=1))
        spaces = get_spaces(2, 1, 1, ["gradcurl"])
        v = spaces["gradcurl"]
        from tetcomplex.assembly import assemble_load

        qd = 2 * v.basis_degree
        a = assemble("gradcurl_stiffness", v, qd)
        f = assemble_load(v, ManufacturedSolution().forcing_sample(), qd)
        mask = v.boundary_mask
        resid = restrict_vector(f, mask) - restrict_operator(a, mask, mask) @ restrict_vector(
            coeffs, mask
        )
        assert np.abs(resid).max() < 1e-9 * max(1.0, np.abs(f).max())

    def test_discrete_curl_is_divergence_free(self):
        # curl of the solution, expressed in the velocity space, is killed by div
        coeffs, _ = solve_quadcurl(QuadCurlProblem(n=2, r=1, k=1))
        spaces = get_spaces(2, 1, 1, ["gradcurl", "velocity", "pressure"])
        dc = discrete_d("curl", spaces["gradcurl"], spaces["velocity"])
        dd = discrete_d("div", spaces["velocity"], spaces["pressure"])
        w = dd.matrix @ (dc.matrix @ coeffs)
        assert np.abs(w).max() < 1e-10 * max(1.0, np.abs(dc.matrix @ coeffs).max())

    def test_energy_not_above_interpolant(self):
        coeffs, _ = solve_quadcurl(QuadCurlProblem(n=2, r=1, k=1))
        spaces = get_spaces(2, 1, 1, ["gradcurl"])
        v = spaces["gradcurl"]
        qd = 2 * v.basis_degree
        a = assemble("gradcurl_stiffness", v, qd).matrix
        interp = v.interpolate(ManufacturedSolution().solution_sample(), QuadratureRule(qd))
        interp[v.boundary_mask] = 0.0
        assert coeffs @ (a @ coeffs) <= interp @ (a @ interp) * (1 + 1e-12)

    def test_invalid_solver_rejected(self):
        with pytest.raises(ConfigError):
            solve_quadcurl(QuadCurlProblem(n=1, r=1, k=1, solver="magic"))


class TestStokes:
    def test_divergence_free(self):
        for n in (2, 3):
            _, _, rep = solve_stokes(StokesProblem(n=n, k=1))
            assert rep["div_norm"] <= 1e-9

    def test_velocity_error_decreases(self):
        reps = [solve_stokes(StokesProblem(n=n, k=1))[2] for n in (2, 3)]
        assert reps[1]["velocity_l2"] < reps[0]["velocity_l2"]

    def test_zero_forcing(self):
        import scipy.sparse.linalg as spla
        from tetcomplex.problems import _cg_operator, _pressure_constant_coeffs

        spaces = get_spaces(2, 1, 1, ["velocity", "pressure"])
        vel, pre = spaces["velocity"], spaces["pressure"]
        a = assemble("h1", vel, 10)
        b = assemble("div_pressure", vel, 10, pressure_space=pre)
        mask = vel.boundary_mask
        a0 = restrict_operator(a, mask, mask)
        b0 = b.matrix[:, ~mask]
        lu = spla.splu(a0.tocsc())
        rhs = -(b0 @ lu.solve(np.zeros(a0.shape[0])))
        assert np.abs(rhs).max() == 0.0

    def test_gradient_forcing_gives_zero_velocity(self):
        # pressure-gradient forcing is invisible to the div-free velocity space
        ms = ManufacturedSolution()
        prob = StokesProblem(n=2, k=1)
        prob.solution = ms

        import scipy.sparse.linalg as spla
        from tetcomplex.assembly import assemble_load
        from tetcomplex.problems import _cg_operator, _pressure_constant_coeffs

        spaces = get_spaces(2, 1, 1, ["velocity", "pressure"])
        vel, pre = spaces["velocity"], spaces["pressure"]
        qd = 12
        a = assemble("h1", vel, qd)
        b = assemble("div_pressure", vel, qd, pressure_space=pre)
        mask = vel.boundary_mask
        a0 = restrict_operator(a, mask, mask)
        b0 = b.matrix[:, ~mask]
        f0 = restrict_vector(
            assemble_load(vel, FieldSample(lambda pts: ms.pressure_gradient(pts)), qd), mask
        )
        lu = spla.splu(a0.tocsc())
        qc = _pressure_constant_coeffs(pre)
        mw = assemble("mass", pre, qd).matrix
        cvec = mw @ qc
        proj = lambda q: q - qc * (cvec @ q)
        schur = lambda q: proj(b0 @ lu.solve(b0.T @ proj(q)))
        p, _ = _cg_operator(schur, proj(-(b0 @ lu.solve(f0))), tol=1e-12)
        u0 = lu.solve(f0 + b0.T @ proj(p))
        assert np.abs(u0).max() < 1e-10


class TestInfSup:
    def test_positive_and_stable(self):
        alphas = [inf_sup_constant(n, 1) for n in (1, 2, 3)]
        assert all(a > 0 for a in alphas)
        assert max(alphas) / min(alphas) < 2.0

    def test_desk_scale_guard(self):
        with pytest.raises(ConfigError):
            inf_sup_constant(5, 1)


class TestConvergenceHarness:
    def test_report_format(self, tmp_path):
        rep = run_convergence("quadcurl", [1, 2], 1, 1)
        path = tmp_path / "table.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "N,l2,l2_rate,hcurl,hcurl_rate,gradcurl,gradcurl_rate"
        first = lines[1].split(",")
        assert first[2] == "" and first[4] == "" and first[6] == ""  # blank first rates
        second = lines[2].split(",")
        assert second[2] != ""

    def test_json_mirrors_columns(self, tmp_path):
        rep = run_convergence("quadcurl", [1, 2], 1, 1)
        payload = rep.to_json(tmp_path / "table.json")
        assert payload["columns"] == list(ConvergenceReport.COLUMNS)
        assert payload["rows"][0]["l2_rate"] is None
        assert payload["rows"][1]["dofs"] is not None

    def test_unknown_problem_rejected(self):
        with pytest.raises(ConfigError):
            run_convergence("heat", [1], 1, 1)

    def test_interpolation_study_runs(self):
        rep = interpolation_study([1, 2], 1, 1)
        assert len(rep.rows) == 2
        assert rep.rows[1]["l2_rate"] is not None
