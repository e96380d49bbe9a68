"""Model problems: the fourth-order curl problem, Stokes flow, convergence studies.

The manufactured velocity field is a product of univariate trigonometric
factors per component, so every partial derivative (up to the fourth-order
forcing) evaluates exactly as a product of formally differentiated
univariate factors; no symbolic engine and no quadrature enter the forcing.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    GlobalSpace,
    assemble,
    assemble_load,
    default_quadrature_degree,
    divergence_norm,
    error_norms,
    extend_vector,
    restrict_operator,
    restrict_vector,
)
from .mesh import build_structured_cube
from .quadrature import QuadratureRule
from .sampling import FieldSample


class SolverFailure(RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# univariate trigonometric factors


class TrigPoly1D:
    """Polynomial in (sin(pi x), cos(pi x)) with float coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = {k: v for k, v in terms.items() if v != 0.0}

    def derivative(self):
        out = {}
        for (a, b), c in self.terms.items():
            if a:
                key = (a - 1, b + 1)
                out[key] = out.get(key, 0.0) + np.pi * a * c
            if b:
                key = (a + 1, b - 1)
                out[key] = out.get(key, 0.0) - np.pi * b * c
        return TrigPoly1D(out)

    def eval(self, s, c):
        out = np.zeros_like(s)
        for (a, b), coeff in self.terms.items():
            out += coeff * s**a * c**b
        return out


class SeparableProduct:
    """coef * f1(x) f2(y) f3(z) with derivative tables up to order 4."""

    def __init__(self, coef, f1, f2, f3, max_order=4):
        self.coef = coef
        self.tables = []
        for f in (f1, f2, f3):
            tab = [f]
            for _ in range(max_order):
                tab.append(tab[-1].derivative())
            self.tables.append(tab)

    def partial(self, alpha, sc):
        s, c = sc
        out = np.full(s[0].shape, self.coef)
        for i in range(3):
            out = out * self.tables[i][alpha[i]].eval(s[i], c[i])
        return out


_EPS = np.zeros((3, 3, 3))
for _perm, _sign in ((((0, 1, 2)), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                     ((2, 1, 0), -1), ((0, 2, 1), -1), ((1, 0, 2), -1)):
    _EPS[_perm] = _sign


def _sincos(pts):
    pts = np.asarray(pts, float)
    s = [np.sin(np.pi * pts[:, i]) for i in range(3)]
    c = [np.cos(np.pi * pts[:, i]) for i in range(3)]
    return s, c


class ManufacturedSolution:
    """Trigonometric divergence-free field with vanishing boundary traces.

    Components (s_i = sin(pi x_i), c_i = cos(pi x_i)):

        u1 =    s1^3 (s2^2 c2) (s3^2 c3)
        u2 =    (s1^2 c1) s2^3 (s3^2 c3)
        u3 = -2 (s1^2 c1) (s2^2 c2) s3^3

    The forcing of the fourth-order problem, -curl(lap(curl u)) + u, and
    the Stokes forcing -lap(u) + grad(p) with p = c1 c2 c3 are evaluated
    from the same univariate derivative tables.
    """

    def __init__(self):
        s3 = TrigPoly1D({(3, 0): 1.0})
        s2c = TrigPoly1D({(2, 1): 1.0})
        self.comps = (
            SeparableProduct(1.0, s3, s2c, s2c),
            SeparableProduct(1.0, s2c, s3, s2c),
            SeparableProduct(-2.0, s2c, s2c, s3),
        )
        c1 = TrigPoly1D({(0, 1): 1.0})
        self.pressure_product = SeparableProduct(1.0, c1, c1, c1, max_order=1)

    # -- raw partial evaluators ------------------------------------------

    def _p(self, comp, alpha, sc):
        return self.comps[comp].partial(alpha, sc)

    def value(self, pts):
        sc = _sincos(pts)
        return np.stack([self._p(i, (0, 0, 0), sc) for i in range(3)], axis=1)

    def divergence(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        return sum(self._p(i, tuple(e[i]), sc) for i in range(3))

    def curl(self, pts):
        sc = _sincos(pts)
        return self._curl_sc(sc)

    def _curl_sc(self, sc):
        e = np.eye(3, dtype=int)
        out = []
        for a in range(3):
            acc = 0.0
            for b in range(3):
                for c in range(3):
                    s = _EPS[a, b, c]
                    if s:
                        acc = acc + s * self._p(c, tuple(e[b]), sc)
            out.append(acc)
        return np.stack(out, axis=1)

    def grad_curl(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        n = len(np.asarray(pts))
        out = np.zeros((n, 3, 3))
        for a in range(3):
            for d in range(3):
                acc = 0.0
                for b in range(3):
                    for c in range(3):
                        s = _EPS[a, b, c]
                        if s:
                            acc = acc + s * self._p(c, tuple(e[b] + e[d]), sc)
                out[:, a, d] = acc
        return out

    def lap_curl(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        out = []
        for a in range(3):
            acc = 0.0
            for d in range(3):
                for b in range(3):
                    for c in range(3):
                        s = _EPS[a, b, c]
                        if s:
                            acc = acc + s * self._p(c, tuple(e[b] + 2 * e[d]), sc)
            out.append(acc)
        return np.stack(out, axis=1)

    def curl_lap_curl(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        out = []
        for a in range(3):
            acc = 0.0
            for b in range(3):
                for c in range(3):
                    sab = _EPS[a, b, c]
                    if not sab:
                        continue
                    for d in range(3):
                        for ee in range(3):
                            for f in range(3):
                                scf = _EPS[c, ee, f]
                                if scf:
                                    acc = acc + sab * scf * self._p(
                                        f, tuple(e[b] + 2 * e[d] + e[ee]), sc
                                    )
            out.append(acc)
        return np.stack(out, axis=1)

    def forcing(self, pts):
        return -self.curl_lap_curl(pts) + self.value(pts)

    def laplacian(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        return np.stack(
            [
                sum(self._p(i, tuple(2 * e[d]), sc) for d in range(3))
                for i in range(3)
            ],
            axis=1,
        )

    def pressure(self, pts):
        sc = _sincos(pts)
        return self.pressure_product.partial((0, 0, 0), sc)

    def pressure_gradient(self, pts):
        sc = _sincos(pts)
        e = np.eye(3, dtype=int)
        return np.stack(
            [self.pressure_product.partial(tuple(e[i]), sc) for i in range(3)], axis=1
        )

    def stokes_forcing(self, pts, viscosity=1.0):
        return -viscosity * self.laplacian(pts) + self.pressure_gradient(pts)

    # -- packaged samples ---------------------------------------------------

    def solution_sample(self):
        return FieldSample(self.value, self.curl, self.grad_curl, self.divergence)

    def forcing_sample(self):
        return FieldSample(self.forcing)

    def stokes_forcing_sample(self, viscosity=1.0):
        return FieldSample(lambda pts: self.stokes_forcing(pts, viscosity))

    def pressure_sample(self):
        return FieldSample(self.pressure, gradient=self.pressure_gradient, scalar=True)

    # -- validation -----------------------------------------------------------

    def validate(self, rng=None, n=40):
        """Divergence, boundary traces, and a finite-difference forcing check."""
        rng = rng or np.random.default_rng(123)
        pts = rng.random((n, 3))
        report = {}
        report["div"] = float(np.abs(self.divergence(pts)).max())

        edge = rng.random((n, 3))
        for axis in range(3):
            for val in (0.0, 1.0):
                q = edge.copy()
                q[:, axis] = val
                report.setdefault("boundary_value", 0.0)
                report.setdefault("boundary_curl", 0.0)
                report["boundary_value"] = max(
                    report["boundary_value"], float(np.abs(self.value(q)).max())
                )
                report["boundary_curl"] = max(
                    report["boundary_curl"], float(np.abs(self.curl(q)).max())
                )

        # Richardson-extrapolated curl of the analytic third-derivative field
        interior = rng.random((n, 3)) * 0.9 + 0.05
        fd = _richardson_curl(self.lap_curl, interior, h=1e-3)
        f_ref = -fd + self.value(interior)
        f_an = self.forcing(interior)
        scale = max(1.0, float(np.abs(f_an).max()))
        report["forcing_fd"] = float(np.abs(f_an - f_ref).max() / scale)
        report["ok"] = (
            report["div"] < 1e-10
            and report["boundary_value"] < 1e-12
            and report["boundary_curl"] < 1e-12
            and report["forcing_fd"] < 1e-8
        )
        return report


def _richardson_curl(f, pts, h):
    def curl_at(hh):
        eye = np.eye(3)
        d = [(f(pts + hh * eye[j]) - f(pts - hh * eye[j])) / (2 * hh) for j in range(3)]
        return np.stack(
            [d[1][:, 2] - d[2][:, 1], d[2][:, 0] - d[0][:, 2], d[0][:, 1] - d[1][:, 0]],
            axis=1,
        )

    c1 = curl_at(h)
    c2 = curl_at(h / 2)
    return (4 * c2 - c1) / 3


# ---------------------------------------------------------------------------
# problem definitions


@dataclass
class QuadCurlProblem:
    """Fourth-order curl model problem on the unit cube at one mesh level."""

    n: int
    r: int
    k: int
    tol: float = 1e-10
    quad_degree: int = None
    solver: str = "direct"
    solution: ManufacturedSolution = dc_field(default_factory=ManufacturedSolution)


@dataclass
class StokesProblem:
    n: int
    k: int
    viscosity: float = 1.0
    tol: float = 1e-12
    quad_degree: int = None
    solution: ManufacturedSolution = dc_field(default_factory=ManufacturedSolution)


_space_cache = {}


def get_spaces(n, r, k, kinds):
    """Mesh plus global spaces, cached per (n, r, k)."""
    key = (n, r, k)
    entry = _space_cache.get(key)
    if entry is None:
        entry = {"mesh": build_structured_cube(n)}
        _space_cache[key] = entry
    for kind in kinds:
        if kind not in entry:
            entry[kind] = GlobalSpace(entry["mesh"], kind, r, k)
    return entry


def _solve_spd(a0, rhs, solver, tol):
    """Solve an SPD restricted system; returns (x, iterations)."""
    if solver == "direct":
        lu = spla.splu(a0.tocsc())
        return lu.solve(rhs), 1
    if solver in ("cg", "cg-diagonal"):
        if solver == "cg":
            try:
                ilu = spla.spilu(a0.tocsc(), drop_tol=1e-5, fill_factor=12)
                pre = spla.LinearOperator(a0.shape, ilu.solve)
            except RuntimeError:
                pre = None
        else:
            d = a0.diagonal()
            pre = spla.LinearOperator(a0.shape, lambda x: x / d)
        iters = 0

        def count(_):
            nonlocal iters
            iters += 1

        x, info = spla.cg(a0, rhs, rtol=tol, atol=0.0, maxiter=20000, M=pre, callback=count)
        if info != 0:
            resid = float(np.linalg.norm(a0 @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
            raise SolverFailure(
                f"conjugate gradient stalled after {iters} iterations", iters, resid
            )
        return x, iters
    raise ConfigError(f"unknown solver {solver!r}")


def solve_quadcurl(problem: QuadCurlProblem):
    """Solve the restricted fourth-order system; returns (coeffs, report row)."""
    t0 = time.time()
    spaces = get_spaces(problem.n, problem.r, problem.k, ["gradcurl"])
    v = spaces["gradcurl"]
    quad_degree = problem.quad_degree or max(
        default_quadrature_degree(problem.r, problem.k, v.basis_degree), 2 * v.basis_degree
    )
    a = assemble("gradcurl_stiffness", v, quad_degree)
    f = assemble_load(v, problem.solution.forcing_sample(), quad_degree)
    mask = v.boundary_mask
    a0 = restrict_operator(a, mask, mask)
    f0 = restrict_vector(f, mask)
    x, iters = _solve_spd(a0, f0, problem.solver, problem.tol)
    rhs_norm = float(np.linalg.norm(f0)) or 1.0
    residual = float(np.linalg.norm(a0 @ x - f0)) / rhs_norm
    if residual > problem.tol * 10:
        raise SolverFailure(
            f"linear solve residual {residual:.3e} above tolerance", iters, residual
        )
    coeffs = extend_vector(x, mask)
    errs = error_norms(v, coeffs, problem.solution.solution_sample(), quad_degree)
    row = {
        "N": problem.n,
        "dofs": int(v.interior_dim),
        "l2": errs[0],
        "hcurl": errs[1],
        "gradcurl": errs[2],
        "residual": residual,
        "iterations": iters,
        "seconds": time.time() - t0,
    }
    return coeffs, row


def _pressure_constant_coeffs(w_space):
    const = FieldSample(value=lambda pts: np.ones(len(pts)))
    return w_space.interpolate(const, QuadratureRule(2))


def solve_stokes(problem: StokesProblem):
    """Stokes flow with the enriched velocity / discontinuous pressure pair.

    Returns (velocity coeffs, pressure coeffs, report) with the divergence
    norm of the discrete velocity in the report.
    """
    t0 = time.time()
    spaces = get_spaces(problem.n, problem.k, problem.k, ["velocity", "pressure"])
    vel, pre = spaces["velocity"], spaces["pressure"]
    quad_degree = max(
        default_quadrature_degree(problem.k, problem.k, vel.basis_degree),
        vel.basis_degree + pre.basis_degree,
    )
    a = assemble("h1", vel, quad_degree)
    b = assemble("div_pressure", vel, quad_degree, pressure_space=pre)
    mask = vel.boundary_mask
    a0 = restrict_operator(a, mask, mask) * problem.viscosity
    b0 = b.matrix[:, ~mask]
    f = assemble_load(vel, problem.solution.stokes_forcing_sample(problem.viscosity), quad_degree)
    f0 = restrict_vector(f, mask)

    lu = spla.splu(a0.tocsc())
    q_const = _pressure_constant_coeffs(pre)
    mw = assemble("mass", pre, quad_degree).matrix
    c_vec = mw @ q_const  # functional q -> integral of q over the domain

    def project(q):
        return q - q_const * (c_vec @ q)

    def schur(q):
        return project(b0 @ lu.solve(b0.T @ project(q)))

    rhs = project(-(b0 @ lu.solve(f0)))
    p, iters = _cg_operator(schur, rhs, tol=problem.tol)
    p = project(p)
    u0 = lu.solve(f0 + b0.T @ p)
    coeffs = extend_vector(u0, mask)

    div_norm = divergence_norm(vel, coeffs, quad_degree)
    errs = error_norms(vel, coeffs, problem.solution.solution_sample(), quad_degree)
    p_err = _pressure_error(pre, p, problem.solution.pressure_sample(), quad_degree)
    report = {
        "N": problem.n,
        "dofs": int(vel.interior_dim + pre.dim - 1),
        "velocity_l2": errs[0],
        "velocity_h1curl": errs[1],
        "pressure_l2": p_err,
        "div_norm": div_norm,
        "iterations": iters,
        "seconds": time.time() - t0,
    }
    return coeffs, p, report


def _pressure_error(space, coeffs, exact, quad_degree):
    from .assembly import _class_tables

    total = 0.0
    coeffs = np.asarray(coeffs)
    for group, tab in _class_tables(space, quad_degree):
        w = tab.weights
        cells = np.array(group)
        local = coeffs[np.stack([space.local_to_global[ci] for ci in cells])]
        ph = np.einsum("cl,lq->cq", local, tab.values)
        pts = np.stack([space.cells_geom[ci].amap.apply(tab.ref_points) for ci in cells])
        pe = exact.value(pts.reshape(-1, 3)).reshape(ph.shape)
        total += tab.det * float(np.einsum("cq,q->", (ph - pe) ** 2, w))
    return float(np.sqrt(max(total, 0.0)))


def _cg_operator(apply_op, rhs, tol, maxiter=5000):
    x = np.zeros_like(rhs)
    r = rhs.copy()
    d = r.copy()
    rs = float(r @ r)
    rhs_norm = np.sqrt(float(rhs @ rhs)) or 1.0
    for it in range(1, maxiter + 1):
        ad = apply_op(d)
        dad = float(d @ ad)
        if dad <= 0:
            break
        alpha = rs / dad
        x += alpha * d
        r -= alpha * ad
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * rhs_norm:
            return x, it
        d = r + (rs_new / rs) * d
        rs = rs_new
    if np.sqrt(rs) > tol * rhs_norm * 100:
        raise SolverFailure("Schur-complement iteration stalled", maxiter, np.sqrt(rs) / rhs_norm)
    return x, maxiter


def inf_sup_constant(n, k):
    """Discrete inf-sup constant of the velocity/pressure pair at level n.

    The square root of the smallest eigenvalue of the pressure Schur
    complement (with the full H1 velocity Gram) generalized against the
    pressure mass matrix, restricted to mean-zero pressures.
    """
    if n > 3:
        raise ConfigError("dense inf-sup eigenproblem is desk-scale: level <= 3")
    spaces = get_spaces(n, k, k, ["velocity", "pressure"])
    vel, pre = spaces["velocity"], spaces["pressure"]
    quad_degree = default_quadrature_degree(k, k, vel.basis_degree)
    a1 = (
        assemble("h1", vel, quad_degree).matrix
        + assemble("mass", vel, quad_degree).matrix
    )
    b = assemble("div_pressure", vel, quad_degree, pressure_space=pre)
    mask = vel.boundary_mask
    a0 = a1[:, ~mask][~mask, :]
    b0 = b.matrix[:, ~mask]
    mw = assemble("mass", pre, quad_degree).matrix.todense()

    lu = spla.splu(sp.csc_matrix(a0))
    bt = np.asarray(b0.todense()).T
    s = np.asarray(b0.todense()) @ lu.solve(bt)

    q_const = _pressure_constant_coeffs(pre)
    c = np.asarray(mw @ q_const).ravel()
    q, _ = np.linalg.qr(np.column_stack([c / np.linalg.norm(c), np.eye(len(c))]), mode="complete")
    z = q[:, 1:len(c)]
    s_red = z.T @ s @ z
    m_red = z.T @ np.asarray(mw) @ z
    from scipy.linalg import eigh

    vals = eigh(s_red, m_red, eigvals_only=True)
    lam_min = float(vals[0])
    return float(np.sqrt(max(lam_min, 0.0)))


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceReport:
    problem: str
    r: int
    k: int
    rows: list

    COLUMNS = ("N", "l2", "l2_rate", "hcurl", "hcurl_rate", "gradcurl", "gradcurl_rate")

    def compute_rates(self):
        for i, row in enumerate(self.rows):
            for key in ("l2", "hcurl", "gradcurl"):
                if i == 0:
                    row[f"{key}_rate"] = None
                else:
                    prev = self.rows[i - 1]
                    ratio = np.log(prev[key] / row[key]) / np.log(row["N"] / prev["N"])
                    row[f"{key}_rate"] = float(ratio)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows:
                cells = []
                for col in self.COLUMNS:
                    v = row.get(col)
                    if v is None:
                        cells.append("")
                    elif col == "N":
                        cells.append(str(v))
                    else:
                        cells.append(f"{v:.6e}")
                fh.write(",".join(cells) + "\n")

    def to_json(self, path=None):
        payload = {
            "problem": self.problem,
            "r": self.r,
            "k": self.k,
            "columns": list(self.COLUMNS),
            "rows": [
                {
                    **{c: row.get(c) for c in self.COLUMNS},
                    "dofs": row.get("dofs"),
                    "seconds": row.get("seconds"),
                }
                for row in self.rows
            ],
        }
        text = json.dumps(payload, indent=2)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return payload

    def rate(self, key, level_pair="last"):
        rates = [row[f"{key}_rate"] for row in self.rows if row.get(f"{key}_rate") is not None]
        if not rates:
            return None
        return rates[-1] if level_pair == "last" else rates


def run_convergence(problem, levels, r, k, tol=1e-10, solver="direct", quad_degree=None):
    """Solve at each level and tabulate errors with consecutive-level rates."""
    if problem != "quadcurl":
        raise ConfigError(f"convergence studies support the quadcurl problem, not {problem!r}")
    rows = []
    for n in levels:
        prob = QuadCurlProblem(n=n, r=r, k=k, tol=tol, solver=solver, quad_degree=quad_degree)
        _, row = solve_quadcurl(prob)
        rows.append(row)
    report = ConvergenceReport(problem, r, k, rows)
    report.compute_rates()
    return report


def interpolation_study(levels, r, k, quad_degree=None):
    """Interpolation errors of the manufactured field per level, with rates."""
    ms = ManufacturedSolution()
    sample = ms.solution_sample()
    rows = []
    for n in levels:
        t0 = time.time()
        spaces = get_spaces(n, r, k, ["gradcurl"])
        v = spaces["gradcurl"]
        qd = quad_degree or default_quadrature_degree(r, k, v.basis_degree)
        coeffs = v.interpolate(sample, QuadratureRule(qd))
        errs = error_norms(v, coeffs, sample, qd)
        rows.append(
            {
                "N": n,
                "dofs": int(v.dim),
                "l2": errs[0],
                "hcurl": errs[1],
                "gradcurl": errs[2],
                "seconds": time.time() - t0,
            }
        )
    report = ConvergenceReport("interpolation", r, k, rows)
    report.compute_rates()
    return report
