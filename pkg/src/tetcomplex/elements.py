"""Local element spaces, degrees of freedom, and nodal bases.

Four local spaces per (r, k) with r in {k, k+1, k+2}:

- ``lagrange``: scalar P_r (potentials)
- ``gradcurl``: gradients of P_r plus vector potentials of the velocity
  space (the grad-curl conforming space)
- ``velocity``: vector P_k enriched with modified face bubbles (k <= 2)
  and interior bubbles of the split
- ``pressure``: scalar P_{k-1}

All local fields are stored in reference coordinates of their cell; the
physical value at ``x = B xhat + b`` is the stored field evaluated at
``xhat``.  Entity DOFs are defined from globally oriented entity data
(ascending-vertex tangents, frames, rational face directions), so every
cell incident to a shared entity evaluates the identical functional.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .bubbles import interior_bubbles, scalar_face_bubble, solve_div
from .mesh import MeshTopology, REF_EDGE_VERTICES, REF_FACE_VERTICES
from .polyalg.poly import (
    Polynomial,
    VectorField,
    curl,
    div,
    grad,
    integrate_unit_simplex,
)
from .polyalg.spaces import (
    Embedding,
    dim_layered,
    dim_poly,
    layered_mean_zero_basis,
    monomial_exponents,
    rank as exact_rank,
    select_independent,
    vector_monomials,
)
from .polyalg.split import (
    REF_CENTER,
    REF_VERTICES,
    PiecewiseField,
    as_piecewise,
    face_param,
    piecewise_poincare2,
    segment_param,
)

SPACE_KINDS = ("lagrange", "gradcurl", "velocity", "pressure")

# subtet containing a given parent edge / vertex (any valid choice works for
# the continuous fields DOFs are applied to)
_SUBTET_FOR_EDGE = {
    pair: min(set(range(4)) - set(pair)) for pair in REF_EDGE_VERTICES
}


def validate_family(r, k):
    if k < 1:
        raise ValueError("enrichment order k must be >= 1")
    if r - k not in (0, 1, 2):
        raise ValueError(f"Lagrange order r={r} must be in {{k, k+1, k+2}} for k={k}")


@dataclass(frozen=True)
class ElementConfig:
    """A member of the element family: enrichment order k, Lagrange order r."""

    r: int
    k: int

    def __post_init__(self):
        validate_family(self.r, self.k)


# ---------------------------------------------------------------------------
# cell geometry bundle


class CellGeometry:
    """Per-cell entity data needed to define globally consistent DOFs."""

    def __init__(self, mesh: MeshTopology, cell_id: int):
        self.mesh = mesh
        self.cell_id = cell_id
        self.amap = mesh.cell_maps[cell_id]
        cell = mesh.cells[cell_id]
        self.ref_to_global = tuple(cell[self.amap.vertex_order[r]] for r in range(4))
        slot_of_global = {g: s for s, g in enumerate(cell)}

        self.vertices = []
        for r in range(4):
            g = self.ref_to_global[r]
            self.vertices.append(
                {
                    "global": g,
                    "ref": REF_VERTICES[r],
                    "point": np.array([float(c) for c in mesh.vertices[g]]),
                }
            )

        self.edges = []
        for (a, b) in REF_EDGE_VERTICES:
            ga, gb = self.ref_to_global[a], self.ref_to_global[b]
            key = (min(ga, gb), max(ga, gb))
            data = mesh.edges[mesh.edge_index[key]]
            geo = data.geometry(mesh.vertices)
            lo_ref = REF_VERTICES[a] if ga < gb else REF_VERTICES[b]
            hi_ref = REF_VERTICES[b] if ga < gb else REF_VERTICES[a]
            self.edges.append(
                {
                    "global": mesh.edge_index[key],
                    "locals": (a, b),
                    "ref_lo": lo_ref,
                    "ref_hi": hi_ref,
                    "phys_lo": np.array([float(c) for c in mesh.vertices[key[0]]]),
                    "phys_hi": np.array([float(c) for c in mesh.vertices[key[1]]]),
                    "tangent": geo["tangent"],
                    "length": geo["length"],
                }
            )

        self.faces = []
        for fi, tri in enumerate(REF_FACE_VERTICES):
            globals_sorted = tuple(sorted(self.ref_to_global[t] for t in tri))
            fidx = mesh.face_index[globals_sorted]
            fdata = mesh.faces[fidx]
            geo = fdata.geometry(mesh.vertices)
            ref_anchors = []
            phys_anchors = []
            for g in globals_sorted:
                rloc = self.ref_to_global.index(g)
                ref_anchors.append(REF_VERTICES[rloc])
                phys_anchors.append(np.array([float(c) for c in mesh.vertices[g]]))
            direction = fdata.direction_exact(mesh.vertices)
            centroid = fdata.centroid_exact(mesh.vertices)
            self.faces.append(
                {
                    "global": fidx,
                    "ref_anchors": tuple(ref_anchors),
                    "phys_anchors": tuple(phys_anchors),
                    "phys_anchors_exact": tuple(mesh.vertices[g] for g in globals_sorted),
                    "direction": direction,
                    "centroid_exact": centroid,
                    **geo,
                }
            )

        inv = self.amap.inverse
        self.b_inv = inv
        self.b_invT = tuple(tuple(inv[j][i] for j in range(3)) for i in range(3))
        self.b_T = tuple(tuple(self.amap.matrix[j][i] for j in range(3)) for i in range(3))

    @classmethod
    def standalone(cls, vertices):
        return cls(MeshTopology(vertices, [(0, 1, 2, 3)]), 0)

    def signature(self):
        """Cache key: matrix plus the ascending-id patterns of the entities."""
        edge_pattern = tuple(
            (e["locals"], e["ref_lo"]) for e in self.edges
        )
        face_pattern = tuple(f["ref_anchors"] for f in self.faces)
        return (self.amap.signature(), edge_pattern, face_pattern)


@lru_cache(maxsize=1)
def reference_cell() -> CellGeometry:
    return CellGeometry.standalone(REF_VERTICES)


# ---------------------------------------------------------------------------
# physical differential operators on reference-expressed fields


def phys_grad(cell: CellGeometry, scalar_pw: PiecewiseField) -> PiecewiseField:
    return scalar_pw.map(lambda p: grad(p).matmul(cell.b_invT))


def phys_curl(cell: CellGeometry, vec_pw: PiecewiseField) -> PiecewiseField:
    det = cell.amap.det
    inv_det = Fraction(1, 1) / det if isinstance(det, Fraction) else 1.0 / det

    def one(p):
        return curl(p.matmul(cell.b_T)).matmul(cell.amap.matrix) * inv_det

    return vec_pw.map(one)


def phys_div(cell: CellGeometry, vec_pw: PiecewiseField) -> PiecewiseField:
    return vec_pw.map(lambda p: div(p.matmul(cell.b_inv)))


# ---------------------------------------------------------------------------
# raw space bases


def lagrange_raw(r):
    return [as_piecewise(Polynomial.monomial(e)) for e in monomial_exponents(r, 3)]


def pressure_raw(k):
    return [as_piecewise(Polynomial.monomial(e)) for e in monomial_exponents(k - 1, 3)]


def physical_face_bubble(cell: CellGeometry, local_face: int):
    """Modified face bubble on a physical cell, in reference expression.

    The bubble direction is the face's global rational direction (the
    ascending-vertex cross product), so both cells incident to a mesh face
    build the identical trace and the global space stays H1-conforming.
    """
    d = cell.faces[local_face]["direction"]
    scalar = scalar_face_bubble(local_face)
    raw = VectorField(tuple(scalar * dc for dc in d))
    g = phys_div(cell, as_piecewise(raw)).pieces[0]
    mean = integrate_unit_simplex(g) * 6
    target = (g - Polynomial.constant(mean)) * cell.amap.det
    w_hat = solve_div(as_piecewise(target), 3)
    inv_det = Fraction(1, 1) / cell.amap.det
    correction = w_hat.matmul(cell.amap.matrix) * inv_det
    beta = as_piecewise(raw) - correction
    beta = PiecewiseField(beta.pieces, "C0")
    dv = phys_div(cell, beta)
    assert dv.is_single() and dv.pieces[0] == Polynomial.constant(mean)
    return beta, mean


def velocity_raw(cell: CellGeometry, k):
    """Vector P_k plus face bubbles (k <= 2) and interior bubbles."""
    fields = [as_piecewise(v) for v in vector_monomials(k)]
    is_bubble = [False] * len(fields)
    if k <= 2:
        for i in range(4):
            beta, _ = physical_face_bubble(cell, i)
            fields.append(beta)
            is_bubble.append(True)
    order = k - 1 if k >= 3 else (1 if k == 2 else None)
    if order is not None:
        inv_det = Fraction(1, 1) / cell.amap.det
        for ib in interior_bubbles(order):
            fields.append(ib.field.matmul(cell.amap.matrix) * inv_det)
            is_bubble.append(True)
    return fields, is_bubble


def gradcurl_raw(cell: CellGeometry, r, k, select="exact"):
    """Gradients of P_r plus vector potentials of the velocity basis.

    Base points (reference coordinates): the split center for bubble
    generators, the reference origin for polynomial generators.  A
    rank-revealing selection drops the dependent generators; the surviving
    dimension must equal dim velocity + dim P_r - dim P_{k-1} - 1.
    """
    validate_family(r, k)
    gens = []
    for e in monomial_exponents(r, 3):
        if sum(e) == 0:
            continue
        gens.append(as_piecewise(grad(Polynomial.monomial(e)).matmul(cell.b_invT)))
    vel_fields, vel_bubble = velocity_raw(cell, k)
    origin = (Fraction(0), Fraction(0), Fraction(0))
    for psi, is_bub in zip(vel_fields, vel_bubble):
        base = REF_CENTER if is_bub else origin
        gens.append(piecewise_poincare2(psi, base, matrix=cell.amap.matrix))

    expected = (
        len(vel_fields) + dim_poly(r) - dim_poly(k - 1) - 1
    )
    degree = max(g.degree for g in gens)
    emb = Embedding(degree, vector=True)
    cols = [_difference_coords(emb.coords(g), emb.block) for g in gens]
    if select == "exact":
        chosen = select_independent(cols)
    else:
        from scipy.linalg import qr

        a = np.array([[float(v) for v in col] for col in cols]).T
        _, rdiag, piv = qr(a, mode="economic", pivoting=True)
        diag = np.abs(np.diag(rdiag))
        keep = diag > diag[0] * 1e-9
        chosen = sorted(piv[: int(keep.sum())])
    if len(chosen) != expected:
        raise ArithmeticError(
            f"grad-curl space rank {len(chosen)} != expected {expected} for (r,k)=({r},{k})"
        )
    return [gens[i] for i in chosen]


# ---------------------------------------------------------------------------
# DOF functionals


@dataclass
class DofFunctional:
    """Bounded linear functional on the local shape space.

    ``needs`` selects whether the functional acts on the field itself or on
    its physical curl; ``apply_field`` acts on cached restrictions of exact
    fields, ``apply_sample`` on analytic field samples via quadrature.
    """

    entity: tuple
    slot: int
    needs: str
    label: str
    _field_apply: callable = dc_field(repr=False, default=None)
    _sample_apply: callable = dc_field(repr=False, default=None)

    def apply_field(self, cache):
        return self._field_apply(cache)

    def apply_sample(self, sample, quad):
        return self._sample_apply(sample, quad)


class FieldCache:
    """Lazy per-entity restrictions of one reference-expressed field."""

    def __init__(self, pw: PiecewiseField, cell: CellGeometry):
        self.pw = pw
        self.cell = cell
        self._edges = {}
        self._faces = {}

    def at_vertex(self, v):
        piece = self.pw.pieces[(v + 1) % 4]
        return piece(REF_VERTICES[v])

    def edge(self, e):
        if e not in self._edges:
            info = self.cell.edges[e]
            piece = self.pw.pieces[_SUBTET_FOR_EDGE[info["locals"]]]
            mtx, sh = segment_param(info["ref_lo"], info["ref_hi"])
            self._edges[e] = piece.compose_affine(mtx, sh)
        return self._edges[e]

    def face(self, f):
        if f not in self._faces:
            info = self.cell.faces[f]
            piece = self.pw.pieces[f]
            mtx, sh = face_param(info["ref_anchors"])
            self._faces[f] = piece.compose_affine(mtx, sh)
        return self._faces[f]


def _int2(p):
    return float(integrate_unit_simplex(p))


def _exps2(degree):
    return monomial_exponents(degree, 2) if degree >= 0 else []


def _mono2(e):
    return Polynomial.monomial(e)


def _interior_moment(pw, weight_vec, det):
    """det * exact integral over the split of pw . weight_vec."""
    prod = pw.map(lambda p: p.dot(weight_vec), continuity="L2")
    return float(prod.integrate()) * float(det)


def _phys_edge_points(info, spts):
    lo, hi = info["phys_lo"], info["phys_hi"]
    return lo[None, :] + spts[:, :1] * (hi - lo)[None, :]


def _phys_face_points(info, fpts):
    p0, p1, p2 = info["phys_anchors"]
    return p0[None, :] + fpts[:, :1] * (p1 - p0)[None, :] + fpts[:, 1:2] * (p2 - p0)[None, :]


def lagrange_dofs(cell: CellGeometry, r):
    dofs = []
    for v in range(4):
        pt = cell.vertices[v]["point"]
        dofs.append(
            DofFunctional(
                ("vertex", v), 0, "value", f"value@v{v}",
                _field_apply=lambda c, v=v: float(c.at_vertex(v)),
                _sample_apply=lambda s, q, pt=pt: float(s.value(pt[None, :])[0]),
            )
        )
    for e, info in enumerate(cell.edges):
        for m in range(r - 1):
            w = Polynomial.monomial((m,))
            dofs.append(
                DofFunctional(
                    ("edge", e), m, "value", f"edge{e}-moment{m}",
                    _field_apply=lambda c, e=e, w=w, L=info["length"]: L * _int2(c.edge(e) * w),
                    _sample_apply=lambda s, q, info=info, m=m: _edge_scalar_sample(s, q, info, m),
                )
            )
    for f, info in enumerate(cell.faces):
        for slot, exp in enumerate(_exps2(r - 3)):
            w = _mono2(exp)
            dofs.append(
                DofFunctional(
                    ("face", f), slot, "value", f"face{f}-moment{exp}",
                    _field_apply=lambda c, f=f, w=w, A=info["area"]: 2 * A * _int2(c.face(f) * w),
                    _sample_apply=lambda s, q, info=info, exp=exp: _face_scalar_sample(s, q, info, exp),
                )
            )
    det = cell.amap.det
    for slot, exp in enumerate(monomial_exponents(r - 4, 3) if r >= 4 else []):
        w = Polynomial.monomial(exp)
        dofs.append(
            DofFunctional(
                ("cell", 0), slot, "value", f"cell-moment{exp}",
                _field_apply=lambda c, w=w, det=det: float(
                    c.pw.map(lambda p: p * w, continuity="L2").integrate()
                ) * float(det),
                _sample_apply=lambda s, q, exp=exp, cell=cell: _cell_scalar_sample(s, q, cell, exp),
            )
        )
    return dofs


def _edge_scalar_sample(sample, quad, info, m):
    spts, w = quad.segment
    pts = _phys_edge_points(info, spts)
    vals = sample.value(pts)
    return info["length"] * float(np.sum(w * vals * spts[:, 0] ** m))


def _face_scalar_sample(sample, quad, info, exp):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    vals = sample.value(pts)
    mono = fpts[:, 0] ** exp[0] * fpts[:, 1] ** exp[1]
    return 2 * info["area"] * float(np.sum(w * vals * mono))


def _cell_scalar_sample(sample, quad, cell, exp):
    rpts, w = quad.tet
    pts = cell.amap.apply(rpts)
    vals = sample.value(pts)
    mono = rpts[:, 0] ** exp[0] * rpts[:, 1] ** exp[1] * rpts[:, 2] ** exp[2]
    return cell.amap.det_f * float(np.sum(w * vals * mono))


def pressure_dofs(cell: CellGeometry, k):
    # mean-value moments (1/|K|) \int p q dV: the order-zero nodal basis is
    # then the cell indicator and mass row sums are cell volumes
    dofs = []
    vol = cell.amap.det * Fraction(1, 6)
    inv_vol = 1.0 / float(vol)
    for slot, exp in enumerate(monomial_exponents(k - 1, 3)):
        w = Polynomial.monomial(exp)
        dofs.append(
            DofFunctional(
                ("cell", 0), slot, "value", f"cell-mean-moment{exp}",
                _field_apply=lambda c, w=w: 6.0
                * float(c.pw.map(lambda p: p * w, continuity="L2").integrate()),
                _sample_apply=lambda s, q, exp=exp, cell=cell, iv=inv_vol: iv
                * _cell_scalar_sample(s, q, cell, exp),
            )
        )
    return dofs


def velocity_dofs(cell: CellGeometry, k):
    dofs = []
    for v in range(4):
        pt = cell.vertices[v]["point"]
        for c in range(3):
            dofs.append(
                DofFunctional(
                    ("vertex", v), c, "value", f"value@v{v}[{c}]",
                    _field_apply=lambda fc, v=v, c=c: float(fc.at_vertex(v)[c]),
                    _sample_apply=lambda s, q, pt=pt, c=c: float(s.value(pt[None, :])[0, c]),
                )
            )
    for e, info in enumerate(cell.edges):
        slot = 0
        for m in range(max(k - 1, 0)):
            w = Polynomial.monomial((m,))
            for c in range(3):
                dofs.append(
                    DofFunctional(
                        ("edge", e), slot, "value", f"edge{e}-mom{m}[{c}]",
                        _field_apply=lambda fc, e=e, w=w, c=c, L=info["length"]: L
                        * _int2(fc.edge(e).comps[c] * w),
                        _sample_apply=lambda s, q, info=info, m=m, c=c: _edge_component_sample(
                            s, q, info, m, c
                        ),
                    )
                )
                slot += 1
    for f, info in enumerate(cell.faces):
        slot = 0
        for exp in _exps2(k - 3):
            w = _mono2(exp)
            for c in range(3):
                dofs.append(
                    DofFunctional(
                        ("face", f), slot, "value", f"face{f}-mom{exp}[{c}]",
                        _field_apply=lambda fc, f=f, w=w, c=c, A=info["area"]: 2
                        * A
                        * _int2(fc.face(f).comps[c] * w),
                        _sample_apply=lambda s, q, info=info, exp=exp, c=c: _face_component_sample(
                            s, q, info, exp, c
                        ),
                    )
                )
                slot += 1
        if k <= 2:
            d = info["direction"]
            dofs.append(
                DofFunctional(
                    ("face", f), slot, "value", f"face{f}-normal-flux",
                    _field_apply=lambda fc, f=f, d=d: float(
                        sum(integrate_unit_simplex(fc.face(f).comps[c]) * d[c] for c in range(3))
                    ),
                    _sample_apply=lambda s, q, info=info: _face_normal_sample(s, q, info),
                )
            )
            slot += 1
    det = cell.amap.det
    slot = 0
    cell_dofs = []
    for exp in (monomial_exponents(k - 4, 3) if k >= 4 else []):
        for c in range(3):
            w = VectorField(
                tuple(Polynomial.monomial(exp) if cc == c else Polynomial.zero() for cc in range(3))
            )
            cell_dofs.append(
                DofFunctional(
                    ("cell", 0), slot, "value", f"cell-mom{exp}[{c}]",
                    _field_apply=lambda fc, w=w, det=det: _interior_moment(fc.pw, w, det),
                    _sample_apply=lambda s, q, exp=exp, c=c, cell=cell: _cell_component_sample(
                        s, q, cell, exp, c
                    ),
                )
            )
            slot += 1
    if k >= 2:
        for v_hat in layered_mean_zero_basis(k - 1):
            w = grad(v_hat).matmul(cell.b_invT)
            cell_dofs.append(
                DofFunctional(
                    ("cell", 0), slot, "value", f"cell-layered-grad{slot}",
                    _field_apply=lambda fc, w=w, det=det: _interior_moment(fc.pw, w, det),
                    _sample_apply=lambda s, q, w=w, cell=cell: _cell_weighted_sample(s, q, cell, w),
                )
            )
            slot += 1
    return dofs + cell_dofs


def _edge_component_sample(sample, quad, info, m, c):
    spts, w = quad.segment
    pts = _phys_edge_points(info, spts)
    vals = sample.value(pts)[:, c]
    return info["length"] * float(np.sum(w * vals * spts[:, 0] ** m))


def _face_component_sample(sample, quad, info, exp, c):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    vals = sample.value(pts)[:, c]
    mono = fpts[:, 0] ** exp[0] * fpts[:, 1] ** exp[1]
    return 2 * info["area"] * float(np.sum(w * vals * mono))


def _face_normal_sample(sample, quad, info):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    vals = sample.value(pts) @ info["normal"]
    return 2 * info["area"] * float(np.sum(w * vals))


def _cell_component_sample(sample, quad, cell, exp, c):
    rpts, w = quad.tet
    pts = cell.amap.apply(rpts)
    vals = sample.value(pts)[:, c]
    mono = rpts[:, 0] ** exp[0] * rpts[:, 1] ** exp[1] * rpts[:, 2] ** exp[2]
    return cell.amap.det_f * float(np.sum(w * vals * mono))


def _cell_weighted_sample(sample, quad, cell, weight_vec, use="value"):
    rpts, w = quad.tet
    pts = cell.amap.apply(rpts)
    vals = sample.value(pts) if use == "value" else sample.curl(pts)
    wv = weight_vec.to_float().eval_many(rpts)
    return cell.amap.det_f * float(np.sum(w * np.sum(vals * wv, axis=1)))


@lru_cache(maxsize=None)
def _cross_position_basis(k):
    """Rank-selected basis of { p x xhat : p vector polynomial of degree k-5 }."""
    if k < 5:
        return ()
    xf = VectorField(tuple(Polynomial.variable(i) for i in range(3)))
    gens = [vm.cross(xf) for vm in vector_monomials(k - 5)]
    emb = Embedding(k - 4, vector=True)
    cols = [emb.coords(as_piecewise(g)) for g in gens]
    chosen = select_independent(cols)
    return tuple(gens[i] for i in chosen)


def gradcurl_dofs(cell: CellGeometry, r, k):
    dofs = []
    for v in range(4):
        pt = cell.vertices[v]["point"]
        for c in range(3):
            dofs.append(
                DofFunctional(
                    ("vertex", v), c, "curl", f"curl@v{v}[{c}]",
                    _field_apply=lambda fc, v=v, c=c: float(fc.at_vertex(v)[c]),
                    _sample_apply=lambda s, q, pt=pt, c=c: float(s.curl(pt[None, :])[0, c]),
                )
            )
    for e, info in enumerate(cell.edges):
        slot = 0
        tau = info["tangent"]
        for m in range(r):
            w = Polynomial.monomial((m,))
            dofs.append(
                DofFunctional(
                    ("edge", e), slot, "value", f"edge{e}-tang{m}",
                    _field_apply=lambda fc, e=e, w=w, tau=tau, L=info["length"]: L
                    * sum(tau[c] * _int2(fc.edge(e).comps[c] * w) for c in range(3)),
                    _sample_apply=lambda s, q, info=info, m=m: _edge_tangential_sample(s, q, info, m),
                )
            )
            slot += 1
        for m in range(max(k - 1, 0)):
            w = Polynomial.monomial((m,))
            for c in range(3):
                dofs.append(
                    DofFunctional(
                        ("edge", e), slot, "curl", f"edge{e}-curlmom{m}[{c}]",
                        _field_apply=lambda fc, e=e, w=w, c=c: _int2(fc.edge(e).comps[c] * w),
                        _sample_apply=lambda s, q, info=info, m=m, c=c: _edge_curl_sample(
                            s, q, info, m, c
                        ),
                    )
                )
                slot += 1
    for f, info in enumerate(cell.faces):
        slot = 0
        d = info["direction"]
        exps = _exps2(k - 3)
        for exp in exps:
            if exp == (0, 0):
                continue
            mean = Fraction(
                integrate_unit_simplex(_mono2(exp)) * 2
            )  # mean over the parametric triangle (area 1/2)
            w = _mono2(exp) - Polynomial.constant(mean, 2)
            dofs.append(
                DofFunctional(
                    ("face", f), slot, "curl", f"face{f}-curl-n{exp}",
                    _field_apply=lambda fc, f=f, w=w, d=d: float(
                        sum(integrate_unit_simplex(fc.face(f).comps[c] * w) * d[c] for c in range(3))
                    ),
                    _sample_apply=lambda s, q, info=info, w=w: _face_curl_normal_sample(s, q, info, w),
                )
            )
            slot += 1
        for tname in ("tau1", "tau2"):
            t = info[tname]
            for exp in exps:
                w = _mono2(exp)
                dofs.append(
                    DofFunctional(
                        ("face", f), slot, "curl", f"face{f}-curl-{tname}{exp}",
                        _field_apply=lambda fc, f=f, w=w, t=t: 2
                        * sum(t[c] * _int2(fc.face(f).comps[c] * w) for c in range(3)),
                        _sample_apply=lambda s, q, info=info, w=w, t=t: _face_curl_tangent_sample(
                            s, q, info, w, t
                        ),
                    )
                )
                slot += 1
        # tangential-position moments of the field itself
        anchors = info["phys_anchors_exact"]
        centroid = info["centroid_exact"]
        tang = []
        for c in range(3):
            tang.append(
                Polynomial(
                    {
                        (0, 0): anchors[0][c] - centroid[c],
                        (1, 0): anchors[1][c] - anchors[0][c],
                        (0, 1): anchors[2][c] - anchors[0][c],
                    },
                    2,
                )
            )
        tang = VectorField(tang)
        for exp in _exps2(r - 3):
            w = _mono2(exp)
            dofs.append(
                DofFunctional(
                    ("face", f), slot, "value", f"face{f}-tangpos{exp}",
                    _field_apply=lambda fc, f=f, w=w, tang=tang: 2
                    * _int2(fc.face(f).dot(tang) * w),
                    _sample_apply=lambda s, q, info=info, exp=exp: _face_tangpos_sample(s, q, info, exp),
                )
            )
            slot += 1
    det = cell.amap.det
    slot = 0
    for q_hat in _cross_position_basis(k):
        w = q_hat.matmul(cell.b_invT)
        dofs.append(
            DofFunctional(
                ("cell", 0), slot, "curl", f"cell-curlmom{slot}",
                _field_apply=lambda fc, w=w, det=det: _interior_moment(fc.pw, w, det),
                _sample_apply=lambda s, q, w=w, cell=cell: _cell_weighted_sample(s, q, cell, w, use="curl"),
            )
        )
        slot += 1
    if r >= 4:
        xf = VectorField(tuple(Polynomial.variable(i) for i in range(3)))
        for exp in monomial_exponents(r - 4, 3):
            q_hat = xf * Polynomial.monomial(exp)
            w = q_hat.matmul(cell.amap.matrix)  # (1/det) B q_hat times det from dV
            dofs.append(
                DofFunctional(
                    ("cell", 0), slot, "value", f"cell-mom{exp}",
                    _field_apply=lambda fc, w=w: _interior_moment(fc.pw, w, 1),
                    _sample_apply=lambda s, q, w=w, cell=cell: _cell_weighted_sample(s, q, cell, w)
                    / cell.amap.det_f,
                )
            )
            slot += 1
    return dofs


def _edge_tangential_sample(sample, quad, info, m):
    spts, w = quad.segment
    pts = _phys_edge_points(info, spts)
    vals = sample.value(pts) @ info["tangent"]
    return info["length"] * float(np.sum(w * vals * spts[:, 0] ** m))


def _edge_curl_sample(sample, quad, info, m, c):
    spts, w = quad.segment
    pts = _phys_edge_points(info, spts)
    vals = sample.curl(pts)[:, c]
    return float(np.sum(w * vals * spts[:, 0] ** m))


def _face_curl_normal_sample(sample, quad, info, w2):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    vals = sample.curl(pts) @ info["normal"]
    wv = w2.to_float().eval_many(fpts)
    return 2 * info["area"] * float(np.sum(w * vals * wv))


def _face_curl_tangent_sample(sample, quad, info, w2, t):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    vals = sample.curl(pts) @ t
    wv = w2.to_float().eval_many(fpts)
    return 2 * float(np.sum(w * vals * wv))


def _face_tangpos_sample(sample, quad, info, exp):
    fpts, w = quad.triangle
    pts = _phys_face_points(info, fpts)
    centroid = np.mean(np.stack(info["phys_anchors"]), axis=0)
    tang = pts - centroid[None, :]
    vals = np.sum(sample.value(pts) * tang, axis=1)
    mono = fpts[:, 0] ** exp[0] * fpts[:, 1] ** exp[1]
    return 2 * float(np.sum(w * vals * mono))


def build_dofs(kind, cell, r, k):
    if kind == "lagrange":
        return lagrange_dofs(cell, r)
    if kind == "gradcurl":
        return gradcurl_dofs(cell, r, k)
    if kind == "velocity":
        return velocity_dofs(cell, k)
    if kind == "pressure":
        return pressure_dofs(cell, k)
    raise ValueError(f"unknown space kind {kind!r}")


def build_raw_basis(kind, cell, r, k, select="exact"):
    if kind == "lagrange":
        return lagrange_raw(r)
    if kind == "gradcurl":
        return gradcurl_raw(cell, r, k, select=select)
    if kind == "velocity":
        return velocity_raw(cell, k)[0]
    if kind == "pressure":
        return pressure_raw(k)
    raise ValueError(f"unknown space kind {kind!r}")


def entity_dof_counts(kind, r, k):
    """Per-entity DOF block sizes for a space kind at (r, k)."""
    validate_family(r, k)
    d2 = lambda n: dim_poly(n, 2) if n >= 0 else 0
    d3 = lambda n: dim_poly(n, 3) if n >= 0 else 0
    if kind == "lagrange":
        return {"vertex": 1, "edge": r - 1, "face": d2(r - 3), "cell": d3(r - 4)}
    if kind == "pressure":
        return {"vertex": 0, "edge": 0, "face": 0, "cell": d3(k - 1)}
    if kind == "velocity":
        return {
            "vertex": 3,
            "edge": 3 * (k - 1),
            "face": 3 * d2(k - 3) + (1 if k <= 2 else 0),
            "cell": 3 * d3(k - 4) + (dim_layered(k - 1) if k >= 2 else 0),
        }
    if kind == "gradcurl":
        face_normal = max(d2(k - 3) - 1, 0)
        return {
            "vertex": 3,
            "edge": r + 3 * (k - 1),
            "face": face_normal + 2 * d2(k - 3) + d2(r - 3),
            "cell": len(_cross_position_basis(k)) + d3(r - 4),
        }
    raise ValueError(f"unknown space kind {kind!r}")


def space_dimension(kind, r, k):
    counts = entity_dof_counts(kind, r, k)
    return (
        4 * counts["vertex"] + 6 * counts["edge"] + 4 * counts["face"] + counts["cell"]
    )


# ---------------------------------------------------------------------------
# nodal bases and the local element bundle


@dataclass
class LocalElement:
    kind: str
    r: int
    k: int
    cell: CellGeometry
    basis: list
    dofs: list
    dof_matrix: np.ndarray
    nodal: np.ndarray  # columns: nodal basis in raw-basis coordinates
    condition: float
    curls: list = None  # physical curls of the raw basis (gradcurl only)

    @property
    def dimension(self):
        return len(self.basis)

    def interpolate(self, sample, quad):
        """Nodal coefficients of the canonical interpolant of a field sample."""
        return np.array([d.apply_sample(sample, quad) for d in self.dofs])


def dof_matrix(dofs, basis, cell, curls=None):
    caches = [FieldCache(b, cell) for b in basis]
    curl_caches = None
    m = np.zeros((len(dofs), len(basis)))
    for j in range(len(basis)):
        for i, dof in enumerate(dofs):
            if dof.needs == "curl":
                if curl_caches is None:
                    source = curls if curls is not None else [
                        phys_curl(cell, b) for b in basis
                    ]
                    curl_caches = [FieldCache(cf, cell) for cf in source]
                m[i, j] = dof.apply_field(curl_caches[j])
            else:
                m[i, j] = dof.apply_field(caches[j])
    return m


_element_cache = {}


def local_element(kind, r, k, cell=None, select="exact"):
    """Build (or fetch) the local element bundle for a cell.

    Cells in the same congruence class with the same entity id patterns
    share the construction (translations do not change any of it).
    """
    validate_family(r, k)
    if cell is None:
        cell = reference_cell()
    key = (kind, r, k, select, cell.signature())
    hit = _element_cache.get(key)
    if hit is not None:
        return hit
    basis = build_raw_basis(kind, cell, r, k, select=select)
    dofs = build_dofs(kind, cell, r, k)
    if len(dofs) != len(basis):
        raise ArithmeticError(
            f"{kind}({r},{k}): {len(dofs)} functionals vs {len(basis)} basis fields"
        )
    curls = [phys_curl(cell, b) for b in basis] if kind == "gradcurl" else None
    m = dof_matrix(dofs, basis, cell, curls=curls)
    cond = float(np.linalg.cond(m))
    try:
        nodal = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"{kind}({r},{k}): singular DOF matrix") from exc
    el = LocalElement(kind, r, k, cell, basis, dofs, m, nodal, cond, curls)
    _element_cache[key] = el
    return el


# ---------------------------------------------------------------------------
# structural reports on the reference cell


def _difference_coords(vec, block):
    """Recode (b0, b1, b2, b3) -> (b0, b1-b0, b2-b0, b3-b0); sparse for singles."""
    out = list(vec[:block])
    for piece in range(1, 4):
        base = piece * block
        out.extend(vec[base + j] - vec[j] for j in range(block))
    return out


def _expand_in_basis(basis_fields, images, embedding, what):
    """Coefficients of ``images`` in the span of ``basis_fields`` (exact)."""
    from .polyalg.spaces import solve_exact

    block = embedding.block
    cols = [_difference_coords(embedding.coords(f), block) for f in basis_fields]
    matrix = [[cols[j][i] for j in range(len(cols))] for i in range(embedding.size)]
    rhs = [_difference_coords(embedding.coords(f), block) for f in images]
    # drop rows that are zero in both the matrix and every rhs
    keep = [
        i
        for i in range(embedding.size)
        if any(matrix[i][j] != 0 for j in range(len(cols))) or any(r[i] != 0 for r in rhs)
    ]
    matrix = [matrix[i] for i in keep]
    rhs = [[r[i] for i in keep] for r in rhs]
    sols = solve_exact(matrix, rhs)
    if any(s is None for s in sols):
        raise ArithmeticError(f"{what}: image leaves the target space")
    return [[sols[j][i] for j in range(len(sols))] for i in range(len(cols))]


@lru_cache(maxsize=None)
def local_complex_matrices(r, k):
    """Exact matrices of grad/curl/div between the raw local bases."""
    validate_family(r, k)
    cell = reference_cell()
    lag = build_raw_basis("lagrange", cell, r, k)
    gc = build_raw_basis("gradcurl", cell, r, k)
    vel = build_raw_basis("velocity", cell, r, k)
    pre = build_raw_basis("pressure", cell, r, k)

    deg_gc = max(f.degree for f in gc)
    emb_gc = Embedding(deg_gc, vector=True)
    deg_vel = max(f.degree for f in vel)
    emb_vel = Embedding(max(deg_vel, max(deg_gc - 1, 0)), vector=True)
    emb_pre = Embedding(k - 1, vector=False)

    grad_mat = _expand_in_basis(gc, [phys_grad(cell, p) for p in lag], emb_gc, "grad")
    curl_mat = _expand_in_basis(vel, [phys_curl(cell, u) for u in gc], emb_vel, "curl")
    div_mat = _expand_in_basis(pre, [phys_div(cell, u) for u in vel], emb_pre, "div")
    return grad_mat, curl_mat, div_mat


def _matmul_exact(a, b):
    n, m, p = len(a), len(b), len(b[0])
    out = [[Fraction(0)] * p for _ in range(n)]
    for i in range(n):
        ai = a[i]
        for kk in range(m):
            v = ai[kk]
            if v == 0:
                continue
            bk = b[kk]
            row = out[i]
            for j in range(p):
                if bk[j] != 0:
                    row[j] += v * bk[j]
    return out


def _is_zero_matrix(a):
    return all(v == 0 for row in a for v in row)


def local_exactness_table(r, k):
    """Exact rank table of the local complex (all entries rational ranks)."""
    grad_mat, curl_mat, div_mat = local_complex_matrices(r, k)
    dims = {kind: space_dimension(kind, r, k) for kind in SPACE_KINDS}
    rk_grad = exact_rank(grad_mat)
    rk_curl = exact_rank(curl_mat)
    rk_div = exact_rank(div_mat)
    table = {
        "dims": dims,
        "rank_grad": rk_grad,
        "rank_curl": rk_curl,
        "rank_div": rk_div,
        "nullity_curl": dims["gradcurl"] - rk_curl,
        "nullity_div": dims["velocity"] - rk_div,
        "curl_grad_zero": _is_zero_matrix(_matmul_exact(curl_mat, grad_mat)),
        "div_curl_zero": _is_zero_matrix(_matmul_exact(div_mat, curl_mat)),
    }
    table["exact"] = (
        table["curl_grad_zero"]
        and table["div_curl_zero"]
        and rk_grad == dims["lagrange"] - 1
        and table["nullity_curl"] == rk_grad
        and rk_curl == table["nullity_div"]
        and rk_div == dims["pressure"]
    )
    table["alternating_sum"] = (
        1 - dims["lagrange"] + dims["gradcurl"] - dims["velocity"] + dims["pressure"]
    )
    return table


def poly_inclusion_check(r, k, rng=None, tol=1e-11):
    """Reproduction of vector polynomials of degree min{r-1, k+1} by interpolation."""
    validate_family(r, k)
    from .sampling import FieldSample

    s = min(r - 1, k + 1)
    el = local_element("gradcurl", r, k)
    rng = rng or np.random.default_rng(7)
    bary = rng.random((24, 4)) + 0.05
    bary /= bary.sum(axis=1, keepdims=True)
    pts = bary[:, 1:]
    from .quadrature import QuadratureRule

    quad = QuadratureRule(2 * max(r, k + 1) + 4)
    worst = 0.0
    basis_vals = np.stack([_eval_pw_vector(b, pts) for b in el.basis])
    for mono in vector_monomials(s):
        sample = FieldSample.from_vector_polynomial(mono)
        coeffs = el.interpolate(sample, quad)
        raw = el.nodal @ coeffs
        approx = np.einsum("j,jqc->qc", raw, basis_vals)
        exact = sample.value(pts)
        scale = max(1.0, float(np.abs(exact).max()))
        worst = max(worst, float(np.abs(approx - exact).max()) / scale)
    return {"s": s, "max_rel_error": worst, "ok": worst <= tol}


@lru_cache(maxsize=1)
def _subtet_locators():
    """Float inverse maps of the four subtets for point location."""
    from .polyalg.split import SUBTET_VERTICES

    locs = []
    for i in range(4):
        verts = np.array([[float(c) for c in v] for v in SUBTET_VERTICES[i]])
        a = (verts[1:] - verts[0]).T
        locs.append((np.linalg.inv(a), verts[0]))
    return locs


def locate_subtet_float(points):
    """Subtet index per point (most-interior wins; boundary ties are fine)."""
    points = np.asarray(points, float)
    best = np.full(len(points), -1)
    best_q = np.full(len(points), -np.inf)
    for i, (inv, v0) in enumerate(_subtet_locators()):
        local = (points - v0) @ inv.T
        lam0 = 1.0 - local.sum(axis=1)
        quality = np.minimum(local.min(axis=1), lam0)
        take = quality > best_q
        best[take] = i
        best_q[take] = quality[take]
    return best


def _eval_pw_vector(pw, pts):
    """Float evaluation of a piecewise vector field at reference points."""
    pts = np.asarray(pts, float)
    fl = pw.to_float()
    if pw.is_single():
        return fl.pieces[0].eval_many(pts)
    out = np.zeros((len(pts), 3))
    which = locate_subtet_float(pts)
    for i in range(4):
        mask = which == i
        if mask.any():
            out[mask] = fl.pieces[i].eval_many(pts[mask])
    return out


def element_info(r, k):
    """Dimensions, per-entity DOF counts, and the exactness rank table."""
    validate_family(r, k)
    info = {
        "r": r,
        "k": k,
        "dimensions": {kind: space_dimension(kind, r, k) for kind in SPACE_KINDS},
        "entity_dofs": {kind: entity_dof_counts(kind, r, k) for kind in SPACE_KINDS},
        "exactness": local_exactness_table(r, k),
    }
    return info
