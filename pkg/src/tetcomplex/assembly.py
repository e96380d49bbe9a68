"""Global spaces, assembled operators, interpolation, and error norms.

Global DOFs are blocked by entity (vertices, edges, faces, cells); every
cell incident to an entity addresses the identical functional, so the
local-to-global map carries indices only.  Cells in one congruence class
share the local element construction and all local matrices; only
translations (and hence physical quadrature points) differ per cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .elements import (
    CellGeometry,
    build_dofs,
    entity_dof_counts,
    local_element,
    phys_curl,
    phys_div,
    phys_grad,
    validate_family,
)
from .polyalg.poly import jacobian
from .quadrature import alfeld_composite


def default_quadrature_degree(r, k, basis_degree=None):
    base = 2 * max(r, k + 1) + 2
    if basis_degree is not None:
        base = max(base, 2 * basis_degree)
    return base


class GlobalSpace:
    """Entity-blocked global numbering of one space kind on a mesh."""

    def __init__(self, mesh, kind, r, k, select="exact"):
        validate_family(r, k)
        self.mesh = mesh
        self.kind = kind
        self.r = r
        self.k = k
        counts = entity_dof_counts(kind, r, k)
        self.counts = counts
        nv, ne, nf, nc = mesh.n_vertices, mesh.n_edges, mesh.n_faces, mesh.n_cells
        self.vertex_base = 0
        self.edge_base = nv * counts["vertex"]
        self.face_base = self.edge_base + ne * counts["edge"]
        self.cell_base = self.face_base + nf * counts["face"]
        self.dim = self.cell_base + nc * counts["cell"]

        self.cells_geom = [CellGeometry(mesh, ci) for ci in range(mesh.n_cells)]
        self.elements = [
            local_element(kind, r, k, geom, select=select) for geom in self.cells_geom
        ]
        self.local_to_global = [
            self._cell_map(ci) for ci in range(mesh.n_cells)
        ]
        self.boundary_mask = self._boundary_mask()
        self.basis_degree = max(
            max(b.degree for b in el.basis) for el in self.elements
        )

    def _global_index(self, geom, entity, slot):
        kind, local = entity
        c = self.counts
        if kind == "vertex":
            return self.vertex_base + geom.ref_to_global[local] * c["vertex"] + slot
        if kind == "edge":
            return self.edge_base + geom.edges[local]["global"] * c["edge"] + slot
        if kind == "face":
            return self.face_base + geom.faces[local]["global"] * c["face"] + slot
        return self.cell_base + geom.cell_id * c["cell"] + slot

    def _cell_map(self, ci):
        geom = self.cells_geom[ci]
        el = self.elements[ci]
        return np.array(
            [self._global_index(geom, d.entity, d.slot) for d in el.dofs], dtype=np.int64
        )

    def _boundary_mask(self):
        mask = np.zeros(self.dim, dtype=bool)
        c = self.counts
        for v in range(self.mesh.n_vertices):
            if self.mesh.vertex_boundary[v] and c["vertex"]:
                mask[self.vertex_base + v * c["vertex"]:self.vertex_base + (v + 1) * c["vertex"]] = True
        for ei, e in enumerate(self.mesh.edges):
            if e.boundary and c["edge"]:
                mask[self.edge_base + ei * c["edge"]:self.edge_base + (ei + 1) * c["edge"]] = True
        for fi, f in enumerate(self.mesh.faces):
            if f.boundary and c["face"]:
                mask[self.face_base + fi * c["face"]:self.face_base + (fi + 1) * c["face"]] = True
        return mask

    @property
    def interior_dim(self):
        return int((~self.boundary_mask).sum())

    # -- per-congruence-class tables -------------------------------------

    def class_partition(self):
        """Cell ids grouped by congruence class signature."""
        groups = {}
        for ci, geom in enumerate(self.cells_geom):
            groups.setdefault(geom.signature(), []).append(ci)
        return list(groups.values())

    def interpolate(self, sample, quad):
        """Global coefficient vector of the canonical interpolant."""
        out = np.zeros(self.dim)
        for ci in range(self.mesh.n_cells):
            geom = self.cells_geom[ci]
            dofs = build_dofs(self.kind, geom, self.r, self.k)
            gmap = self.local_to_global[ci]
            for loc, dof in enumerate(dofs):
                out[gmap[loc]] = dof.apply_sample(sample, quad)
        return out


@dataclass
class SparseOperator:
    """CSR matrix with provenance and a symmetry flag."""

    matrix: sp.csr_matrix
    row_space: GlobalSpace
    col_space: GlobalSpace
    symmetric: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    def check_symmetry(self, tol=1e-13):
        d = self.matrix - self.matrix.T
        scale = max(1.0, abs(self.matrix).max())
        return abs(d).max() <= tol * scale

    def export_text(self, path):
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17e}\n")


def export_vector_text(vec, path):
    with open(path, "w") as fh:
        for v in np.asarray(vec).ravel():
            fh.write(f"{v:.17e}\n")


# ---------------------------------------------------------------------------
# per-class evaluation tables


class ClassTables:
    """Float tables of one congruence class at split-rule points."""

    def __init__(self, space, cell_id, degree):
        el = space.elements[cell_id]
        geom = space.cells_geom[cell_id]
        pts, wts = alfeld_composite(degree)
        self.ref_points = pts
        self.weights = wts
        self.det = geom.amap.det_f
        nq = len(wts)
        nb = el.dimension
        scalar = space.kind in ("lagrange", "pressure")
        base = len(pts) // 4

        def blocks(pw):
            """Evaluate one piecewise field on the subtet-blocked points."""
            fl = pw.to_float()
            out = np.empty(nq) if scalar else np.empty((nq, 3))
            for i in range(4):
                sl = slice(i * base, (i + 1) * base)
                out[sl] = fl.pieces[i].eval_many(pts[sl])
            return out

        raw_vals = np.stack([blocks(b) for b in el.basis])
        if scalar:
            self.values = np.einsum("jq,jm->mq", raw_vals, el.nodal)
        else:
            self.values = np.einsum("jqc,jm->mqc", raw_vals, el.nodal)
        self.curl = None
        self.grad_curl = None
        self.div = None
        self.grad = None
        if space.kind == "gradcurl":
            curls = el.curls or [phys_curl(geom, b) for b in el.basis]
            raw_curl = np.stack([blocks(c) for c in curls])
            self.curl = np.einsum("jqc,jm->mqc", raw_curl, el.nodal)
            binv = geom.amap.inverse_f
            raw_gc = np.empty((nb, nq, 3, 3))
            for j, c in enumerate(curls):
                fl = c.to_float()
                for piece_i in range(4):
                    sl = slice(piece_i * base, (piece_i + 1) * base)
                    jac = jacobian(fl.pieces[piece_i])
                    for a in range(3):
                        for b in range(3):
                            raw_gc[j, sl, a, b] = jac[a][b].eval_many(pts[sl])
            raw_gc = raw_gc @ binv  # physical derivative: Jhat . B^{-1}
            self.grad_curl = np.einsum("jqab,jm->mqab", raw_gc, el.nodal)
        if space.kind == "velocity":
            divs = [phys_div(geom, b) for b in el.basis]
            raw_div = np.stack(
                [
                    np.concatenate(
                        [
                            d.to_float().pieces[i].eval_many(pts[i * base:(i + 1) * base])
                            for i in range(4)
                        ]
                    )
                    for d in divs
                ]
            )
            self.div = np.einsum("jq,jm->mq", raw_div, el.nodal)
            binv = geom.amap.inverse_f
            raw_grad = np.empty((nb, nq, 3, 3))
            for j, b in enumerate(el.basis):
                fl = b.to_float()
                for piece_i in range(4):
                    sl = slice(piece_i * base, (piece_i + 1) * base)
                    jac = jacobian(fl.pieces[piece_i])
                    for a in range(3):
                        for bb in range(3):
                            raw_grad[j, sl, a, bb] = jac[a][bb].eval_many(pts[sl])
            raw_grad = raw_grad @ binv
            self.grad = np.einsum("jqab,jm->mqab", raw_grad, el.nodal)
        if space.kind == "lagrange":
            raw_g = np.empty((nb, nq, 3))
            for j, b in enumerate(el.basis):
                fl = b.to_float()
                for piece_i in range(4):
                    sl = slice(piece_i * base, (piece_i + 1) * base)
                    g = [fl.pieces[piece_i].derivative(d) for d in range(3)]
                    for d in range(3):
                        raw_g[j, sl, d] = g[d].eval_many(pts[sl])
            raw_g = raw_g @ geom.amap.inverse_f  # physical gradient rows
            self.grad = np.einsum("jqc,jm->mqc", raw_g, el.nodal)


def _class_tables(space, degree):
    tables = {}
    partition = space.class_partition()
    for group in partition:
        tables[id(group)] = (group, ClassTables(space, group[0], degree))
    return [tables[id(g)] for g in partition]


# ---------------------------------------------------------------------------
# form assembly


def _required_degree(form, space, other=None):
    d = space.basis_degree
    if form == "mass":
        return 2 * d
    if form == "gradcurl_stiffness":
        return 2 * d
    if form == "h1":
        return 2 * d
    if form == "div_pressure":
        return d + (other.basis_degree if other else 0)
    raise ValueError(f"unknown form {form!r}")


def assemble(form, space, quad_degree=None, pressure_space=None):
    """Assemble a bilinear form into a SparseOperator.

    Forms: ``mass`` (any space), ``gradcurl_stiffness`` (the grad-curl
    energy (grad curl u, grad curl v) + (u, v)), ``h1`` (vector gradient
    Gram), ``div_pressure`` ((div u, q) coupling; needs ``pressure_space``).
    """
    needed = _required_degree(form, space, pressure_space)
    if quad_degree is None:
        quad_degree = max(
            needed, default_quadrature_degree(space.r, space.k, space.basis_degree)
        )
    if quad_degree < needed:
        raise ValueError(
            f"quadrature degree {quad_degree} below the exactness requirement {needed}"
        )
    rows, cols, vals = [], [], []
    if form == "div_pressure":
        p_tables = {}
        for group, tab in _class_tables(pressure_space, quad_degree):
            for ci in group:
                p_tables[ci] = tab
    for group, tab in _class_tables(space, quad_degree):
        w = tab.weights
        if form == "mass":
            if space.kind in ("lagrange", "pressure"):
                local = np.einsum("mq,nq,q->mn", tab.values, tab.values, w) * tab.det
            else:
                local = np.einsum("mqc,nqc,q->mn", tab.values, tab.values, w) * tab.det
        elif form == "gradcurl_stiffness":
            local = (
                np.einsum("mqab,nqab,q->mn", tab.grad_curl, tab.grad_curl, w)
                + np.einsum("mqc,nqc,q->mn", tab.values, tab.values, w)
            ) * tab.det
        elif form == "h1":
            local = np.einsum("mqab,nqab,q->mn", tab.grad, tab.grad, w) * tab.det
        elif form == "div_pressure":
            ptab = p_tables[group[0]]
            local = np.einsum("mq,nq,q->mn", ptab.values, tab.div, w) * tab.det
        local = np.asarray(local)
        for ci in group:
            g_row = (
                pressure_space.local_to_global[ci]
                if form == "div_pressure"
                else space.local_to_global[ci]
            )
            g_col = space.local_to_global[ci]
            rows.append(np.repeat(g_row, len(g_col)))
            cols.append(np.tile(g_col, len(g_row)))
            vals.append(local.ravel())
    shape = (
        (pressure_space.dim, space.dim) if form == "div_pressure" else (space.dim, space.dim)
    )
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    ).tocsr()
    sym = form in ("mass", "gradcurl_stiffness", "h1")
    op = SparseOperator(matrix, pressure_space if form == "div_pressure" else space, space, sym)
    if sym and not op.check_symmetry():
        raise ArithmeticError(f"assembled {form} operator lost symmetry")
    return op


def assemble_load(space, sample, quad_degree):
    """Load vector (f, v) over the nodal basis of ``space``."""
    out = np.zeros(space.dim)
    for group, tab in _class_tables(space, quad_degree):
        w = tab.weights
        for ci in group:
            geom = space.cells_geom[ci]
            pts = geom.amap.apply(tab.ref_points)
            fv = sample.value(pts)
            if space.kind in ("lagrange", "pressure"):
                local = np.einsum("q,mq,q->m", fv, tab.values, w) * tab.det
            else:
                local = np.einsum("qc,mqc,q->m", fv, tab.values, w) * tab.det
            np.add.at(out, space.local_to_global[ci], local)
    return out


# ---------------------------------------------------------------------------
# discrete differential operators


def discrete_d(which, source, target, check_consistency=False, tol=1e-9):
    """Matrix of grad/curl/div from source-space coefficients to target DOFs.

    Entry (i, j) applies target DOF i to the derivative of the j-th source
    nodal basis function; conformity makes the per-cell values of shared
    DOFs agree, which ``check_consistency`` verifies.
    """
    ops = {"grad": phys_grad, "curl": phys_curl, "div": phys_div}
    op = ops[which]
    entries = {}
    class_cache = {}
    for ci in range(source.mesh.n_cells):
        geom_s = source.cells_geom[ci]
        sig = geom_s.signature()
        if sig not in class_cache:
            el_s = source.elements[ci]
            el_t = target.elements[ci]
            derived = [op(geom_s, b) for b in el_s.basis]
            from .elements import dof_matrix

            raw = dof_matrix(el_t.dofs, derived, geom_s)
            class_cache[sig] = raw @ el_s.nodal
        local = class_cache[sig]
        g_row = target.local_to_global[ci]
        g_col = source.local_to_global[ci]
        for li in range(local.shape[0]):
            gi = g_row[li]
            for lj in range(local.shape[1]):
                v = local[li, lj]
                if v == 0.0:
                    continue
                key = (gi, g_col[lj])
                if check_consistency and key in entries:
                    if abs(entries[key] - v) > tol * max(1.0, abs(v)):
                        raise ArithmeticError(
                            f"inconsistent shared DOF value for {which} at {key}"
                        )
                entries[key] = v
    if entries:
        keys = np.array(list(entries.keys()), dtype=np.int64)
        data = np.fromiter(entries.values(), dtype=float, count=len(entries))
        matrix = sp.coo_matrix(
            (data, (keys[:, 0], keys[:, 1])), shape=(target.dim, source.dim)
        ).tocsr()
    else:
        matrix = sp.csr_matrix((target.dim, source.dim))
    return SparseOperator(matrix, target, source)


# ---------------------------------------------------------------------------
# boundary restriction


def restrict_operator(op: SparseOperator, row_mask=None, col_mask=None):
    """Drop masked rows/columns (True in the mask = boundary = removed)."""
    m = op.matrix
    if row_mask is not None:
        m = m[~row_mask, :]
    if col_mask is not None:
        m = m[:, ~col_mask]
    return m.tocsr()


def restrict_vector(vec, mask):
    return np.asarray(vec)[~mask]


def extend_vector(vec, mask):
    out = np.zeros(len(mask))
    out[~mask] = vec
    return out


# ---------------------------------------------------------------------------
# error norms


def error_norms(space, coeffs, exact, quad_degree=None):
    """(L2, curl-seminorm, grad-curl-seminorm) of exact - represented field."""
    if quad_degree is None:
        quad_degree = default_quadrature_degree(space.r, space.k, space.basis_degree)
    acc = np.zeros(3)
    coeffs = np.asarray(coeffs)
    for group, tab in _class_tables(space, quad_degree):
        w = tab.weights
        cells = np.array(group)
        local = coeffs[np.stack([space.local_to_global[ci] for ci in cells])]
        uh = np.einsum("cl,lqk->cqk", local, tab.values)
        ch = np.einsum("cl,lqab->cqab", local, tab.grad_curl) if tab.grad_curl is not None else None
        curlh = np.einsum("cl,lqk->cqk", local, tab.curl) if tab.curl is not None else None
        pts = np.stack([space.cells_geom[ci].amap.apply(tab.ref_points) for ci in cells])
        flat = pts.reshape(-1, 3)
        ue = exact.value(flat).reshape(uh.shape)
        acc[0] += tab.det * float(np.einsum("cqk,q->", (uh - ue) ** 2, w))
        if curlh is not None and exact.curl is not None:
            ce = exact.curl(flat).reshape(curlh.shape)
            acc[1] += tab.det * float(np.einsum("cqk,q->", (curlh - ce) ** 2, w))
        if ch is not None and exact.grad_curl is not None:
            ge = exact.grad_curl(flat).reshape(ch.shape)
            acc[2] += tab.det * float(np.einsum("cqab,q->", (ch - ge) ** 2, w))
    return tuple(np.sqrt(np.maximum(acc, 0.0)))


def field_norms(space, coeffs, quad_degree=None):
    """(L2, curl, grad-curl) norms of a represented field itself."""

    class _Zero:
        value = staticmethod(lambda pts: np.zeros((len(pts), 3)))
        curl = staticmethod(lambda pts: np.zeros((len(pts), 3)))
        grad_curl = staticmethod(lambda pts: np.zeros((len(pts), 3, 3)))

    return error_norms(space, coeffs, _Zero, quad_degree)


def divergence_norm(space, coeffs, quad_degree=None):
    """L2 norm of the divergence of a represented velocity field."""
    assert space.kind == "velocity"
    if quad_degree is None:
        quad_degree = default_quadrature_degree(space.r, space.k, space.basis_degree)
    total = 0.0
    coeffs = np.asarray(coeffs)
    for group, tab in _class_tables(space, quad_degree):
        w = tab.weights
        cells = np.array(group)
        local = coeffs[np.stack([space.local_to_global[ci] for ci in cells])]
        dh = np.einsum("cl,lq->cq", local, tab.div)
        total += tab.det * float(np.einsum("cq,q->", dh**2, w))
    return float(np.sqrt(max(total, 0.0)))
