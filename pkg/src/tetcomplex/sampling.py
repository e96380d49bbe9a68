"""Analytic field samples: value/curl/grad-curl/divergence evaluators.

A FieldSample bundles vectorized point evaluators for a smooth field and
the derived quantities interpolation DOFs and error norms need.  Exact
polynomial fields wrap into samples with analytically exact derivatives;
consistency of any sample can be spot-checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyalg.poly import Polynomial, VectorField, curl, div, grad, jacobian


@dataclass
class FieldSample:
    """Evaluable analytic field; ``value`` maps (m,3) points to (m,3) or (m,)."""

    value: callable
    curl: callable = None
    grad_curl: callable = None
    div: callable = None
    gradient: callable = None  # for scalar samples
    scalar: bool = False

    @classmethod
    def from_vector_polynomial(cls, u: VectorField):
        uf = u.to_float()
        cu = curl(u).to_float()
        dv = div(u).to_float()
        jc = [[e.to_float() for e in row] for row in jacobian(curl(u))]

        def value(pts):
            return uf.eval_many(np.asarray(pts, float))

        def curl_eval(pts):
            return cu.eval_many(np.asarray(pts, float))

        def grad_curl(pts):
            pts = np.asarray(pts, float)
            out = np.zeros((len(pts), 3, 3))
            for i in range(3):
                for j in range(3):
                    out[:, i, j] = jc[i][j].eval_many(pts)
            return out

        def div_eval(pts):
            return dv.eval_many(np.asarray(pts, float))

        return cls(value, curl_eval, grad_curl, div_eval)

    @classmethod
    def from_scalar_polynomial(cls, p: Polynomial):
        pf = p.to_float()
        gf = grad(p).to_float()

        def value(pts):
            return pf.eval_many(np.asarray(pts, float))

        def gradient(pts):
            return gf.eval_many(np.asarray(pts, float))

        return cls(value, gradient=gradient, scalar=True)

    def gradient_sample(self):
        """The gradient of a scalar sample as a (curl-free) vector sample."""
        assert self.scalar and self.gradient is not None

        def zero3(pts):
            return np.zeros((len(np.asarray(pts)), 3))

        def zero33(pts):
            return np.zeros((len(np.asarray(pts)), 3, 3))

        return FieldSample(self.gradient, zero3, zero33, None)

    def fd_check(self, pts, step=1e-6, tol=1e-4):
        """Relative agreement of curl/div/grad-curl with central differences."""
        pts = np.asarray(pts, float)
        report = {}
        eye = np.eye(3)

        def dpart(f, j):
            return (f(pts + step * eye[j]) - f(pts - step * eye[j])) / (2 * step)

        if self.curl is not None:
            d = [dpart(self.value, j) for j in range(3)]
            fd_curl = np.stack(
                [d[1][:, 2] - d[2][:, 1], d[2][:, 0] - d[0][:, 2], d[0][:, 1] - d[1][:, 0]],
                axis=1,
            )
            ref = self.curl(pts)
            scale = max(1.0, np.abs(ref).max())
            report["curl"] = float(np.abs(fd_curl - ref).max() / scale)
        if self.div is not None:
            d = [dpart(self.value, j) for j in range(3)]
            fd_div = d[0][:, 0] + d[1][:, 1] + d[2][:, 2]
            ref = self.div(pts)
            scale = max(1.0, np.abs(ref).max())
            report["div"] = float(np.abs(fd_div - ref).max() / scale)
        if self.grad_curl is not None and self.curl is not None:
            d = [dpart(self.curl, j) for j in range(3)]
            fd_gc = np.stack(d, axis=2)
            ref = self.grad_curl(pts)
            scale = max(1.0, np.abs(ref).max())
            report["grad_curl"] = float(np.abs(fd_gc - ref).max() / scale)
        report["ok"] = all(v <= tol for k, v in report.items() if k != "ok")
        return report
