"""Conjugate (dual) fields of p-harmonic solutions and their diagnostics."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import (EquivariantField, Homomorphism, PLOneForm, SurfaceMesh, differential,
                   form_norm, hodge_star, period_integral, wedge)

__all__ = ["DualField", "conjugate_exponent", "dual_form", "dual_periods", "primitive",
           "pairing", "duality_map", "concentration_diagnostics", "form_mass", "mass_bound",
           "adapted_coordinates", "region_masses_csv"]


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


@dataclass
class DualField:
    v: EquivariantField
    residual: float
    q: float
    mass: float          # integral of |dv| for the primitive
    form_mass: float     # integral of |V_q| for the form it was built from

    @property
    def alpha(self) -> Homomorphism:
        return self.v.rho

    @property
    def p(self) -> float:
        return self.q / (self.q - 1.0)


def duality_map(mesh: SurfaceMesh, form: PLOneForm, p: float) -> PLOneForm:
    """omega -> |omega|^(p-2) * star(omega), triangle by triangle."""
    n = form_norm(mesh, form)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(n > 0, n ** (p - 2.0), 0.0)
    return PLOneForm(scale[:, None] * hodge_star(mesh, form).covectors)


def dual_form(mesh: SurfaceMesh, u_p: EquivariantField, p: float, k_p: float) -> PLOneForm:
    """V_q = |U_p|^(p-2) * U_p with U_p = k_p du_p."""
    U = k_p * differential(mesh, u_p)
    return duality_map(mesh, U, p)


def dual_periods(mesh: SurfaceMesh, V_q: PLOneForm) -> Homomorphism:
    return Homomorphism([period_integral(mesh, V_q, loop) for loop in mesh.homology_basis])


def pairing(mesh: SurfaceMesh, a: PLOneForm, b: PLOneForm) -> float:
    """Integral of a ^ b over the surface."""
    return float(np.sum(wedge(mesh, a, b) * mesh.areas))


def form_mass(mesh: SurfaceMesh, form: PLOneForm, mask=None) -> float:
    n = form_norm(mesh, form) * mesh.areas
    return float(np.sum(n if mask is None else n[np.asarray(mask, dtype=bool)]))


def _stiffness(mesh):
    D, Gi, A = mesh.grad_ops, mesh.inv_metric, mesh.areas
    K = A[:, None, None] * np.einsum("fij,fik,fkl->fjl", D, Gi, D)
    tri = mesh.triangles
    n = len(mesh.vertices)
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.coo_matrix((K.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def primitive(mesh: SurfaceMesh, V_q: PLOneForm, alpha: Homomorphism, p: float | None = None) -> DualField:
    """Least-squares equivariant primitive of V_q with periods alpha.

    Minimizes sum_T |dv_T - V_T|^2 area_T, then fixes the additive constant
    so the integral of v over the cut fundamental domain vanishes.
    """
    alpha = alpha if isinstance(alpha, Homomorphism) else Homomorphism(alpha)
    D, Gi, A = mesh.grad_ops, mesh.inv_metric, mesh.areas
    jump = mesh.shifts @ alpha.periods                                 # (F, 3)
    target = V_q.covectors - np.einsum("fij,fj->fi", D, jump)
    rhs_c = A[:, None] * np.einsum("fij,fik,fk->fj", D, Gi, target)
    b = np.bincount(mesh.triangles.ravel(), weights=rhs_c.ravel(), minlength=len(mesh.vertices))
    K = _stiffness(mesh)
    x = np.zeros(len(mesh.vertices))
    x[1:] = splu(K[1:, 1:].tocsc()).solve(b[1:])
    lifted = x[mesh.triangles] + jump
    x -= float(np.sum(A * lifted.mean(axis=1))) / mesh.total_area
    v = EquivariantField(x, alpha)
    dv = differential(mesh, v)
    res = float(np.sqrt(np.sum(A * form_norm(mesh, dv - V_q) ** 2)))
    q = conjugate_exponent(p) if p is not None else float("nan")
    return DualField(v=v, residual=res, q=q, mass=form_mass(mesh, dv), form_mass=form_mass(mesh, V_q))


def mass_bound(mesh: SurfaceMesh, p: float, k_p: float) -> float:
    """Hoelder bound area^(1/p) * k_p^((p-1)/p) on the mass of V_q."""
    return mesh.total_area ** (1.0 / p) * k_p ** ((p - 1.0) / p)


def adapted_coordinates(mesh: SurfaceMesh, u_p: EquivariantField, V_q: PLOneForm, p: float, k_p: float):
    """Per-triangle (tau1, tau2 measured, tau2 predicted) where du_p does not vanish."""
    du = form_norm(mesh, differential(mesh, u_p))
    dv = form_norm(mesh, V_q)
    ok = du > 0
    tau1 = 1.0 / du[ok]
    tau2 = 1.0 / dv[ok]
    pred = (tau1 / k_p) ** (p - 1.0)
    return tau1, tau2, pred


def concentration_diagnostics(mesh: SurfaceMesh, u_p: EquivariantField, U_p: PLOneForm,
                              V_q: PLOneForm, u_ref: EquivariantField, p: float,
                              ref_scale: float = 1.0, dv: PLOneForm | None = None,
                              regions: dict | None = None) -> dict:
    """Concentration measures of the dual form relative to a limit proxy.

    ``G2``: integral of |U_p|^(p-2) |U_p - U|^2 with U = ref_scale * du_ref.
    ``ORTH``: integral of |*du_ref ^ dv|.  ``regions`` maps names to triangle
    masks; each gets the mass of |V_q| inside it and its fraction of the total.
    """
    A = mesh.areas
    du_ref = differential(mesh, u_ref)
    U = ref_scale * du_ref
    nU = form_norm(mesh, U_p)
    G2 = float(np.sum(A * nU ** (p - 2.0) * form_norm(mesh, U_p - U) ** 2))
    dv = V_q if dv is None else dv
    ORTH = float(np.sum(A * np.abs(wedge(mesh, hodge_star(mesh, du_ref), dv))))
    total = form_mass(mesh, V_q)
    out = {"G2": G2, "ORTH": ORTH, "total_mass": total, "regions": {}}
    for name, mask in (regions or {}).items():
        m = form_mass(mesh, V_q, mask)
        out["regions"][name] = {"mass": m, "fraction": m / total if total > 0 else float("nan")}
    return out


def region_masses_csv(diag: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "mass", "fraction"])
    for name, rec in diag["regions"].items():
        w.writerow([name, repr(rec["mass"]), repr(rec["fraction"])])
    return buf.getvalue()


def dual_report_json(dual: DualField, pairing_value: float, diagnostics: dict | None = None) -> str:
    doc = {"q": dual.q, "alpha": dual.alpha.periods.tolist(), "residual": dual.residual,
           "mass": dual.mass, "form_mass": dual.form_mass, "pairing": pairing_value,
           "diagnostics": diagnostics or {}, "v": dual.v.values.tolist()}
    return json.dumps(doc, sort_keys=True)
