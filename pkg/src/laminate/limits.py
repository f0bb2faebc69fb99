"""Limit objects of the p -> infinity problem: L, K, the stretch set and least-gradient checks."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import (EquivariantField, Homomorphism, PLOneForm, SurfaceMesh, differential,
                   form_norm, triangle_components, unwrap_offsets)

__all__ = ["LEstimate", "KResult", "StretchSet", "LimitReport", "estimate_L", "compute_K",
           "annulus_K", "torus_L_oracle", "stretch_set", "stretch_sweep", "least_gradient_test",
           "random_perturbation", "limit_report", "convergence_csv", "limit_report_json"]


@dataclass
class LEstimate:
    L_hat: float
    from_max: float
    from_lp_mean: float
    from_inv_k: float
    spread: float
    monotone: bool
    converged: bool
    note: str = ""


def estimate_L(reports, rel_tol: float = 1e-3) -> LEstimate:
    """Estimate L from the per-p solve reports.

    The primary estimate is max|du_p| at the largest p; the L^p mean and
    1/k_p give two cross-checks.  ``monotone`` records whether the max trace
    is non-increasing (up to ``rel_tol``) over the last three entries.
    """
    reports = sorted(reports, key=lambda r: r.p)
    if len(reports) < 2:
        raise ValueError("estimate_L needs at least two reports")
    last = reports[-1]
    est = (last.max_du, last.lp_mean, 1.0 / last.k_p if last.k_p > 0 else float("nan"))
    L_hat = est[0]
    spread = (max(est) - min(est)) / L_hat if L_hat > 0 else float("nan")
    tail = [r.max_du for r in reports[-3:]]
    monotone = all(b <= a * (1 + rel_tol) for a, b in zip(tail, tail[1:]))
    converged = monotone and all(r.converged for r in reports)
    note = "" if monotone else "max|du_p| trace not decreasing over the last three exponents"
    return LEstimate(L_hat=float(L_hat), from_max=float(est[0]), from_lp_mean=float(est[1]),
                     from_inv_k=float(est[2]), spread=float(spread), monotone=monotone,
                     converged=converged, note=note)


@dataclass
class KResult:
    K: float
    argmax: tuple
    search_radius: int


def compute_K(lattice_basis, rho, search_radius: int = 50) -> KResult:
    """Brute-force sup of |rho(m,n)| / |m e1 + n e2| over primitive classes."""
    E = np.asarray(lattice_basis, dtype=float)
    rho = rho.periods if isinstance(rho, Homomorphism) else np.asarray(rho, dtype=float)
    if E.shape != (2, 2) or rho.shape != (2,):
        raise ValueError("compute_K needs a 2x2 lattice basis and two periods")
    R = int(search_radius)
    if R < 1:
        raise ValueError("search_radius must be >= 1")
    if not np.any(rho):
        return KResult(0.0, (0, 0), R)
    r = np.arange(-R, R + 1)
    m, n = (a.ravel() for a in np.meshgrid(r, r, indexing="ij"))
    keep = np.gcd(m, n) == 1
    m, n = m[keep], n[keep]
    lengths = np.hypot(m * E[0, 0] + n * E[1, 0], m * E[0, 1] + n * E[1, 1])
    ratio = np.abs(m * rho[0] + n * rho[1]) / lengths
    i = int(np.argmax(ratio))
    # report the representative with a positive first nonzero entry
    cls = (int(m[i]), int(n[i]))
    if cls[0] < 0 or (cls[0] == 0 and cls[1] < 0):
        cls = (-cls[0], -cls[1])
    return KResult(float(ratio[i]), cls, R)


def annulus_K(rho, r0: float) -> float:
    """The inner circle is the shortest loop in the generator class."""
    rho = rho.periods if isinstance(rho, Homomorphism) else np.atleast_1d(rho)
    return float(abs(rho[0]) / (2 * math.pi * r0))


def torus_L_oracle(lattice_basis, rho) -> float:
    """L for a flat torus: the norm of the unique linear map with the given periods."""
    E = np.asarray(lattice_basis, dtype=float)
    rho = rho.periods if isinstance(rho, Homomorphism) else np.asarray(rho, dtype=float)
    return float(np.linalg.norm(np.linalg.solve(E, rho)))


@dataclass
class StretchSet:
    eps: float
    triangles: np.ndarray
    labels: np.ndarray
    components: list = field(default_factory=list)
    max_ratio: float = 0.0

    @property
    def empty(self) -> bool:
        return len(self.triangles) == 0

    def to_dict(self) -> dict:
        return {"eps": self.eps, "n_triangles": int(len(self.triangles)),
                "max_ratio": self.max_ratio, "components": self.components}


def _straightness(mesh, members):
    off = unwrap_offsets(mesh, members)
    idx = np.array(sorted(off))
    pts = mesh.barycenters[idx] + np.array([off[t] for t in idx]) @ mesh.deck
    c = pts.mean(axis=0)
    X = pts - c
    if len(idx) < 2:
        return {"direction": [1.0, 0.0], "max_deviation": 0.0, "max_deviation_h": 0.0}
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    d = vt[0]
    dev = float(np.abs(X @ np.array([-d[1], d[0]])).max())
    return {"direction": d.tolist(), "max_deviation": dev, "max_deviation_h": dev / mesh.mesh_size}


def stretch_set(mesh: SurfaceMesh, u_final: EquivariantField, L_hat: float, eps: float = 0.1) -> StretchSet:
    """Triangles where |du| >= (1 - eps) L_hat, with components and straightness scores."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    du = form_norm(mesh, differential(mesh, u_final))
    ratio = du / L_hat
    mask = ratio >= 1 - eps
    tris = np.flatnonzero(mask)
    labels = triangle_components(mesh, mask)
    comps = []
    for c in range(labels.max() + 1 if len(tris) else 0):
        members = np.flatnonzero(labels == c)
        rec = {"id": c, "size": int(len(members))}
        rec.update(_straightness(mesh, members))
        comps.append(rec)
    return StretchSet(eps=eps, triangles=tris, labels=labels, components=comps,
                      max_ratio=float(ratio.max()))


def stretch_sweep(mesh, u_final, L_hat, eps_values=(0.05, 0.1, 0.2)):
    return [stretch_set(mesh, u_final, L_hat, e) for e in eps_values]


def random_perturbation(mesh: SurfaceMesh, rng: np.random.Generator) -> EquivariantField:
    """Random PL function with zero periods, zero mean and unit BV norm."""
    x = rng.standard_normal(len(mesh.vertices))
    phi = EquivariantField(x, Homomorphism(np.zeros(mesh.n_generators)))
    lifted = phi.lifted(mesh)
    x = x - float(np.sum(mesh.areas * lifted.mean(axis=1))) / mesh.total_area
    bv = float(np.sum(mesh.areas * form_norm(mesh, differential(mesh, EquivariantField(x, phi.rho)))))
    return EquivariantField(x / bv, phi.rho)


def least_gradient_test(mesh: SurfaceMesh, dv, trials: int = 100, seed: int = 0,
                        tol: float = 1e-8, L_hat: float | None = None,
                        t_values=(1.0, -1.0, 0.1, -0.1), threads: int = 1) -> dict:
    """Seeded check that no PL perturbation lowers the total variation of v.

    ``dv`` is a :class:`PLOneForm` or anything with a ``v`` field.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not isinstance(dv, PLOneForm):
        dv = differential(mesh, dv.v)
    A = mesh.areas
    base = float(np.sum(A * form_norm(mesh, dv)))
    seeds = np.random.SeedSequence(seed).spawn(trials)

    def one(k):
        rng = np.random.default_rng(seeds[k])
        phi = random_perturbation(mesh, rng)
        dphi = differential(mesh, phi)
        worst = math.inf
        for t in t_values:
            val = float(np.sum(A * form_norm(mesh, dv + dphi * t)))
            worst = min(worst, val - base)
        return k, worst, phi

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as ex:
        results = list(ex.map(one, range(trials)))
    violations = [{"trial": k, "margin": w, "phi": phi.values.tolist()}
                  for k, w, phi in results if w < -tol]
    rec = {"trials": trials, "seed": seed, "tol": tol, "mass": base,
           "min_margin": float(min(w for _, w, _ in results)),
           "violations": violations, "passed": not violations}
    if L_hat is not None:
        rec["inv_L_hat"] = 1.0 / L_hat
        rec["mass_rel_error"] = abs(base * L_hat - 1.0)
    return rec


@dataclass
class LimitReport:
    L: LEstimate
    K_hat: float
    argmax_class: tuple | None
    stretch: StretchSet
    sweep: list
    max_du_trace: list
    lp_mean_trace: list
    inv_k_trace: list
    mass_trace: list
    p_trace: list

    @property
    def L_hat(self) -> float:
        return self.L.L_hat

    @property
    def stretch_set(self) -> np.ndarray:
        return self.stretch.triangles


def limit_report(mesh: SurfaceMesh, reports, masses=None, eps: float = 0.1,
                 search_radius: int = 50) -> LimitReport:
    reports = sorted(reports, key=lambda r: r.p)
    L = estimate_L(reports)
    rho = reports[-1].field.rho
    if mesh.kind == "torus":
        k = compute_K(mesh.deck, rho, search_radius)
        K_hat, cls = k.K, k.argmax
    else:
        K_hat, cls = annulus_K(rho, mesh.params["r0"]), None
    u = reports[-1].field
    st = stretch_set(mesh, u, L.L_hat, eps)
    sweep = stretch_sweep(mesh, u, L.L_hat)
    return LimitReport(L=L, K_hat=K_hat, argmax_class=cls, stretch=st, sweep=sweep,
                       max_du_trace=[r.max_du for r in reports],
                       lp_mean_trace=[r.lp_mean for r in reports],
                       inv_k_trace=[1.0 / r.k_p for r in reports],
                       mass_trace=list(masses) if masses is not None else [float("nan")] * len(reports),
                       p_trace=[r.p for r in reports])


def convergence_csv(rep: LimitReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "max_du", "lp_mean", "inv_k_p", "mass"])
    for row in zip(rep.p_trace, rep.max_du_trace, rep.lp_mean_trace, rep.inv_k_trace, rep.mass_trace):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def limit_report_json(rep: LimitReport) -> str:
    doc = {
        "L_hat": rep.L.L_hat,
        "L_estimates": {"max_du": rep.L.from_max, "lp_mean": rep.L.from_lp_mean,
                        "inv_k_p": rep.L.from_inv_k, "spread": rep.L.spread,
                        "monotone": rep.L.monotone, "converged": rep.L.converged, "note": rep.L.note},
        "K_hat": rep.K_hat,
        "argmax_class": list(rep.argmax_class) if rep.argmax_class else None,
        "traces": {"p": rep.p_trace, "max_du": rep.max_du_trace, "lp_mean": rep.lp_mean_trace,
                   "inv_k_p": rep.inv_k_trace, "mass": rep.mass_trace},
        "stretch_components": rep.stretch.to_dict(),
        "stretch_sweep": [s.to_dict() for s in rep.sweep],
    }
    return json.dumps(doc, sort_keys=True)
