"""p-energy of equivariant PL fields and its minimization along a p-schedule."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as _scipy_minimize
from scipy.sparse.linalg import splu

from .mesh import EquivariantField, Homomorphism, SurfaceMesh, differential, form_norm

log = logging.getLogger(__name__)

__all__ = ["SolverConfig", "SolveReport", "energy", "gradient", "hessian", "minimize",
           "normalization_kp", "report_to_json", "trace_to_csv"]


@dataclass(frozen=True)
class SolverConfig:
    p_schedule: tuple = (2, 4, 8, 16, 32, 64)
    delta: float | None = None      # None -> 1e-8 * mesh size
    grad_tol: float | None = None   # None -> 1e-9 * p * area * max_du**(p-1)
    max_iters: int = 200
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_schedule)
        if not ps or ps[0] < 2 or any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p_schedule must be strictly increasing with first entry >= 2")
        object.__setattr__(self, "p_schedule", ps)
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not (0 < self.shrink < 1 and 0 < self.armijo < 1):
            raise ValueError("line search needs 0 < shrink < 1 and 0 < armijo < 1")


@dataclass
class SolveReport:
    p: float
    energy: float
    grad_norm: float
    iterations: int
    max_du: float
    lp_mean: float
    k_p: float
    energy_regularized: float = 0.0
    delta: float = 0.0
    grad_tol: float = 0.0
    converged: bool = True
    stalled: bool = False
    method: str = "newton"
    message: str = ""
    trace: list = field(default_factory=list, repr=False)


def _s(mesh, g, delta):
    return np.einsum("fi,fij,fj->f", g, mesh.inv_metric, g) + delta * delta


def energy(mesh: SurfaceMesh, u: EquivariantField, p: float, delta: float = 0.0) -> float:
    """Sum over triangles of (|du|^2 + delta^2)^(p/2) * area."""
    g = differential(mesh, u).covectors
    return float(np.sum(mesh.areas * _s(mesh, g, delta) ** (0.5 * p)))


def _scatter(mesh, corner_vals):
    return np.bincount(mesh.triangles.ravel(), weights=corner_vals.ravel(),
                       minlength=len(mesh.vertices))


def gradient(mesh: SurfaceMesh, u: EquivariantField, p: float, delta: float = 0.0) -> np.ndarray:
    """Derivative of the discrete energy with respect to every vertex value."""
    g = differential(mesh, u).covectors
    s = _s(mesh, g, delta)
    w = mesh.areas * p * s ** (0.5 * p - 1)
    raised = np.einsum("fij,fj->fi", mesh.inv_metric, g)
    corner = w[:, None] * np.einsum("fij,fi->fj", mesh.grad_ops, raised)
    return _scatter(mesh, corner)


def hessian(mesh: SurfaceMesh, u: EquivariantField, p: float, delta: float = 0.0) -> sp.csr_matrix:
    g = differential(mesh, u).covectors
    s = _s(mesh, g, delta)
    D = mesh.grad_ops
    Gi = mesh.inv_metric
    w = mesh.areas * p * s ** (0.5 * p - 1)
    DtGi = np.einsum("fij,fik->fjk", D, Gi)                 # (F, 3, 2)
    K = np.einsum("fjk,fkl->fjl", DtGi, D)                  # D^T G^-1 D
    r = np.einsum("fjk,fk->fj", DtGi, g)                    # D^T G^-1 g
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(s > 0, (p - 2) / s, 0.0)
    H = w[:, None, None] * (K + c[:, None, None] * r[:, :, None] * r[:, None, :])
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = len(mesh.vertices)
    return sp.coo_matrix((H.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def normalization_kp(report) -> float:
    """k_p with sum |k_p du_p|^p area = k_p, i.e. energy**(-1/(p-1))."""
    e = report.energy if hasattr(report, "energy") else report["energy"]
    p = report.p if hasattr(report, "p") else report["p"]
    if not e > 0:
        raise ValueError("k_p is undefined for zero energy (trivial period class)")
    return float(e ** (-1.0 / (p - 1.0)))


def _stats(mesh, u, p):
    du = form_norm(mesh, differential(mesh, u))
    J = float(np.sum(mesh.areas * du ** p))
    max_du = float(du.max())
    lp_mean = float((J / mesh.total_area) ** (1.0 / p))
    return J, max_du, lp_mean


def _newton_step(H, g, free):
    Hf = H[free][:, free]
    gf = g[free]
    d = np.sqrt(np.abs(Hf.diagonal()))
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise np.linalg.LinAlgError("singular diagonal")
    Dinv = sp.diags(1.0 / d)
    S = (Dinv @ Hf @ Dinv).tocsc()
    y = splu(S).solve(-gf / d)
    step = y / d
    if not np.all(np.isfinite(step)) or step @ gf >= 0:
        raise np.linalg.LinAlgError("no descent direction")
    full = np.zeros_like(g)
    full[free] = step
    return full


def _solve_one(mesh, u0, p, delta, tol, cfg):
    rho = u0.rho
    x = u0.values.copy()
    x -= x[0]  # gauge: vertex 0 pinned to 0
    free = np.arange(1, len(x))

    def E(vals):
        return energy(mesh, EquivariantField(vals, rho), p, delta)

    def G(vals):
        return gradient(mesh, EquivariantField(vals, rho), p, delta)

    e, g = E(x), G(x)
    trace = [(0, e, float(np.abs(g[free]).max(initial=0.0)), 0.0)]
    method, stalled, msg = "newton", False, ""
    it = 0
    while it < cfg.max_iters:
        gn = float(np.abs(g[free]).max(initial=0.0))
        if gn <= tol:
            break
        it += 1
        try:
            d = _newton_step(hessian(mesh, EquivariantField(x, rho), p, delta), g, free)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            log.info("p=%g: Newton step failed (%s); falling back to L-BFGS", p, exc)
            method = "newton+lbfgs"
            res = _scipy_minimize(lambda z: E(np.concatenate([[0.0], z])),
                                  x[1:], jac=lambda z: G(np.concatenate([[0.0], z]))[1:],
                                  method="L-BFGS-B",
                                  options={"maxiter": 50 * cfg.max_iters, "gtol": tol, "ftol": 0.0})
            xn = np.concatenate([[0.0], res.x])
            en = E(xn)
            if en <= e:
                x, e, g = xn, en, G(xn)
            trace.append((it, e, float(np.abs(g[free]).max()), 1.0))
            if float(np.abs(g[free]).max()) > tol:
                stalled, msg = True, f"L-BFGS fallback ended: {res.message}"
            break
        slope = float(g @ d)
        t = 1.0
        slack = 8 * np.finfo(float).eps * abs(e)
        for _ in range(cfg.max_backtracks):
            xn = x + t * d
            en = E(xn)
            if en <= e + cfg.armijo * t * slope + slack and en <= e + slack:
                break
            t *= cfg.shrink
        else:
            stalled = True
            msg = f"line search failed after {cfg.max_backtracks} backtracks (grad {gn:.3e}, tol {tol:.3e})"
            break
        x, e = xn, min(en, e) if en <= e else en
        g = G(x)
        trace.append((it, e, float(np.abs(g[free]).max()), t))
    gn = float(np.abs(g[free]).max(initial=0.0))
    converged = gn <= tol
    if not converged and not stalled:
        msg = msg or f"max_iters={cfg.max_iters} reached (grad {gn:.3e}, tol {tol:.3e})"
    return x, e, gn, it, converged, stalled, method, msg, trace


def minimize(mesh: SurfaceMesh, rho, config: SolverConfig = SolverConfig(), warm_start=None):
    """Minimize the p-energy for every p of the schedule, warm-starting each solve.

    Returns the final field and the list of per-p reports (each carrying the
    field it was computed from in ``report.field``).
    """
    rho = rho if isinstance(rho, Homomorphism) else Homomorphism(rho)
    if rho.periods.shape != (mesh.n_generators,):
        raise ValueError("rho must have one period per homology generator")
    delta = config.delta if config.delta is not None else 1e-8 * mesh.mesh_size
    if warm_start is None:
        u = EquivariantField(np.zeros(len(mesh.vertices)), rho)
    else:
        if not np.allclose(warm_start.rho.periods, rho.periods):
            raise ValueError("warm start has different periods")
        u = warm_start
    reports = []
    area = mesh.total_area
    for p in config.p_schedule:
        if config.grad_tol is not None:
            tol = config.grad_tol
        else:
            _, max_du, _ = _stats(mesh, u, p)
            tol = 1e-9 * p * area * max(max_du, 1e-300) ** (p - 1)
            tol = max(tol, 1e-300)
        x, e_reg, gn, it, conv, stalled, method, msg, trace = _solve_one(mesh, u, p, delta, tol, config)
        u = EquivariantField(x, rho)
        J, max_du, lp_mean = _stats(mesh, u, p)
        k_p = J ** (-1.0 / (p - 1.0)) if J > 0 else float("nan")
        rep = SolveReport(p=p, energy=J, grad_norm=gn, iterations=it, max_du=max_du,
                          lp_mean=lp_mean, k_p=k_p, energy_regularized=e_reg, delta=delta,
                          grad_tol=tol, converged=conv, stalled=stalled, method=method,
                          message=msg, trace=trace)
        rep.field = u
        if stalled or not conv:
            log.warning("p=%g: %s", p, msg)
        reports.append(rep)
    return u, reports


def report_to_json(rep: SolveReport, include_field: bool = False) -> str:
    doc = {k: v for k, v in asdict(rep).items() if k != "trace"}
    if include_field and hasattr(rep, "field"):
        doc["u"] = rep.field.values.tolist()
        doc["rho"] = rep.field.rho.periods.tolist()
    return json.dumps(doc, sort_keys=True)


def trace_to_csv(rep: SolveReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "energy", "grad_norm", "step"])
    for row in rep.trace:
        w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])
    return buf.getvalue()
