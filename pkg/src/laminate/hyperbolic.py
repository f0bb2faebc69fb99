"""Poincare-disc primitives, cone profiles and the comparison checks built on them.

Convention: the disc distance is d(z, w) = atanh(|z - w| / |1 - conj(w) z|),
so d(0, k) = atanh(k).  This is the metric of constant curvature -4; every
formula in this module uses it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = ["PreconditionError", "ConeProfile", "disc_distance", "mobius_to_origin",
           "cone_profile", "cone_slope", "flux_residual", "sandwich_constants",
           "cone_comparison_check", "cone_ratio_trace", "geodesic_endpoints",
           "geodesics_cross", "real_axis_crossing", "normal_angle_bound", "cone_csv"]


class PreconditionError(ValueError):
    """Input data does not satisfy the precondition of a checker."""


def _as_disc_point(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ValueError("points must lie strictly inside the unit disc")
    return z


def disc_distance(z, w):
    z, w = _as_disc_point(z), _as_disc_point(w)
    return np.arctanh(np.abs(z - w) / np.abs(1 - np.conj(w) * z))


def mobius_to_origin(z, a):
    """The disc automorphism sending a to 0, applied to z."""
    z, a = _as_disc_point(z), _as_disc_point(a)
    return (z - a) / (1 - np.conj(a) * z)


# ----------------------------------------------------------------------------
# cone profiles

def _beta(n, p):
    return (n - 1.0) / (p - 1.0)


def cone_slope(t, n: int, p: float):
    """f_p'(t) = sinh(t)^(-beta)."""
    return np.sinh(np.asarray(t, dtype=float)) ** (-_beta(n, p))


def _integral(t, beta):
    # s = sigma^(1/(1-beta)) turns the sinh(s)^-beta singularity at 0 into a smooth integrand
    g = 1.0 / (1.0 - beta)
    upper = t ** (1.0 - beta)

    def f(sig):
        if sig == 0.0:
            return g
        s = sig ** g
        return g * (s / math.sinh(s)) ** beta

    val, err = quad(f, 0.0, upper, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val, err


@dataclass
class ConeProfile:
    n: int
    p: float
    grid: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    @property
    def beta(self) -> float:
        return _beta(self.n, self.p)

    def bounds(self):
        a, b = sandwich_constants(self.n, self.p, float(self.grid[-1]))
        power = self.grid ** (1.0 - self.beta)
        return a * power, b * power

    def sandwich_ok(self, tol: float = 1e-12) -> bool:
        lo, hi = self.bounds()
        return bool(np.all(lo - tol <= self.values) and np.all(self.values <= hi + tol))


def sandwich_constants(n: int, p: float, t_max: float):
    """a_p, b_p with a_p t^(1-beta) <= f_p(t) <= b_p t^(1-beta) on (0, t_max].

    From inf and sup of (s/sinh s)^beta on the range, which are attained at
    t_max and 0 because s/sinh s decreases.
    """
    beta = _beta(n, p)
    lo = (t_max / math.sinh(t_max)) ** beta
    return lo / (1.0 - beta), 1.0 / (1.0 - beta)


def cone_profile(n: int, p: float, t_max: float = 2.0, steps: int = 64) -> ConeProfile:
    if not n >= 2:
        raise ValueError("dimension n must be >= 2")
    if not p > n:
        raise ValueError(f"cone profile needs p > n (got p={p}, n={n})")
    if t_max <= 0 or steps < 1:
        raise ValueError("need t_max > 0 and steps >= 1")
    beta = _beta(n, p)
    grid = np.linspace(0.0, t_max, steps + 1)[1:]
    out = [_integral(t, beta) for t in grid]
    return ConeProfile(n=n, p=float(p), grid=grid, values=np.array([v for v, _ in out]),
                       errors=np.array([e for _, e in out]))


def flux_residual(profile: ConeProfile, rel_h: float = 1e-3) -> float:
    """Max relative deviation of the radial flux sinh(t)^(n-1) |f'|^(p-2) f' from its mean.

    f' is recovered from the profile's own quadrature by symmetric
    differences (with one Richardson step), so this tests the integrator, not
    the closed-form slope.
    """
    n, p, beta = profile.n, profile.p, profile.beta
    flux = []
    for t in profile.grid:
        h = rel_h * t

        def D(hh):
            return (_integral(t + hh, beta)[0] - _integral(t - hh, beta)[0]) / (2 * hh)

        fp = (4 * D(h / 2) - D(h)) / 3
        flux.append(math.sinh(t) ** (n - 1) * abs(fp) ** (p - 2) * fp)
    flux = np.array(flux)
    return float(np.abs(flux / flux.mean() - 1).max())


def cone_csv(profile: ConeProfile) -> str:
    lo, hi = profile.bounds()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "f_p", "lower", "upper"])
    for row in zip(profile.grid, profile.values, lo, hi):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# comparison with cones

def _dist(points, center, metric):
    pts = np.asarray(points)
    if metric == "euclidean":
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.hypot(*(pts - np.asarray(center, dtype=float)).T)
    if metric == "disc":
        return np.atleast_1d(disc_distance(pts, complex(center)))
    raise ValueError("metric must be 'euclidean' or 'disc'")


def cone_comparison_check(samples, center, A: float, B: float, r: float, tol: float = 1e-9,
                          metric: str = "euclidean", boundary_band: float | None = None) -> dict:
    """Check u <= A + B d(x, center) on the samples inside the r-ball.

    ``samples`` is a sequence of (point, value).  Samples within
    ``boundary_band`` of the sphere d = r, and the center itself, form the
    precondition; if u > c + tol there a :class:`PreconditionError` is raised.
    Remaining interior samples are checked and reported.
    """
    pts = [s[0] for s in samples]
    vals = np.array([float(s[1]) for s in samples])
    if metric == "disc":
        pts = np.array(pts, dtype=complex)
    d = _dist(pts, center, metric)
    band = boundary_band if boundary_band is not None else 1e-9 * max(r, 1.0)
    inside = d <= r + band
    c = A + B * d
    margin = vals - c
    pre = inside & ((np.abs(d - r) <= band) | (d <= 1e-14))
    if np.any(margin[pre] > tol):
        i = np.flatnonzero(pre)[int(np.argmax(margin[pre]))]
        raise PreconditionError(f"boundary/center inequality fails at sample {int(i)} "
                                f"by {float(margin[i]):.3e}")
    interior = inside & ~pre
    bad = np.flatnonzero(interior & (margin > tol))
    worst = float(margin[interior].max()) if np.any(interior) else float("-inf")
    return {"n_interior": int(interior.sum()), "violations": bad.tolist(),
            "worst_margin": worst, "max_violation": float(max(0.0, worst)) if bad.size else 0.0,
            "passed": bad.size == 0, "tol": tol}


def cone_ratio_trace(samples, center, radii, value_at_center: float | None = None,
                     rel_width: float = 0.02, metric: str = "euclidean", slack: float = 0.0) -> dict:
    """Per-radius max of (u(x) - u(center)) / r over thin sample rings.

    A sample belongs to ring r when |d - r| <= rel_width * r.
    """
    pts = [s[0] for s in samples]
    vals = np.array([float(s[1]) for s in samples])
    if metric == "disc":
        pts = np.array(pts, dtype=complex)
    d = _dist(pts, center, metric)
    if value_at_center is None:
        i0 = int(np.argmin(d))
        if d[i0] > 1e-12:
            raise PreconditionError("no sample at the center and no center value given")
        value_at_center = vals[i0]
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and increasing")
    trace = []
    for r in radii:
        ring = np.abs(d - r) <= rel_width * r
        if ring.sum() < 8:
            raise PreconditionError(f"ring r={r:g} has {int(ring.sum())} samples (< 8)")
        trace.append(float(((vals[ring] - value_at_center) / d[ring]).max()))
    trace = np.array(trace)
    drops = trace[:-1] - trace[1:]
    scale = np.maximum(np.abs(trace[:-1]), 1e-300)
    ok = bool(np.all(drops <= slack * scale + 1e-12))
    return {"radii": radii.tolist(), "trace": trace.tolist(), "monotone": ok,
            "max_relative_drop": float(max(0.0, (drops / scale).max())) if len(drops) else 0.0}


# ----------------------------------------------------------------------------
# normal angles along a transversal

def geodesic_endpoints(x: float, kappa: float):
    """Ideal endpoints of the geodesic through the real point x whose normal there has angle kappa.

    The geodesic through 0 with normal e^{i kappa} has endpoints +-i e^{i kappa};
    z -> (z + x)/(1 + x z) carries it to x without turning the tangent.
    """
    ends = np.array([1j * np.exp(1j * kappa), -1j * np.exp(1j * kappa)])
    return (ends + x) / (1 + x * ends)


def real_axis_crossing(e1, e2):
    """Point x on the real diameter where the geodesic with ideal endpoints e1, e2 crosses it, and its normal angle there."""
    e1, e2 = complex(e1), complex(e2)
    s, m = e1 + e2, 1 + e1 * e2
    if abs(s) < 1e-15:
        x = 0.0
    else:
        roots = np.roots([s, -2 * m, s])
        real = [r.real for r in roots if abs(r.imag) < 1e-9 and abs(r.real) < 1]
        if not real:
            raise ValueError("geodesic does not cross the real diameter")
        x = real[0]
    z = (e1 - x) / (1 - x * e1)
    return float(x), float(np.mod(np.angle(z) - np.pi / 2, np.pi))


def geodesics_cross(e1, e2) -> bool:
    """Two geodesics cross iff their endpoint pairs interleave on the circle."""
    a = np.mod(np.angle(np.asarray(e1)), 2 * np.pi)
    b = np.mod(np.angle(np.asarray(e2)), 2 * np.pi)
    lo, hi = sorted(a)
    if np.any(np.abs(b[:, None] - a[None, :]) < 1e-14):
        return False  # shared ideal endpoint: asymptotic, not crossing
    inside = [(lo < t < hi) for t in b]
    return inside[0] != inside[1]


def _angle_gap(a, b):
    d = np.mod(a - b, np.pi)
    return float(min(d, np.pi - d))


def normal_angle_bound(leaf_normals, flag_fraction: float = 0.9) -> dict:
    """Lipschitz estimate of the leaf-normal angle along a transversal on the real axis.

    ``leaf_normals`` is a sequence of (k, kappa) with k in (-1, 1) real.  Each
    pair is recentered so one point sits at the origin; there the chord bound
    |1 - e^{i dkappa}| <= 2k'/(1 - k') must hold, with k' the recentered
    partner.  Pairs above ``flag_fraction`` of the bound are flagged.
    Crossing leaves, or two leaves through one point, are rejected.
    """
    items = [(float(np.real(k)), float(kap)) for k, kap in leaf_normals]
    if len(items) < 2:
        raise ValueError("need at least two (point, angle) entries")
    ratio_max, flagged, worst = 0.0, [], 0.0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            (k1, a1), (k2, a2) = items[i], items[j]
            dk = _angle_gap(a1, a2)
            kk = abs(float(np.real(mobius_to_origin(k2, k1))))
            if kk < 1e-15:
                if dk > 1e-12:
                    raise ValueError(f"entries {i} and {j}: two leaves through one point")
                continue
            if dk > 1e-12 and geodesics_cross(geodesic_endpoints(k1, a1), geodesic_endpoints(k2, a2)):
                raise ValueError(f"entries {i} and {j}: leaves cross")
            d = math.atanh(kk)
            chord = float(abs(1 - np.exp(1j * dk)))
            bound = 2 * kk / (1 - kk)
            use = chord / bound
            worst = max(worst, use)
            if use > flag_fraction:
                flagged.append((i, j, use))
            ratio_max = max(ratio_max, dk / d)
    return {"lipschitz": ratio_max, "bound_usage": worst, "holds": bool(worst <= 1.0 + 1e-12),
            "flagged": flagged}
