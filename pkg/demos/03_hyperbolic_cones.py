"""Radial p-harmonic profiles in hyperbolic space and the leaf-normal estimate.

f_p solves the radial p-Laplace equation with f_p(0) = 0, f_p'(t) = sinh(t)^(-beta)
and beta = (n-1)/(p-1).  As p grows the profile approaches the distance
function itself, which is the cone used in comparison arguments.
"""
import numpy as np

from laminate.hyperbolic import (cone_profile, flux_residual, geodesic_endpoints, geodesics_cross,
                                 normal_angle_bound, sandwich_constants)

for n in (2, 3):
    print(f"n = {n}")
    for p in (8, 32, 128, 512):
        prof = cone_profile(n, p, t_max=2.0, steps=64)
        a, b = sandwich_constants(n, p, 2.0)
        gap = np.abs(prof.values - prof.grid).max()
        print(f"  p = {p:4d}: f_p(1) = {np.interp(1.0, prof.grid, prof.values):.5f}, "
              f"sup|f_p - t| = {gap:.4f}, a = {a:.4f}, b = {b:.4f}, "
              f"flux residual {flux_residual(prof):.1e}")

# leaves crossing the real diameter, with slowly turning normals
xs = np.linspace(-0.5, 0.5, 9)
leaves = [(x, 0.4 * x) for x in xs]
rec = normal_angle_bound(leaves)
print(f"\n9 disjoint leaves: Lipschitz ratio of the normal angle {rec['lipschitz']:.3f}, "
      f"bound usage {rec['bound_usage']:.3f}, flagged pairs {len(rec['flagged'])}")

e1, e2 = geodesic_endpoints(0.0, 0.0), geodesic_endpoints(0.05, 1.2)
print(f"a steep leaf next to the vertical one crosses it: {geodesics_cross(e1, e2)}")
