"""Annulus 1 <= r <= 2 with the angle class: watch u_p flatten toward the limit.

The angle function theta is p-harmonic for every p, so the discrete solves can
be compared against closed forms.  As p grows, k_p -> 1/L = 1, and the dual
mass |dv_q| piles up against the inner circle, where the stretch is largest.
"""
import math

import numpy as np

from laminate.duality import dual_form, dual_periods, primitive
from laminate.limits import annulus_K, estimate_L, stretch_set
from laminate.mesh import boundary_layer_radii, build_annulus, differential, form_norm
from laminate.penergy import SolverConfig, minimize

radii = boundary_layer_radii(1.0, 2.0, 32, first=0.002, ratio=1.15)
mesh = build_annulus(1.0, 2.0, 64, 32, radii=radii)
r = np.hypot(*mesh.barycenters.T) / mesh.params["radial_scale"]
print(f"annulus mesh: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")

_, reports = minimize(mesh, [2 * math.pi], SolverConfig(p_schedule=(2, 4, 8, 16, 32, 64)))

print("\n   p    J_p/exact    k_p    max|du|   mass   outer fraction")
for rep in reports:
    p = rep.p
    exact = 2 * math.pi * math.log(2) if p == 2 else 2 * math.pi * (1 - 2.0 ** (2 - p)) / (p - 2)
    V = dual_form(mesh, rep.field, p, rep.k_p)
    d = primitive(mesh, V, dual_periods(mesh, V), p)
    dv = form_norm(mesh, differential(mesh, d.v))
    outer = np.sum((mesh.areas * dv)[r > 1.25]) / np.sum(mesh.areas * dv)
    print(f"{p:5g}  {rep.energy / exact:10.5f}  {rep.k_p:7.4f}  {rep.max_du:8.5f}  {d.mass:6.4f}  {outer:9.2e}")

est = estimate_L(reports)
print(f"\nL_hat = {est.L_hat:.5f} (monotone trace: {est.monotone}); K = {annulus_K([2 * math.pi], 1.0):.5f}")

st = stretch_set(mesh, reports[-1].field, est.L_hat, eps=0.1)
print(f"stretch set at eps = 0.1: {len(st.triangles)} triangles, all with r < {r[st.triangles].max():.3f}")
print("the band hugs the inner circle, the shortest loop in the class")
