"""Measured laminations from the dual problem.

On the annulus the limit primitive v is constant off a thin band at the inner
circle; the jump across the band is a transverse measure.  On a torus a
family of parallel closed leaves with weights gives a staircase primitive
whose differential pairs with closed forms exactly like the lamination's
current.  Along a transversal, the trace of v splits into atoms, an
absolutely continuous part and a Cantor part.
"""
import math

import numpy as np

from laminate.duality import dual_form, dual_periods, primitive
from laminate.lamination import (MeasuredLamination, TransversalPath, bv_decompose, cantor_left_endpoints,
                                 cocycle, plaques, rs_primitive, staircase)
from laminate.limits import stretch_set
from laminate.mesh import boundary_layer_radii, build_annulus, build_torus
from laminate.penergy import SolverConfig, minimize

radii = boundary_layer_radii(1.0, 2.0, 32, first=0.002, ratio=1.15)
mesh = build_annulus(1.0, 2.0, 64, 32, radii=radii)
_, reports = minimize(mesh, [2 * math.pi], SolverConfig())
rep = reports[-1]
V = dual_form(mesh, rep.field, rep.p, rep.k_p)
d = primitive(mesh, V, dual_periods(mesh, V), rep.p)
dec = plaques(mesh, stretch_set(mesh, rep.field, rep.max_du).triangles, d)
print(f"annulus: {dec.n_plaques} plaques, constants {np.round(dec.constants, 4)}, virtual {len(dec.virtual)}")

inner = mesh.vertices[dec.virtual[0]["vertices"][0]]
th = math.atan2(inner[1], inner[0])
path = TransversalPath(np.array([[1.7 * math.cos(th), 1.7 * math.sin(th)], inner]), "radial")
nu = cocycle(path, dec)
print(f"measure of a radial transversal: {nu:.5f}; times 2 pi: {2 * math.pi * nu:.4f} (the dual mass)")

torus = build_torus([[1.0, 0.0], [0.3, 1.0]], 8)
lam = MeasuredLamination([((1, 1), 0.1, 0.5), ((1, 1), 0.45, 0.3), ((1, 1), 0.8, 0.2)])
v, rec = rs_primitive(lam, torus)
print("\ntorus lamination of class (1, 1), total weight 1:")
for row in rec["forms"]:
    print(f"  {row['form']:>3}: pairing {row['pairing']: .12f}   current {row['current']: .12f}")

# a Cantor family of 2^6 leaves of class (0, 1) on the unit square, weight 2^-6 each;
# the trace is read off the exact staircase, since a P1 interpolant on a mesh
# coarser than the gaps would smear every jump into a ramp
offs = cantor_left_endpoints(6)
cantor = MeasuredLamination([((0, 1), float(o), 1 / 64) for o in offs])
s = np.linspace(-0.0005, 0.9995, 3 ** 8 + 1)
g = staircase(cantor, [[1.0, 0.0], [0.0, 1.0]], np.stack([s, np.full_like(s, 0.5)], axis=1))
tr = bv_decompose(s, g)
print(f"\nCantor family trace: TV {tr.total_variation:.3f}, atoms {len(tr.atoms)}, "
      f"Cantor part {tr.cantor_mass:.3f}, ac part {tr.ac_mass:.3f} at sampling scale {tr.scale:.1e}")

# one heavy leaf among light ones shows up as an atom
heavy = MeasuredLamination([((0, 1), 0.5, 0.8)] + [((0, 1), k / 40, 0.005) for k in range(40) if k != 20])
g = staircase(heavy, [[1.0, 0.0], [0.0, 1.0]], np.stack([s, np.full_like(s, 0.5)], axis=1))
tr = bv_decompose(s, g)
print(f"one heavy leaf: atoms at {[round(a, 4) for a, _ in tr.atoms]}, atom mass {tr.atom_mass:.3f}")
