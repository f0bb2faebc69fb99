"""On flat tori the best Lipschitz constant in a class equals the largest
ratio of period to length over simple closed geodesics.

For a flat torus the minimizer is linear for every p, so L is just the norm
of the linear map with the prescribed periods.  The brute-force search over
primitive classes finds the same number, and the maximizing class tells which
closed geodesic is stretched the most.  When the direction of steepest
stretch is irrational no closed geodesic attains the sup, and the argmax
drifts to the edge of the search box while K still matches L.
"""
import numpy as np

from laminate.limits import compute_K, estimate_L, torus_L_oracle
from laminate.mesh import build_torus
from laminate.penergy import SolverConfig, minimize

rng = np.random.default_rng(2)
print(" shear  height      rho              K        L_hat    oracle L   argmax")
for _ in range(5):
    E = np.array([[1.0, 0.0], [rng.uniform(-0.6, 0.6), rng.uniform(0.7, 1.4)]])
    rho = rng.uniform(-1.5, 1.5, 2)
    mesh = build_torus(E, 6)
    _, reports = minimize(mesh, rho, SolverConfig(p_schedule=(2, 8, 32, 64)))
    L_hat = estimate_L(reports).L_hat
    k = compute_K(E, rho, search_radius=50)
    print(f"{E[1, 0]:6.3f}  {E[1, 1]:6.3f}  ({rho[0]:5.2f},{rho[1]:5.2f})  {k.K:8.5f}  {L_hat:8.5f}  "
          f"{torus_L_oracle(E, rho):8.5f}  {k.argmax}")
