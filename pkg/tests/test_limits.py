import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from laminate.duality import dual_form, dual_periods, primitive
from laminate.limits import (annulus_K, compute_K, convergence_csv, estimate_L, least_gradient_test,
                             limit_report, limit_report_json, random_perturbation, stretch_set,
                             torus_L_oracle)
from laminate.mesh import build_torus, differential, form_norm

from conftest import SHEARED


def test_compute_K_square_torus():
    k = compute_K([[1, 0], [0, 1]], [1.0, 0.0], 10)
    assert k.K == pytest.approx(1.0) and k.argmax == (1, 0)


def test_compute_K_sheared_torus():
    k = compute_K(SHEARED, [1.0, 0.0], 50)
    assert k.K == pytest.approx(math.sqrt(5) / 2, rel=1e-12)
    assert k.argmax == (5, -2)
    assert torus_L_oracle(SHEARED, [1.0, 0.0]) == pytest.approx(math.sqrt(5) / 2, rel=1e-12)


def test_compute_K_errors_and_zero():
    with pytest.raises(ValueError):
        compute_K([[1, 0], [0, 1]], [1.0, 0.0], 0)
    assert compute_K([[1, 0], [0, 1]], [0.0, 0.0]).K == 0.0


@given(st.floats(0.3, 2), st.floats(-1, 1), st.floats(0.3, 2), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_K_never_exceeds_L(a, b, c, r0, r1):
    E = [[a, 0.0], [b, c]]
    assume(abs(r0) + abs(r1) > 1e-3)
    K = compute_K(E, [r0, r1], 12).K
    assert K <= torus_L_oracle(E, [r0, r1]) * (1 + 1e-12)


def test_annulus_K():
    assert annulus_K([2 * math.pi], 1.0) == pytest.approx(1.0)
    assert annulus_K([-math.pi], 0.5) == pytest.approx(1.0)


def test_estimate_L(annulus_run):
    _, reports = annulus_run
    est = estimate_L(reports)
    assert est.L_hat == pytest.approx(1.0, rel=2e-3)
    assert est.monotone
    with pytest.raises(ValueError):
        estimate_L(reports[:1])


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5))
@settings(max_examples=20, deadline=None)
def test_stretch_set_monotone_in_eps(e1, e2):
    mesh, u, L = _annulus_final()
    small, large = sorted((e1, e2))
    a = set(stretch_set(mesh, u, L, small).triangles)
    b = set(stretch_set(mesh, u, L, large).triangles)
    assert a <= b


_cache = {}


def _annulus_final():
    if not _cache:
        from conftest import graded_annulus
        from laminate.penergy import SolverConfig, minimize
        mesh = graded_annulus(32, 16)
        u, reps = minimize(mesh, [2 * math.pi], SolverConfig(p_schedule=(2, 8, 32)))
        _cache["v"] = (mesh, u, reps[-1].max_du)
    return _cache["v"]


def test_annulus_stretch_set_hugs_inner_boundary(annulus_run):
    mesh, reports = annulus_run
    st_ = stretch_set(mesh, reports[-1].field, reports[-1].max_du, 0.1)
    r = np.hypot(*mesh.barycenters[st_.triangles].T) / mesh.params["radial_scale"]
    assert r.max() < 1 / 0.9 + 0.01
    assert len(st_.components) == 1
    with pytest.raises(ValueError):
        stretch_set(mesh, reports[-1].field, 1.0, 1.5)


def test_torus_stretch_set_is_everything(torus_run):
    mesh, reports = torus_run
    st_ = stretch_set(mesh, reports[-1].field, reports[-1].max_du)
    assert len(st_.triangles) == len(mesh.triangles)


def test_random_perturbation_normalization(rng):
    mesh = build_torus(SHEARED, 4)
    phi = random_perturbation(mesh, rng)
    assert np.allclose(phi.rho.periods, 0)
    bv = np.sum(mesh.areas * form_norm(mesh, differential(mesh, phi)))
    assert bv == pytest.approx(1.0)
    assert abs(np.sum(mesh.areas * phi.lifted(mesh).mean(axis=1))) < 1e-12


def test_least_gradient_on_torus(torus_run):
    mesh, reports = torus_run
    r = reports[-1]
    V = dual_form(mesh, r.field, r.p, r.k_p)
    d = primitive(mesh, V, dual_periods(mesh, V), r.p)
    rec = least_gradient_test(mesh, d, trials=30, seed=1, L_hat=r.max_du, threads=2)
    assert rec["passed"] and rec["min_margin"] >= -1e-8
    assert rec["mass_rel_error"] < 1e-8
    again = least_gradient_test(mesh, d, trials=30, seed=1, L_hat=r.max_du, threads=1)
    assert again["min_margin"] == rec["min_margin"]


def test_limit_report(annulus_run):
    mesh, reports = annulus_run
    rep = limit_report(mesh, reports, masses=[1.0] * len(reports))
    assert rep.K_hat == pytest.approx(1.0)
    assert rep.argmax_class is None
    assert len(rep.sweep) == 3
    assert convergence_csv(rep).splitlines()[0] == "p,max_du,lp_mean,inv_k_p,mass"
    assert '"L_hat"' in limit_report_json(rep)
