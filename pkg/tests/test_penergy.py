import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laminate.mesh import EquivariantField, build_torus, differential, form_norm
from laminate.penergy import (SolverConfig, energy, gradient, hessian, minimize, normalization_kp,
                              report_to_json, trace_to_csv)
from laminate.limits import torus_L_oracle

from conftest import SHEARED


def test_energy_of_linear_field():
    mesh = build_torus(SHEARED, 4)
    c = np.array([0.6, -0.8])
    u = EquivariantField(mesh.vertices @ c, mesh.deck @ c)
    for p in (2, 5, 12):
        assert energy(mesh, u, p) == pytest.approx(mesh.total_area * np.linalg.norm(c) ** p, rel=1e-13)


@given(st.floats(2.0, 10.0), st.integers(0, 2 ** 16))
@settings(max_examples=15, deadline=None)
def test_gradient_matches_finite_differences(p, seed):
    mesh = build_torus(SHEARED, 3)
    rng = np.random.default_rng(seed)
    u = EquivariantField(rng.standard_normal(len(mesh.vertices)), rng.standard_normal(2))
    g = gradient(mesh, u, p, 1e-3)
    h = 1e-3

    def E(i, t):
        e = np.zeros(len(mesh.vertices))
        e[i] = t
        return energy(mesh, EquivariantField(u.values + e, u.rho), p, 1e-3)

    # five-point stencil; the absolute slack is the cancellation error of the energy sums
    slack = 1e-13 * energy(mesh, u, p, 1e-3) / h
    for i in rng.choice(len(mesh.vertices), 3, replace=False):
        fd = (-E(i, 2 * h) + 8 * E(i, h) - 8 * E(i, -h) + E(i, -2 * h)) / (12 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=slack)


def test_hessian_matches_gradient_differences(rng):
    mesh = build_torus(SHEARED, 3)
    u = EquivariantField(rng.standard_normal(len(mesh.vertices)), [1.0, 0.5])
    p, delta = 6.0, 1e-3
    H = hessian(mesh, u, p, delta).toarray()
    assert np.allclose(H, H.T, atol=1e-12)
    d = rng.standard_normal(len(mesh.vertices))
    h = 1e-6
    fd = (gradient(mesh, EquivariantField(u.values + h * d, u.rho), p, delta)
          - gradient(mesh, EquivariantField(u.values - h * d, u.rho), p, delta)) / (2 * h)
    assert np.allclose(H @ d, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


def test_torus_minimizer_is_linear(torus_run):
    mesh, reports = torus_run
    L = torus_L_oracle(SHEARED, [1.0, 0.0])
    for r in reports:
        du = form_norm(mesh, differential(mesh, r.field))
        assert du.max() - du.min() < 1e-8 * L
        assert r.max_du == pytest.approx(L, rel=1e-9)
        assert r.converged and not r.stalled


def test_kp_law(annulus_run, torus_run):
    for mesh, reports in (annulus_run, torus_run):
        for r in reports:
            assert r.k_p == pytest.approx(r.energy ** (-1 / (r.p - 1)), rel=1e-12)
            assert normalization_kp(r) == pytest.approx(r.k_p, rel=1e-12)
            # the normalized field has unit p-energy times k_p
            assert r.k_p ** r.p * r.energy == pytest.approx(r.k_p, rel=1e-12)


def test_annulus_energy_oracle(annulus_run):
    mesh, reports = annulus_run
    for r in reports:
        if r.p in (8, 16, 32, 64):
            exact = 2 * math.pi * (1 - 2.0 ** (2 - r.p)) / (r.p - 2)
            assert abs(r.energy / exact - 1) <= 1e-2


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(p_schedule=(4, 2))
    with pytest.raises(ValueError):
        SolverConfig(p_schedule=(1.5, 2))
    with pytest.raises(ValueError):
        SolverConfig(delta=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)


def test_minimize_argument_checks():
    mesh = build_torus(SHEARED, 3)
    with pytest.raises(ValueError, match="one period"):
        minimize(mesh, [1.0])
    warm = EquivariantField(np.zeros(len(mesh.vertices)), [2.0, 0.0])
    with pytest.raises(ValueError, match="warm start"):
        minimize(mesh, [1.0, 0.0], warm_start=warm)


def test_reports_serialize(torus_run):
    _, reports = torus_run
    r = reports[-1]
    doc = json.loads(report_to_json(r, include_field=True))
    assert doc["p"] == 64 and len(doc["u"]) == 64 and doc["rho"] == [1.0, 0.0]
    lines = trace_to_csv(r).splitlines()
    assert lines[0] == "iter,energy,grad_norm,step"
