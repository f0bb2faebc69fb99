import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laminate.duality import (adapted_coordinates, concentration_diagnostics, conjugate_exponent,
                              dual_form, dual_periods, dual_report_json, duality_map, form_mass,
                              mass_bound, pairing, primitive, region_masses_csv)
from laminate.mesh import PLOneForm, build_torus, differential

from conftest import SHEARED


def dual_of(mesh, r):
    V = dual_form(mesh, r.field, r.p, r.k_p)
    return V, primitive(mesh, V, dual_periods(mesh, V), r.p)


def test_conjugate_exponent():
    assert conjugate_exponent(2) == 2
    assert conjugate_exponent(64) == pytest.approx(64 / 63)
    p = 7.5
    q = conjugate_exponent(p)
    assert 1 / p + 1 / q == pytest.approx(1.0)


@given(st.floats(2.0, 80.0), st.integers(0, 2 ** 16))
@settings(max_examples=25, deadline=None)
def test_duality_map_is_an_involution_up_to_sign(p, seed):
    mesh = build_torus(SHEARED, 2)
    rng = np.random.default_rng(seed)
    w = PLOneForm(rng.uniform(0.5, 1.5, (len(mesh.triangles), 2)) * rng.choice([-1, 1], (len(mesh.triangles), 2)))
    back = duality_map(mesh, duality_map(mesh, w, p), conjugate_exponent(p))
    assert np.allclose(back.covectors, -w.covectors, rtol=1e-10, atol=0)


@given(st.integers(0, 2 ** 16))
@settings(max_examples=20, deadline=None)
def test_pairing_is_antisymmetric(seed):
    mesh = build_torus(SHEARED, 3)
    rng = np.random.default_rng(seed)
    a = PLOneForm(rng.standard_normal((len(mesh.triangles), 2)))
    b = PLOneForm(rng.standard_normal((len(mesh.triangles), 2)))
    assert pairing(mesh, a, b) == pytest.approx(-pairing(mesh, b, a), abs=1e-12)
    assert pairing(mesh, a, a) == pytest.approx(0.0, abs=1e-12)


def test_torus_duality_is_exact(torus_run):
    mesh, reports = torus_run
    L = reports[-1].max_du
    for r in reports:
        V, d = dual_of(mesh, r)
        du = differential(mesh, r.field)
        assert pairing(mesh, du, differential(mesh, d.v)) == pytest.approx(1.0, abs=1e-10)
        assert pairing(mesh, du, V) == pytest.approx(1.0, abs=1e-10)
        assert d.residual < 1e-10
        # constant |du| = L gives a mass of exactly 1/L
        assert d.mass == pytest.approx(1 / L, rel=1e-8)
        assert d.form_mass <= mass_bound(mesh, r.p, r.k_p) * (1 + 1e-12)
        assert d.p == pytest.approx(r.p)


def test_primitive_has_requested_periods_and_zero_mean(annulus_run):
    mesh, reports = annulus_run
    r = reports[3]
    V, d = dual_of(mesh, r)
    assert np.allclose(d.alpha.periods, dual_periods(mesh, V).periods)
    lifted = d.v.lifted(mesh)
    assert abs(np.sum(mesh.areas * lifted.mean(axis=1))) < 1e-10


def test_annulus_dual_periods_vanish(annulus_run):
    mesh, reports = annulus_run
    # V_q is radial in the continuum; the discrete period is a discretization
    # error that is largest at moderate p and dies out as V_q leaves the loop
    alpha = [abs(dual_periods(mesh, dual_of(mesh, r)[0]).periods[0]) for r in reports]
    assert max(alpha) < 5e-3
    assert alpha[0] < 1e-12 and alpha[-1] < 1e-8


def test_adapted_coordinates_law(torus_run):
    mesh, reports = torus_run
    r = reports[2]
    V, _ = dual_of(mesh, r)
    tau1, tau2, pred = adapted_coordinates(mesh, r.field, V, r.p, r.k_p)
    assert np.allclose(tau2, pred, rtol=1e-10)


def test_concentration_diagnostics_on_torus(torus_run):
    mesh, reports = torus_run
    final = reports[-1]
    r = final
    V, d = dual_of(mesh, r)
    dv = differential(mesh, d.v)
    mask = np.zeros(len(mesh.triangles), dtype=bool)
    mask[::2] = True
    diag = concentration_diagnostics(mesh, r.field, r.k_p * differential(mesh, r.field), V, final.field,
                                     r.p, ref_scale=final.k_p, dv=dv, regions={"even": mask})
    assert diag["ORTH"] < 1e-10
    assert diag["G2"] < 1e-10
    assert diag["regions"]["even"]["fraction"] == pytest.approx(0.5, abs=1e-12)
    assert region_masses_csv(diag).splitlines()[0] == "region,mass,fraction"
    doc = json.loads(dual_report_json(d, 1.0, diag))
    assert doc["q"] == pytest.approx(d.q)


def test_form_mass_with_mask():
    mesh = build_torus(SHEARED, 2)
    w = PLOneForm(np.tile([3.0, 4.0], (len(mesh.triangles), 1)))
    assert form_mass(mesh, w) == pytest.approx(5.0)
    assert form_mass(mesh, w, np.zeros(len(mesh.triangles), dtype=bool)) == 0.0
