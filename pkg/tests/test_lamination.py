import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laminate.lamination import (MeasuredLamination, TransversalPath, annulus_transversals,
                                 bv_decompose, cantor_left_endpoints, cantor_staircase, cocycle,
                                 cocycle_csv, cocycle_properties, good_subdivision, lamination_from_json,
                                 lamination_to_json, leaf_band, leaf_geometry, path_from_json,
                                 path_to_json, rs_primitive, ruelle_sullivan, staircase,
                                 transverse_trace)
from laminate.mesh import EquivariantField, PLOneForm, build_torus

from conftest import SHEARED


# --- plaques and transverse cocycles on the annulus ---------------------------

def test_annulus_plaques(annulus_plaques):
    dec = annulus_plaques
    assert dec.n_plaques == 2 and len(dec.virtual) == 1
    assert not dec.flagged and not dec.degenerate
    assert np.all(dec.spreads <= dec.plaque_tol)
    # the jump across the band carries the whole mass, spread over the inner circle
    jump = abs(dec.constants[0] - dec.constants[1])
    assert jump * 2 * math.pi == pytest.approx(1.0, abs=0.02)
    assert dec.summary()["n_plaques"] == 2


def _radial(th, r0, r1):
    return np.array([[r0 * math.cos(th), r0 * math.sin(th)], [r1 * math.cos(th), r1 * math.sin(th)]])


def test_radial_transversals(annulus_plaques):
    dec = annulus_plaques
    mesh = dec.mesh
    inner = mesh.vertices[dec.virtual[0]["vertices"][0]]
    th = math.atan2(inner[1], inner[0])
    path = TransversalPath(np.array([[1.6 * math.cos(th), 1.6 * math.sin(th)], inner]), "in")
    pcs = good_subdivision(path, dec)
    assert len(pcs) == 1
    nu = cocycle(path, dec)
    assert nu >= 0 and nu == pytest.approx(abs(dec.constants[0] - dec.constants[1]), rel=1e-12)
    assert cocycle(path.reversed(), dec) == pytest.approx(nu, rel=1e-12)
    # a path inside the outer plaque carries no measure
    inside = TransversalPath(_radial(th + 0.3, 1.5, 1.8), "plaque")
    assert good_subdivision(inside, dec) == []
    assert cocycle(inside, dec) == 0.0


def test_non_transverse_and_inadmissible_paths(annulus_plaques):
    dec = annulus_plaques
    # an arc that runs along the band is not transverse to it
    th = np.linspace(0, 1.0, 30)
    arc = np.stack([1.4 * np.cos(th), 1.4 * np.sin(th)], axis=1)
    dip = arc * np.where(np.abs(th - 0.5) < 0.3, 1.03 / 1.4, 1.0)[:, None]
    with pytest.raises(ValueError, match="not transverse"):
        good_subdivision(TransversalPath(dip), dec)
    with pytest.raises(ValueError, match="admissible"):
        good_subdivision(TransversalPath(_radial(0.1, 1.02, 1.5)), dec)


def test_cocycle_axioms_on_seeded_family(annulus_plaques):
    fam = annulus_transversals(annulus_plaques, 40, seed=11)
    kinds = {k for k, _, _ in fam}
    assert kinds == {"inward", "outward", "in-out", "plaque"}
    res = cocycle_properties(annulus_plaques, fam, seed=11)
    assert res["passed"], res["failures"]
    text = cocycle_csv(res["rows"])
    assert text.splitlines()[0] == "path_id,nu,subdivision_signs"


def test_path_json_round_trip():
    p = TransversalPath(np.array([[0.0, 1.0], [2.0, 3.5]]), "x")
    q = path_from_json(path_to_json(p))
    assert q.path_id == "x" and np.array_equal(q.polyline, p.polyline)
    with pytest.raises(ValueError):
        TransversalPath(np.array([[0.0, 0.0], [0.0, 0.0]]))
    a, b = TransversalPath(np.array([[0.0, 0], [1, 0], [2, 0]])).split(1)
    assert len(a.polyline) == 2 and len(b.polyline) == 2


# --- measured laminations on tori ----------------------------------------------

def test_lamination_validation():
    with pytest.raises(ValueError, match="primitive"):
        MeasuredLamination([((2, 2), 0.0, 1.0)])
    with pytest.raises(ValueError, match="single"):
        MeasuredLamination([((1, 0), 0.0, 1.0), ((0, 1), 0.5, 1.0)])
    with pytest.raises(ValueError, match="distinct"):
        MeasuredLamination([((1, 0), 0.25, 1.0), ((1, 0), 1.25, 1.0)])
    with pytest.raises(ValueError):
        MeasuredLamination([((1, 0), 0.0, -1.0)])
    lam = MeasuredLamination([((1, 1), 0.1, 0.5), ((1, 1), 0.6, 0.25)], orientation=-1)
    assert lamination_from_json(lamination_to_json(lam)).leaves == lam.leaves
    assert lam.scaled(2).total_weight == pytest.approx(1.5)


def test_leaf_geometry_square_torus():
    lam = MeasuredLamination([((0, 1), 0.0, 1.0)])
    wv, normal, h = leaf_geometry(lam, [[1, 0], [0, 1]])
    assert np.allclose(wv, [0, 1]) and np.allclose(normal, [-1, 0]) and h == pytest.approx(1.0)


def test_current_of_coordinate_forms():
    # a single vertical leaf of weight w on the unit square: T(dx) = 0, T(dy) = w
    mesh = build_torus([[1, 0], [0, 1]], 6)
    lam = MeasuredLamination([((0, 1), 0.37, 2.0)])
    F = len(mesh.triangles)
    assert ruelle_sullivan(lam, PLOneForm(np.tile([1.0, 0], (F, 1))), mesh) == pytest.approx(0.0, abs=1e-14)
    assert ruelle_sullivan(lam, PLOneForm(np.tile([0.0, 1], (F, 1))), mesh) == pytest.approx(2.0, rel=1e-13)


def test_leaf_along_mesh_edges_counts_once():
    mesh = build_torus([[1, 0], [0, 1]], 4)
    lam = MeasuredLamination([((0, 1), 0.0, 1.0)])   # runs along vertical edges
    F = len(mesh.triangles)
    assert ruelle_sullivan(lam, PLOneForm(np.tile([0.0, 1], (F, 1))), mesh) == pytest.approx(1.0, rel=1e-13)


lam_strategy = st.tuples(
    st.sampled_from([(1, 0), (0, 1), (1, 1), (2, 1), (1, -2), (3, 2)]),
    st.lists(st.integers(0, 31), min_size=1, max_size=4, unique=True),
    st.integers(0, 2 ** 16),
)


@given(lam_strategy)
@settings(max_examples=15, deadline=None)
def test_round_trip_and_closedness(data):
    cls, offs, seed = data
    rng = np.random.default_rng(seed)
    mesh = build_torus(SHEARED, 6)
    lam = MeasuredLamination([(cls, o / 32, float(rng.uniform(0.1, 1))) for o in offs])
    v, rec = rs_primitive(lam, mesh, seed=seed)
    W = lam.total_weight
    assert rec["passed"] and rec["max_error"] <= 1e-8 * W
    df = next(r for r in rec["forms"] if r["form"] == "df")
    assert abs(df["current"]) <= 1e-10


def test_staircase_periods_and_band():
    mesh = build_torus(SHEARED, 6)
    lam = MeasuredLamination([((1, 0), 0.2, 0.5), ((1, 0), 0.7, 0.25)])
    v, rec = rs_primitive(lam, mesh)
    _, normal, h = leaf_geometry(lam, mesh.deck)
    x = np.array([[0.13, 0.41]])
    for k, period in enumerate(v.rho.periods):
        jump = staircase(lam, mesh.deck, x + mesh.deck[k]) - staircase(lam, mesh.deck, x)
        assert jump[0] == pytest.approx(period)
    assert 0 < leaf_band(lam, mesh).sum() < len(mesh.triangles)


# --- BV decomposition -------------------------------------------------------------

def test_step_is_one_atom():
    s = np.linspace(0, 1, 1001)
    g = np.where(s < 0.4003, 0.0, 1.7)
    tr = bv_decompose(s, g)
    assert len(tr.atoms) == 1
    assert tr.atom_mass == pytest.approx(1.7, abs=1e-12)
    assert tr.cantor_mass == 0 and tr.ac_mass == 0


def test_linear_is_absolutely_continuous():
    s = np.linspace(0, 1, 2001)
    tr = bv_decompose(s, 3 * s)
    assert tr.ac_mass / tr.total_variation >= 0.99


def test_devils_staircase_is_cantor():
    s = np.linspace(0, 1, 3 ** 10 + 1)
    tr = bv_decompose(s, cantor_staircase(s, 10))
    assert tr.cantor_mass / tr.total_variation >= 0.98
    assert not tr.atoms


def test_cantor_helpers():
    pts = cantor_left_endpoints(3)
    assert len(pts) == 8 and pts[1] == pytest.approx(2 / 27)
    s = np.array([0.0, 1 / 3, 0.5, 2 / 3, 1.0])
    assert np.allclose(cantor_staircase(s, 12), [0, 0.5, 0.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        bv_decompose([0, 1], [0, 1])


def test_transverse_trace_of_linear_field():
    mesh = build_torus([[1, 0], [0, 1]], 4)
    u = EquivariantField(mesh.vertices[:, 0], [1.0, 0.0])
    t, g = transverse_trace(mesh, u, (0.1, 0.2), (2.1, 0.2), 11)
    assert np.allclose(g, 0.1 + 2 * t)
