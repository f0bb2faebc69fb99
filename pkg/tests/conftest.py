import math

import numpy as np
import pytest

from laminate.mesh import boundary_layer_radii, build_annulus, build_torus
from laminate.penergy import SolverConfig, minimize

SCHEDULE = (2, 4, 8, 16, 32, 64)
SHEARED = [[1.0, 0.0], [0.5, 1.0]]


def graded_annulus(n_theta=64, n_r=32):
    radii = boundary_layer_radii(1.0, 2.0, n_r, 0.002, 1.15)
    return build_annulus(1.0, 2.0, n_theta, n_r, radii=radii)


@pytest.fixture(scope="session")
def annulus_run():
    mesh = graded_annulus()
    _, reports = minimize(mesh, [2 * math.pi], SolverConfig(p_schedule=SCHEDULE))
    return mesh, reports


@pytest.fixture(scope="session")
def torus_run():
    mesh = build_torus(SHEARED, 8)
    _, reports = minimize(mesh, [1.0, 0.0], SolverConfig(p_schedule=SCHEDULE))
    return mesh, reports


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def annulus_plaques(annulus_run):
    from laminate.duality import dual_form, dual_periods, primitive
    from laminate.lamination import plaques
    from laminate.limits import stretch_set
    mesh, reports = annulus_run
    r = reports[-1]
    V = dual_form(mesh, r.field, r.p, r.k_p)
    d = primitive(mesh, V, dual_periods(mesh, V), r.p)
    st = stretch_set(mesh, r.field, r.max_du, 0.1)
    return plaques(mesh, st.triangles, d)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
