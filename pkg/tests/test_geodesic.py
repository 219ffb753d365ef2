import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymet import geodesic
from polymet import recipes as R
from polymet.cone import MetricField
from polymet.errors import OutsideChart
from polymet.grid import make_chart


def test_euclidean_spray_vanishes():
    g = R.flat_torus(16)
    assert np.abs(geodesic.spray(g, ([1.0, 2.0], [0.3, -0.7]))).max() < 1e-14


def test_polar_spray():
    g = R.polar_plane((65, 32))
    a = geodesic.spray(g, ([1.0, 0.0], [0.0, 1.0]))
    assert a[0] == pytest.approx(1.0, abs=1e-6)
    assert abs(a[1]) < 1e-10


def test_equator_spray_vanishes():
    g = R.round_sphere((129, 32))
    a = geodesic.spray(g, ([np.pi / 2, 0.0], [0.0, 1.0]))
    assert np.abs(a).max() < 1e-10


def test_euclidean_exp_is_straight_line():
    c = make_chart(2, [(0.0, 3.0), (0.0, 3.0)], [16, 16], [False, False])
    st = geodesic.exp_map(R.euclidean(c), [1.0, 1.0], [0.5, 0.25], 1.0)
    assert np.abs(st.position - [1.5, 1.25]).max() < 1e-12


def test_meridian_great_circle():
    s = R.round_sphere((257, 32))
    delta = s.chart.bounds[0][0]
    t = np.pi / 2 - 2 * delta
    st = geodesic.exp_map(s, [np.pi / 2, 0.0], [1.0, 0.0], t)
    assert st.position[0] == pytest.approx(np.pi / 2 + t, abs=1e-6)
    assert abs(st.position[1]) < 1e-12


def test_leaving_the_chart_raises():
    s = R.round_sphere((129, 32))
    with pytest.raises(OutsideChart):
        geodesic.exp_map(s, [np.pi / 2, 0.0], [1.0, 0.0], np.pi / 2)


def test_irrational_slope_energy_conservation():
    g = R.flat_torus(32)
    st = geodesic.exp_map(g, [0.1, 0.2], [1.0, np.sqrt(2.0)], 10.0, scheme="spectral")
    assert st.speed_drift < 1e-9


def test_speed_drift_on_bumpy_torus():
    g = R.bumpy_torus(0.3, 32)
    st = geodesic.exp_map(g, [1.0, 1.0], [1.0, 0.5], 2.0, 1e-3, scheme="spectral")
    assert st.speed_drift < 2 * 1e-8


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_homogeneity(c):
    g = R.bumpy_torus(0.3, 32)
    x, v = np.array([1.0, 2.0]), np.array([0.6, -0.3])
    a = geodesic.exp_map(g, x, c * v, 1.0, 1e-3, scheme="spectral")
    b = geodesic.exp_map(g, x, v, c, 1e-3, scheme="spectral")
    assert np.abs(geodesic._displacement(g.chart, a.position, b.position)).max() < 1e-9
    assert np.abs(a.velocity - c * b.velocity).max() < 1e-9


@settings(max_examples=6, deadline=None)
@given(k=st.integers(1, 31), seed=st.integers(0, 2**32 - 1))
def test_translation_equivariance(k, seed):
    g = R.bumpy_torus(0.3, 32)
    shift = np.array([2 * np.pi * k / 32, 0.0])
    moved = MetricField(g.chart, np.roll(g.components, -k, axis=0))
    rng = np.random.default_rng(seed)
    x, v = rng.uniform(0, 2 * np.pi, 2), rng.normal(size=2)
    a = geodesic.exp_map(moved, x, v, 1.0, 1e-3, scheme="spectral")
    b = geodesic.exp_map(g, x + shift, v, 1.0, 1e-3, scheme="spectral")
    assert np.abs(geodesic._displacement(g.chart, a.position + shift, b.position)).max() < 1e-6


def test_exp_dependence_constant_path():
    g = R.bumpy_torus(0.1, 16)
    r = geodesic.exp_dependence(g, g, [1.0, 1.0], [1.0, 0.5], 1.0, 4, 1e-2, scheme="spectral")
    assert np.abs(r["displacement"]).max() == 0.0


def test_exp_dependence_scaled_flat_torus_is_degenerate():
    g0 = R.flat_torus(16)
    r = geodesic.exp_dependence(g0, g0.scaled(1.1), [1.0, 1.0], [1.0, 0.5], 2.0, 8, 1e-2, scheme="spectral")
    # every member is constant, so geodesics are straight lines with the same chart velocity
    assert np.abs(r["displacement"]).max() < 1e-12
    assert np.all(np.diff(r["displacement"]) >= 0)


def test_exp_dependence_refines_on_bumpy_torus():
    g0, g1 = R.flat_torus(32), R.bumpy_torus(0.1, 32)
    coarse = geodesic.exp_dependence(g0, g1, [1.0, 1.0], [1.0, 0.5], 2.0, 4, 1e-2, scheme="spectral")
    fine = geodesic.exp_dependence(g0, g1, [1.0, 1.0], [1.0, 0.5], 2.0, 8, 1e-2, scheme="spectral")
    assert geodesic.refinement_defect(coarse, fine, g0.chart) < 1e-4
    inc = fine["increments"]
    assert inc.max() <= 2 * inc.mean()
