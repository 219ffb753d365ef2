import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymet import cone
from polymet import recipes as R
from polymet.cone import Inertia, MetricField
from polymet.errors import DegenerateBody, InertiaMismatch, SignatureLost

EXAMPLES = [
    (np.diag([1.0, 2.0]), Inertia(2, 0)),
    (np.diag([1.0, -1.0]), Inertia(1, 1)),
    (np.array([[0.0, 1.0], [1.0, 0.0]]), Inertia(1, 1)),
    (np.diag([-1.0, -3.0, 2.0]), Inertia(1, 2)),
    (np.diag([1.0, 0.0]), Inertia(1, 0, True)),
]


@pytest.mark.parametrize("m,expected", EXAMPLES)
def test_inertia_examples(m, expected):
    assert cone.inertia_of(m) == expected


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4, 6):
        a = rng.normal(size=(n, n))
        a = a + a.T
        assert np.allclose(cone.jacobi_eigvalsh(a), np.linalg.eigvalsh(a), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sylvester_congruence(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        a = rng.normal(size=(n, n))
        a = a + a.T
        p = rng.normal(size=(n, n)) + 3 * np.eye(n)
        assert cone.inertia_of(p.T @ a @ p) == cone.inertia_of(a)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_minors_route_agrees_when_conclusive(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    a = a + a.T
    by_minors = cone.inertia_by_minors(a)
    if by_minors is not None:
        assert by_minors == cone.inertia_of(a)


def test_stability_radius_examples():
    c = R.torus_chart(16)
    assert cone.stability_radius(R.flat_torus(16)) == pytest.approx(0.5)
    comps = np.broadcast_to(np.diag([4.0, 9.0]), c.shape + (2, 2))
    assert cone.stability_radius(MetricField(c, comps)) == pytest.approx(2.0)


def test_metric_field_rejects_wrong_inertia():
    c = R.torus_chart(16)
    comps = np.broadcast_to(np.diag([1.0, -1.0]), c.shape + (2, 2))
    with pytest.raises(InertiaMismatch) as exc:
        MetricField(c, comps, Inertia.riemannian(2))
    assert exc.value.report[0]["node"] == (0, 0)


def test_convex_path_endpoints():
    rng = np.random.default_rng(3)
    c = R.torus_chart(16)
    a, b = R.random_pd_components(rng, c, 2)
    g0, g1 = MetricField(c, a), MetricField(c, b)
    assert np.allclose(cone.convex_path(g0, g1, 0.0).components, g0.components)
    assert np.allclose(cone.convex_path(g0, g1, 1.0).components, g1.components)


def test_indefinite_endpoints_cancel():
    c = R.torus_chart(16)
    g0 = MetricField(c, np.broadcast_to(np.diag([1.0, -1.0]), c.shape + (2, 2)))
    g1 = MetricField(c, np.broadcast_to(np.diag([-1.0, 1.0]), c.shape + (2, 2)))
    with pytest.raises(SignatureLost):
        cone.convex_path(g0, g1, 0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 1.0))
def test_riemannian_cone_is_convex(seed, t):
    rng = np.random.default_rng(seed)
    c = R.torus_chart(8)
    a, b = R.random_pd_components(rng, c, 2)
    g = cone.convex_path(MetricField(c, a), MetricField(c, b), t)
    assert g.is_riemannian


def test_validate_polymetric_reports_component():
    c = R.torus_chart(16)
    flat = R.flat_torus(16)
    lorentz = MetricField(c, np.broadcast_to(np.diag([1.0, -1.0]), c.shape + (2, 2)))
    pm = cone.validate_polymetric([flat, lorentz], [Inertia(2, 0), Inertia(1, 1)])
    assert len(pm) == 2
    with pytest.raises(InertiaMismatch) as exc:
        cone.validate_polymetric([flat, lorentz], [Inertia(2, 0), Inertia(2, 0)])
    assert exc.value.report[0]["component"] == 2


def test_john_circle_is_round():
    t = np.linspace(0, np.pi, 400, endpoint=False)
    cert = cone.john_metric(np.stack([np.cos(t), np.sin(t)], -1))
    assert np.abs(cert.matrix - np.eye(2)).max() < 1e-6
    assert cert.bilipschitz_factor == pytest.approx(1.0, abs=1e-4)


def test_john_square_factor_and_contains_body():
    cert = cone.john_metric([[1.0, 1.0], [1.0, -1.0]])
    assert cert.bilipschitz_factor == pytest.approx(np.sqrt(2), abs=1e-6)
    assert np.all(cert.norm(np.array([[1.0, 1.0], [-1.0, 1.0]])) <= 1 + 1e-12)


def test_john_degenerate_body():
    with pytest.raises(DegenerateBody):
        cone.john_metric([[1.0, 0.0], [2.0, 0.0]])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_john_factor_bounded_by_sqrt_n(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 2))
    cert = cone.john_metric(pts)
    assert 1.0 - 1e-9 <= cert.bilipschitz_factor <= np.sqrt(2) + 1e-6
