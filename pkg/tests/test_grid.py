import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymet.errors import ChartMismatch, InvalidBounds, ResolutionTooSmall, SchemeUnsupported
from polymet.grid import (
    Interpolator,
    ScalarField,
    derivative_matrix,
    differentiate,
    integrate,
    make_chart,
    partial,
)

TWO_PI = 2 * np.pi


def circle(n):
    return make_chart(1, [(0.0, TWO_PI)], [n], [True])


def test_node_placement_periodic_and_closed():
    c = make_chart(1, [(0.0, 1.0)], [10], [True])
    assert np.allclose(c.axis_nodes(0), np.arange(10) / 10)
    c = make_chart(1, [(0.0, 1.0)], [11], [False])
    assert np.allclose(c.axis_nodes(0), np.arange(11) / 10)


def test_invalid_charts():
    with pytest.raises(InvalidBounds):
        make_chart(1, [(1.0, 0.0)], [16], [True])
    with pytest.raises(ResolutionTooSmall):
        make_chart(2, [(0, 1), (0, 1)], [16, 4], [True, True])
    with pytest.raises(InvalidBounds):
        make_chart(2, [(0, 1)], [16], [True])


def test_sine_derivative_central4_on_64_nodes():
    c = circle(64)
    x = c.axis_nodes(0)
    d = partial(np.sin(x), c, 0, "central4")
    assert np.abs(d - np.cos(x)).max() < 1e-5


def test_linear_function_exact_with_central2():
    c = make_chart(1, [(0.0, 1.0)], [17], [False])
    x = c.axis_nodes(0)
    assert np.abs(partial(x, c, 0, "central2") - 1.0).max() < 1e-13


def test_sin_squared_integral():
    c = circle(64)
    f = ScalarField(c, np.sin(c.axis_nodes(0)) ** 2)
    assert integrate(f) == pytest.approx(np.pi, abs=1e-13)


def test_spectral_exact_below_nyquist():
    c = circle(32)
    x = c.axis_nodes(0)
    for k in range(1, 16):
        assert np.abs(partial(np.sin(k * x), c, 0, "spectral") - k * np.cos(k * x)).max() < 1e-11 * k


def test_central4_fourth_order_convergence():
    errs = []
    for n in (32, 64, 128):
        c = circle(n)
        x = c.axis_nodes(0)
        errs.append(np.abs(partial(np.sin(3 * x), c, 0, "central4") - 3 * np.cos(3 * x)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.8)


def test_nonperiodic_closure_keeps_fourth_order():
    errs = []
    for n in (33, 65, 129):
        c = make_chart(1, [(0.0, 1.0)], [n], [False])
        x = c.axis_nodes(0)
        errs.append(np.abs(partial(np.exp(x), c, 0, "central4") - np.exp(x)).max())
    assert np.log2(errs[1] / errs[2]) > 3.5


@pytest.mark.xfail(strict=True, reason="central4 error on a degree N/4 mode is order one, far above 1e-6")
def test_central4_matches_spectral_up_to_quarter_nyquist():
    c = circle(64)
    x = c.axis_nodes(0)
    f = np.sin(16 * x)
    assert np.abs(partial(f, c, 0, "central4") - partial(f, c, 0, "spectral")).max() < 1e-6


def test_central4_matches_spectral_on_low_modes():
    # attainable version: agreement at the stencil's truncation error
    c = circle(256)
    x = c.axis_nodes(0)
    f = np.sin(2 * x)
    assert np.abs(partial(f, c, 0, "central4") - partial(f, c, 0, "spectral")).max() < 1e-6


def test_unknown_scheme_rejected():
    c = circle(16)
    with pytest.raises(SchemeUnsupported):
        partial(np.zeros(16), c, 0, "upwind")


def test_spectral_on_closed_axis_rejected():
    c = make_chart(1, [(0.0, 1.0)], [16], [False])
    with pytest.raises(SchemeUnsupported):
        partial(np.zeros(16), c, 0, "spectral")


def test_chart_mismatch():
    with pytest.raises(ChartMismatch):
        integrate(ScalarField(circle(16), np.ones(16)), ScalarField(circle(32), np.ones(32)))


def test_derivative_matrix_agrees_with_operator():
    c = make_chart(2, [(0, TWO_PI), (0, 1)], [16, 17], [True, False])
    rng = np.random.default_rng(0)
    f = rng.normal(size=c.shape)
    for axis in (0, 1):
        D = derivative_matrix(c, axis, "central4")
        assert np.abs(D @ f.ravel() - partial(f, c, axis, "central4").ravel()).max() < 1e-12


def test_trig_interpolation_reproduces_band_limited():
    c = circle(32)
    f = Interpolator(c, np.cos(3 * c.axis_nodes(0)), "spectral")
    for x in (0.1, 1.234, 5.9):
        assert f([x]) == pytest.approx(np.cos(3 * x), abs=1e-12)


coeffs = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(a=coeffs, b=coeffs, scheme=st.sampled_from(["central2", "central4", "spectral"]))
def test_linearity(a, b, scheme):
    c = circle(32)
    x = c.axis_nodes(0)
    f, g = np.sin(x) + np.cos(2 * x), np.exp(np.sin(x))
    lhs = partial(a * f + b * g, c, 0, scheme)
    rhs = a * partial(f, c, 0, scheme) + b * partial(g, c, 0, scheme)
    assert np.abs(lhs - rhs).max() < 1e-12 * (1 + abs(a) + abs(b)) * 10


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(0.0, 2.0), scale=st.floats(0.1, 3.0))
def test_integral_monotone(shift, scale):
    c = circle(32)
    f = np.sin(c.axis_nodes(0)) ** 2
    assert integrate(ScalarField(c, f + shift)) >= integrate(ScalarField(c, f)) - 1e-12
    assert integrate(ScalarField(c, scale * f)) == pytest.approx(scale * integrate(ScalarField(c, f)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scheme=st.sampled_from(["central2", "central4", "spectral"]))
def test_integration_by_parts_on_torus(seed, scheme):
    rng = np.random.default_rng(seed)
    c = make_chart(2, [(0, TWO_PI), (0, TWO_PI)], [16, 16], [True, True])
    u, v = rng.normal(size=(2,) + c.shape)
    for axis in (0, 1):
        lhs = integrate(ScalarField(c, partial(u, c, axis, scheme) * v))
        rhs = -integrate(ScalarField(c, u * partial(v, c, axis, scheme)))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_differentiate_field_wrapper():
    c = circle(32)
    f = ScalarField(c, np.sin(c.axis_nodes(0)))
    d = differentiate(f, 0, "spectral")
    assert np.abs(d.values - np.cos(c.axis_nodes(0))).max() < 1e-12
