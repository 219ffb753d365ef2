import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymet import recipes as R
from polymet import scales
from polymet.cone import Polymetric
from polymet.errors import EmptySamples
from polymet.grid import make_chart

TWO_PI = 2 * np.pi


def square(n=33):
    return R.euclidean(make_chart(2, [(0.0, 1.0), (0.0, 1.0)], [n, n], [False, False]))


def sample_pairs(rng, size, count=16):
    nodes = rng.choice(size, count, replace=False)
    return [(int(a), int(b)) for i, a in enumerate(nodes) for b in nodes[i + 1 :]]


def test_corner_to_corner_distance():
    g = square()
    d = scales.graph_distances(g, [(0, g.chart.size - 1)]).distances[0]
    assert abs(d - np.sqrt(2)) / np.sqrt(2) < 0.08


def test_axis_distance_is_within_lattice_bound():
    # off-lattice directions lose at most the documented 8%
    g = square()
    n = g.chart.resolution[1]
    d = scales.graph_distances(g, [(0, 2 * n + n - 1)]).distances[0]
    exact = np.hypot(2 / 32, 1.0)
    assert exact <= d <= 1.08 * exact


@settings(max_examples=10, deadline=None)
@given(lam=st.floats(0.2, 5.0), seed=st.integers(0, 2**32 - 1))
def test_distances_scale_with_metric(lam, seed):
    rng = np.random.default_rng(seed)
    g = R.random_smooth_metric(rng, R.torus_chart(16))
    pairs = sample_pairs(rng, g.chart.size, 6)
    a = scales.graph_distances(g, pairs).distances
    b = scales.graph_distances(g.scaled(lam**2), pairs).distances
    assert np.abs(b - lam * a).max() < 1e-12 * lam * a.max()


def test_product_cylinder_axis_distance():
    T = 5.0
    g = R.product_end(T, resolution=(31, 32))
    d = scales.graph_distances(g, [(0, (g.chart.resolution[0] - 1) * 32)]).distances[0]
    assert d == pytest.approx(T, abs=1e-12)


def test_empty_pairs_rejected():
    with pytest.raises(EmptySamples):
        scales.graph_distances(square(9), [])


def test_identical_and_scaled_fits():
    rng = np.random.default_rng(0)
    g = R.random_smooth_metric(rng, R.torus_chart(24))
    pairs = sample_pairs(rng, g.chart.size)
    s0 = scales.graph_distances(g, pairs)
    same = scales.qi_fit(s0, scales.graph_distances(g, pairs))
    assert (same.C, same.c) == (1.0, 0.0)
    fit = scales.qi_fit(s0, scales.graph_distances(g.scaled(2.5**2), pairs))
    assert fit.C == pytest.approx(2.5, abs=1e-4)
    assert fit.c < 1e-8


def test_product_end_fit():
    T = 10.0
    g0 = R.product_end(T, resolution=(61, 32))
    g1 = R.product_end(T, lambda t: 1 + 0.3 * np.sin(t), resolution=(61, 32))
    nodes = scales.end_sample_nodes(g0.chart)
    pairs = [(p, q) for i, p in enumerate(nodes) for q in nodes[i + 1 :]]
    fit = scales.qi_fit(scales.graph_distances(g0, pairs), scales.graph_distances(g1, pairs))
    assert fit.C <= 1.3
    assert fit.residual_violations == 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), budget=st.sampled_from([0.0, 0.05, 0.2]))
def test_fit_satisfies_its_certificate_and_is_monotone(seed, budget):
    rng = np.random.default_rng(seed)
    chart = R.torus_chart(16)
    g0, g1 = R.random_smooth_metric(rng, chart), R.random_smooth_metric(rng, chart)
    pairs = sample_pairs(rng, chart.size, 10)
    s0, s1 = scales.graph_distances(g0, pairs), scales.graph_distances(g1, pairs)
    fit = scales.qi_fit(s0, s1, budget)
    assert fit.residual_violations == 0
    assert scales.qi_violations(s0, s1, fit.C, fit.c) == 0
    half = len(pairs) // 2
    sub = [scales.DistanceSampleSet(s.point_pairs[:half], s.distances[:half], s.metric_id) for s in (s0, s1)]
    assert scales.qi_fit(*sub, budget).C <= fit.C + 1e-9


def test_warped_end_trends():
    flat = scales.end_growth_diagnostic(0.0, [5, 10, 20])
    assert [r["C"] for r in flat["trend"]] == [1.0, 1.0, 1.0]
    assert flat["flag"] == "BOUNDED"
    slow = scales.end_growth_diagnostic(0.05, [5, 10])
    assert max(r["C"] for r in slow["trend"]) < 2.0
    assert slow["flag"] == "BOUNDED"
    fast = scales.end_growth_diagnostic(1.0, [5, 10, 20])
    assert fast["strictly_increasing"]
    assert fast["flag"] == "NONUNIFORM"


def test_unit_constant_on_unit_torus():
    g = R.flat_torus(16, length=1.0)
    assert scales.multi_sobolev_norm(g, np.ones(g.chart.shape), 0) == pytest.approx(1.0, abs=1e-14)


def test_sine_norm_closed_form():
    g = R.flat_torus(32)
    u = np.sin(g.chart.mesh()[0])
    assert scales.multi_sobolev_norm(g, u, 1) == pytest.approx(TWO_PI, abs=1e-8)
    # k = 2 adds int |Hess u|^2 = int sin^2 = 2 pi^2
    assert scales.multi_sobolev_norm(g, u, 2) == pytest.approx(np.sqrt(6 * np.pi**2), abs=1e-8)


def test_duplication_doubles_squared_norm():
    g = R.bumpy_torus(0.3, 24)
    u = np.cos(g.chart.mesh()[1])
    for k in (0, 1, 2):
        one = scales.multi_sobolev_norm(Polymetric([g]), u, k)
        two = scales.multi_sobolev_norm(Polymetric([g, g]), u, k)
        assert two**2 == pytest.approx(2 * one**2, rel=1e-14)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(-4.0, 4.0))
def test_norm_axioms(seed, lam):
    rng = np.random.default_rng(seed)
    g = R.bumpy_torus(0.3, 16)
    u, v = R.band_limited(rng, g.chart, count=2)
    n = lambda f: scales.multi_sobolev_norm([g, R.flat_torus(16)], f, 1)  # noqa: E731
    assert n(lam * u) == pytest.approx(abs(lam) * n(u), rel=1e-12, abs=1e-14)
    assert n(u + v) <= n(u) + n(v) + 1e-12


def test_equivalence_identical_and_scaled():
    g = R.bumpy_torus(0.3, 16)
    fields = list(R.band_limited(np.random.default_rng(1), g.chart, count=6))
    eq = scales.sobolev_equivalence_constants(g, g, fields, 1)
    assert eq["C1"] == pytest.approx(1.0, abs=1e-14) and eq["C2"] == pytest.approx(1.0, abs=1e-14)
    lam = 1.8
    eq = scales.sobolev_equivalence_constants(g, g.scaled(lam**2), fields, 0)
    assert eq["C1"] == pytest.approx(lam, rel=1e-12)
    assert eq["C2"] == pytest.approx(lam, rel=1e-12)


@pytest.mark.parametrize("k", [0, 1])
def test_empirical_constants_inside_envelope(k):
    g, h = R.flat_torus(24), R.bumpy_torus(0.3, 24)
    fields = list(R.band_limited(np.random.default_rng(2), g.chart, count=30))
    eq = scales.sobolev_equivalence_constants(g, h, fields, k)
    lo, hi = eq["envelope"]
    assert lo <= eq["C1"] <= eq["C2"] <= hi
    rmin, rmax = scales.eigenvalue_ratio_range(g, h)
    rho = max(rmax, 1 / rmin)
    assert eq["C2"] / eq["C1"] <= rho ** (k + g.dim / 2)


def test_envelope_undefined_for_unpaired_or_high_order():
    g = R.flat_torus(16)
    assert scales.analytic_envelope([g], [g, g], 1) is None
    assert scales.analytic_envelope(g, g, 2) is None


def test_constants_compose():
    chart = R.torus_chart(16)
    rng = np.random.default_rng(8)
    G, H, K = R.flat_torus(16), R.bumpy_torus(0.3, 16), R.random_smooth_metric(rng, chart)
    fields = list(R.band_limited(rng, chart, count=12))
    gh = scales.sobolev_equivalence_constants(G, H, fields, 1)
    hk = scales.sobolev_equivalence_constants(H, K, fields, 1)
    gk = scales.sobolev_equivalence_constants(G, K, fields, 1)
    assert gk["C1"] >= gh["C1"] * hk["C1"] * (1 - 1e-12)
    assert gk["C2"] <= gh["C2"] * hk["C2"] * (1 + 1e-12)
