"""Verification suites run by ``polymet run`` and ``polymet <suite>``.

Every suite takes a :class:`~polymet.config.SuiteConfig`, draws randomness
only from :func:`polymet.rng.generator` streams named after the suite and
check, and returns ``(checks, tables)``.  Tables hold the series that the
plotting layer renders (trend curves, spectra, discrepancy tables).
"""

from fractions import Fraction

import numpy as np

from . import chern_weil as cw
from . import cone, gauge, geodesic, scales, spectral
from . import recipes as R
from .config import SUITES, validate_suite
from .connection import curvature, curvature_residuals
from .errors import InertiaMismatch, SignatureLost
from .grid import make_chart, symmetric_2tensor, vector_field
from .report import SuiteReport, check_equal, check_le, now_stamp
from .rng import generator


def _rng(cfg, *names):
    return generator(cfg.seed, *names)


def _symmetric_field(rng, chart, modes=2):
    n = chart.dim
    comps = np.zeros(chart.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            f = R.band_limited(rng, chart, modes)
            comps[..., i, j] = f
            comps[..., j, i] = f
    return symmetric_2tensor(chart, comps)


def _vector(rng, chart, modes=2):
    return vector_field(chart, np.stack([R.band_limited(rng, chart, modes) for _ in range(chart.dim)], axis=-1))


# ---------------------------------------------------------------------------
# cone


def convexity_failures(rng, pairs, resolution, t_steps):
    chart = R.torus_chart(resolution)
    a = R.random_pd_components(rng, chart, pairs)
    b = R.random_pd_components(rng, chart, pairs)
    inertia = cone.Inertia.riemannian(2)
    failures = 0
    for p in range(pairs):
        g0, g1 = cone.MetricField(chart, a[p], inertia), cone.MetricField(chart, b[p], inertia)
        for t in np.linspace(0.0, 1.0, t_steps):
            try:
                cone.convex_path(g0, g1, t)
            except SignatureLost:
                failures += 1
    return failures


def stability_trials(rng, resolution, perturbations, fraction=0.99):
    """Random perturbations below the radius, and one built at 2.01x that must break."""
    chart = R.torus_chart(resolution)
    g = cone.MetricField(chart, R.random_pd_components(rng, chart), cone.Inertia.riemannian(2))
    r = cone.stability_radius(g)
    kept = 0
    for _ in range(perturbations):
        e = rng.normal(size=chart.shape + (2, 2))
        e = e + np.swapaxes(e, -1, -2)
        e *= fraction * r * rng.uniform() / np.abs(np.linalg.eigvalsh(e)).max()
        try:
            cone.MetricField(chart, g.components + e, g.declared_inertia)
            kept += 1
        except InertiaMismatch:
            pass
    node = np.unravel_index(np.argmin(np.abs(g.eigenvalues).min(axis=-1)), chart.shape)
    w, v = np.linalg.eigh(g.components[node])
    k = int(np.argmin(np.abs(w)))
    breaking = np.zeros(chart.shape + (2, 2))
    breaking[node] = -np.sign(w[k]) * 2.01 * r * np.outer(v[:, k], v[:, k])
    try:
        cone.MetricField(chart, g.components + breaking, g.declared_inertia)
        broke = False
    except InertiaMismatch:
        broke = True
    return {"radius": r, "kept": kept, "broke": broke}


def suite_cone(cfg):
    p = cfg.params("cone")
    checks = []
    fails = convexity_failures(_rng(cfg, "cone", "convexity"), p["pairs"], p["resolution"], p["t_steps"])
    checks.append(check_equal("cone", "convexity_failures", fails, 0, pairs=p["pairs"], t_steps=p["t_steps"]))
    st = stability_trials(_rng(cfg, "cone", "stability"), p["resolution"], p["perturbations"])
    checks.append(check_equal("cone", "stability_preserved", st["kept"], p["perturbations"], radius=st["radius"]))
    checks.append(check_equal("cone", "breaking_perturbation", st["broke"], True))
    rng = _rng(cfg, "cone", "minors")
    mism = 0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        m = rng.normal(size=(n, n))
        m = m + m.T
        mism += cone.inertia_of(m) != cone.inertia_by_minors(m)
    checks.append(check_equal("cone", "inertia_routes_disagree", int(mism), 0))
    cert = cone.john_metric([[1.0, 1.0], [1.0, -1.0]])
    checks.append(check_le("cone", "john_square", abs(cert.bilipschitz_factor - np.sqrt(2.0)), cfg.tolerance("cone.john_square")))
    return checks, {}


# ---------------------------------------------------------------------------
# curvature


def suite_curvature(cfg):
    p = cfg.params("curvature")
    checks, tables = [], {}
    sph = R.round_sphere((p["sphere_resolution"], 32))
    cs = curvature(sph)
    err = float(np.abs(cs.scalar.values - 2.0).max())
    checks.append(check_le("curvature", "sphere", err, cfg.tolerance("curvature.sphere"), resolution=p["sphere_resolution"]))
    theta = sph.chart.axis_nodes(0)
    tables["sphere_scalar"] = {"theta": theta[::4], "scalar_minus_2": (cs.scalar.values[:, 0] - 2.0)[::4]}
    hp = R.half_plane((16, p["half_plane_resolution"]))
    ch = curvature(hp)
    checks.append(check_le("curvature", "half_plane", float(np.abs(ch.scalar.values + 2.0).max()), cfg.tolerance("curvature.half_plane")))
    ft = R.flat_torus(p["torus_resolution"])
    checks.append(check_le("curvature", "flat_torus", float(np.abs(curvature(ft).scalar.values).max()), cfg.tolerance("curvature.flat_torus")))
    g = R.random_smooth_metric(_rng(cfg, "curvature", "random"), R.torus_chart(p["torus_resolution"]))
    sym, bian = 0.0, 0.0
    for c in (cs, ch, curvature(g, "spectral")):
        res = curvature_residuals(c)
        sym = max(sym, res["antisym_first_pair"], res["antisym_second_pair"], res["pair_swap"])
        bian = max(bian, res["first_bianchi"])
    checks.append(check_le("curvature", "symmetry", sym, cfg.tolerance("curvature.symmetry")))
    checks.append(check_le("curvature", "bianchi", bian, cfg.tolerance("curvature.bianchi")))
    return checks, tables


# ---------------------------------------------------------------------------
# gauge


def adjoint_trials(rng, trials, resolution):
    rows = []
    chart = R.torus_chart(resolution)
    for i in range(trials):
        g = R.random_smooth_metric(rng, chart)
        X = _vector(rng, chart)
        h = _symmetric_field(rng, chart)
        r = gauge.adjoint_identity_residual(g, X, h)
        rows.append({k: r[k] for k in ("lie_pairing", "div_pairing", "bianchi_pairing", "residual")})
    return rows


def conformal_cases(resolution):
    """Three (g, u, scheme) pairs: bumpy torus, flat torus, round sphere."""
    b = R.bumpy_torus(0.3, resolution)
    x, y = b.chart.mesh()
    f = R.flat_torus(resolution)
    s = R.round_sphere((256, 32))
    th, _ = s.chart.mesh()
    return [
        ("bumpy_torus", b, np.sin(x) * np.sin(y), "spectral"),
        ("flat_torus", f, 0.5 * np.cos(x) + 0.2 * np.sin(2 * y), "spectral"),
        ("sphere", s, 0.1 * np.cos(th), "central4"),
    ]


def scaling_law_residual(g, c, scheme):
    base = curvature(g, scheme).scalar.values
    scaled = curvature(g.scaled(np.exp(2.0 * c)), scheme).scalar.values
    return float(np.abs(scaled - np.exp(-2.0 * c) * base).max() / max(np.abs(base).max(), 1.0))


def slice_cases(rng, resolution):
    g = R.flat_torus(resolution)
    chart = g.chart
    x, y = chart.mesh()
    X = vector_field(chart, np.stack([np.sin(y), np.sin(x)], axis=-1))
    hd = np.zeros(chart.shape + (2, 2))
    hd[..., 0, 0], hd[..., 1, 1] = np.cos(y), np.cos(x)
    return [
        ("pure_gauge", g, gauge.lie_derivative_metric(X, g, "spectral")),
        ("divergence_free", g, symmetric_2tensor(chart, hd)),
        ("random_flat", g, _symmetric_field(rng, chart, 3)),
        ("random_bumpy", R.bumpy_torus(0.3, resolution), _symmetric_field(rng, chart, 3)),
    ]


def suite_gauge(cfg):
    p = cfg.params("gauge")
    checks, tables = [], {}
    rows = adjoint_trials(_rng(cfg, "gauge", "adjoint"), p["trials"], p["resolution"])
    tables["adjoint_pairings"] = {k: [r[k] for r in rows] for k in rows[0]}
    checks.append(check_le("gauge", "adjoint", max(r["residual"] for r in rows), cfg.tolerance("gauge.adjoint"), trials=p["trials"]))
    worst, law = 0.0, 0.0
    for name, g, u, scheme in conformal_cases(32):
        r = gauge.conformal_variation_check(g, u, scheme=scheme, tol=cfg.tolerance("gauge.conformal"))
        worst = max(worst, r["max_residual"], r["vol_residual"])
        law = max(law, scaling_law_residual(g, 0.3, scheme))
    checks.append(check_le("gauge", "conformal", worst, cfg.tolerance("gauge.conformal")))
    checks.append(check_le("gauge", "scaling_law", law, cfg.tolerance("gauge.scaling_law")))
    rec, div, cos = 0.0, 0.0, 0.0
    table = {"case": [], "residual": [], "divergence_defect": [], "cosine": [], "degenerate": []}
    for name, g, h in slice_cases(_rng(cfg, "gauge", "slice"), p["slice_resolution"]):
        d = gauge.slice_decompose(g, h)
        rec, div, cos = max(rec, d.residual), max(div, d.divergence_defect), max(cos, d.orthogonality_cosine)
        for k, v in zip(table, (name, d.residual, d.divergence_defect, d.orthogonality_cosine, d.degenerate)):
            table[k].append(v)
    tables["slice"] = table
    checks.append(check_le("gauge", "slice_reconstruction", rec, cfg.tolerance("gauge.slice_reconstruction")))
    checks.append(check_le("gauge", "slice_divergence", div, cfg.tolerance("gauge.slice_divergence")))
    checks.append(check_le("gauge", "slice_cosine", cos, cfg.tolerance("gauge.slice_cosine")))
    return checks, tables


# ---------------------------------------------------------------------------
# geodesic


def suite_geodesic(cfg):
    p = cfg.params("geodesic")
    checks, tables = [], {}
    f = R.flat_torus(p["resolution"])
    x0, v0 = np.array([1.0, 1.0]), np.array([1.0, np.sqrt(2.0)])
    st = geodesic.exp_map(f, x0, v0, p["t_end"], p["dt"], scheme="spectral")
    err = float(np.linalg.norm(geodesic._displacement(f.chart, x0 + p["t_end"] * v0, st.position)))
    checks.append(check_le("geodesic", "flat_line", err, cfg.tolerance("geodesic.flat_line")))
    s = R.round_sphere((129, 32))
    st = geodesic.exp_map(s, [np.pi / 2, 0.0], [0.0, 1.0], np.pi / 2, p["dt"])
    checks.append(check_le("geodesic", "equator", float(np.abs(st.position - [np.pi / 2, np.pi / 2]).max()), cfg.tolerance("geodesic.equator")))
    b = R.bumpy_torus(0.1, p["resolution"])
    st = geodesic.exp_map(b, x0, [1.0, 0.5], p["t_end"], p["dt"], scheme="spectral", record=True)
    checks.append(check_le("geodesic", "drift", st.speed_drift, cfg.tolerance("geodesic.drift")))
    tr = st.trajectory[:: max(1, len(st.trajectory) // 200)]
    tables["bumpy_trajectory"] = {"t": tr[:, 0], "x": tr[:, 1], "y": tr[:, 2], "speed": tr[:, 5]}
    n = p["samples"]
    coarse = geodesic.exp_dependence(f, b, x0, [1.0, 0.5], p["t_end"], n, 1e-2, scheme="spectral")
    fine = geodesic.exp_dependence(f, b, x0, [1.0, 0.5], p["t_end"], 2 * n, 1e-2, scheme="spectral")
    defect = geodesic.refinement_defect(coarse, fine, f.chart)
    checks.append(check_le("geodesic", "refinement", defect, cfg.tolerance("geodesic.refinement"), lipschitz=fine["lipschitz"]))
    tables["exp_dependence"] = {"s": fine["s"], "displacement": fine["displacement"]}
    return checks, tables


# ---------------------------------------------------------------------------
# Chern-Weil

SERIES_ORACLES = {
    "Ahat": [Fraction(1), Fraction(-1, 24), Fraction(7, 5760)],
    "L": [Fraction(1), Fraction(1, 3), Fraction(-1, 45)],
    "Todd": [Fraction(1), Fraction(1, 2), Fraction(1, 12), Fraction(0), Fraction(-1, 720)],
}


def sphere_gauss_bonnet(resolution):
    n = resolution
    deltas = [4 * np.pi / (n + 7), 6 * np.pi / (n + 11), 8 * np.pi / (n + 15)]
    return cw.extrapolate_in_delta(lambda d: R.round_sphere((n, 32), d), deltas)


def suite_chern(cfg):
    p = cfg.params("chern")
    checks, tables = [], {}
    ex = sphere_gauss_bonnet(p["sphere_resolution"])
    tables["gauss_bonnet_delta"] = {"delta": ex["deltas"], "integral": ex["values"]}
    checks.append(check_le("chern", "gauss_bonnet_sphere", abs(ex["extrapolated"] - 2.0), cfg.tolerance("chern.gauss_bonnet_sphere"),
                           extrapolated=ex["extrapolated"]))
    chi = cw.euler_integral(R.bumpy_torus(0.3, p["torus_resolution"]), "spectral")
    checks.append(check_le("chern", "gauss_bonnet_torus", abs(chi), cfg.tolerance("chern.gauss_bonnet_torus")))
    eps = np.linspace(0.0, 0.3, p["family_size"])
    fam = cw.family_constancy([R.bumpy_torus(e, p["torus_resolution"]) for e in eps],
                              lambda g: cw.euler_integral(g, "spectral"), eps)
    tables["euler_family"] = {"eps": eps, "integral": fam["values"]}
    checks.append(check_le("chern", "family", fam["max_deviation"], cfg.tolerance("chern.family")))
    found = {k: [str(c) for c in cw.taylor_coefficients(k, len(v) - 1)] for k, v in SERIES_ORACLES.items()}
    expected = {k: [str(c) for c in v] for k, v in SERIES_ORACLES.items()}
    checks.append(check_equal("chern", "series_coefficients", found, expected))
    return checks, tables


# ---------------------------------------------------------------------------
# index


def cutoff_table(op, cutoffs):
    return [spectral.spectral_cutoff(op, c).rank_below for c in cutoffs]


def suite_index(cfg):
    p = cfg.params("index")
    checks, tables = [], {}
    res = p["torus_resolution"]
    flat, bumpy = R.flat_torus(res), R.bumpy_torus(0.2, res)
    d = spectral.de_rham_index(flat)
    checks.append(check_equal("index", "flat_torus_betti", list(d.betti), [1, 2, 1]))
    path = [cone.convex_path(flat, bumpy, t) for t in np.linspace(0.0, 1.0, p["family_size"])]
    found = []
    for g in path:
        r = spectral.de_rham_index(g)
        found.append([*r.betti, r.index])
    checks.append(check_equal("index", "family_betti_index", found, [[1, 2, 1, 0]] * len(path)))
    sph = spectral.sphere_de_rham_index(p["sphere_band"])
    checks.append(check_equal("index", "sphere_index", [*sph.betti, sph.index], [1, 0, 1, 2], band=p["sphere_band"]))
    op = spectral.hodge_laplacian(R.circle(p["circle_resolution"]), 0)
    lams = [0.5, 1.5, 4.5, 9.5, 16.5]
    ranks = cutoff_table(op, lams)
    tables["circle_cutoff"] = {"cutoff": lams, "rank": ranks}
    checks.append(check_equal("index", "circle_cutoff", ranks, [1, 3, 5, 7, 9]))
    pots = {"tanh": np.tanh, "minus_tanh": lambda x: -np.tanh(x), "constant": lambda x: np.ones_like(x)}
    reps = {k: spectral.callias_index_1d(f, N=p["callias_n"]) for k, f in pots.items()}
    checks.append(check_equal("index", "callias", [reps[k].index for k in pots], [1, -1, 0]))
    checks.append(check_equal("index", "callias_sign_count", [reps[k].sign_count for k in pots], [reps[k].index for k in pots]))
    tables["callias_singular_values"] = {k: np.sort(reps[k].singular_values)[:8] for k in pots}
    add = [spectral.block_index_additivity([reps["tanh"], reps["tanh"]]),
           spectral.block_index_additivity([reps["tanh"], reps["minus_tanh"]])]
    checks.append(check_equal("index", "additivity", [a["assembled_index"] for a in add], [2, 0]))
    return checks, tables


# ---------------------------------------------------------------------------
# scales


def suite_scales(cfg):
    p = cfg.params("scales")
    checks, tables = [], {}
    res = p["resolution"]
    sq = R.euclidean(make_chart(2, [(0.0, 1.0), (0.0, 1.0)], [res, res], [False, False]))
    corner = scales.graph_distances(sq, [(0, sq.chart.size - 1)]).distances[0]
    checks.append(check_le("scales", "euclidean_diagonal", abs(corner - np.sqrt(2)) / np.sqrt(2), cfg.tolerance("scales.euclidean_diagonal")))
    rng = _rng(cfg, "scales", "qi")
    g = R.random_smooth_metric(rng, R.torus_chart(res))
    nodes = rng.choice(g.chart.size, 24, replace=False)
    pairs = [(int(a), int(b)) for i, a in enumerate(nodes) for b in nodes[i + 1 :]]
    s0 = scales.graph_distances(g, pairs)
    same = scales.qi_fit(s0, scales.graph_distances(g, pairs))
    checks.append(check_le("scales", "identical", abs(same.C - 1.0) + same.c, cfg.tolerance("scales.identical")))
    lam = 1.7
    scaled = scales.qi_fit(s0, scales.graph_distances(g.scaled(lam**2), pairs))
    checks.append(check_le("scales", "scaling", abs(scaled.C - lam), cfg.tolerance("scales.scaling"), C=scaled.C))
    trends = {}
    for a, Ts in ((0.0, [5, 10, 20]), (0.05, [5, 10]), (1.0, [5, 10, 20])):
        r = scales.end_growth_diagnostic(a, Ts, per_unit=p["warped_per_unit"])
        trends[f"a={a:g}"] = {"T": [row["T"] for row in r["trend"]], "C": [row["C"] for row in r["trend"]], "flag": r["flag"]}
    tables["warped_trend"] = trends
    checks.append(check_equal("scales", "warped_flags", [trends[k]["flag"] for k in trends], ["BOUNDED", "BOUNDED", "NONUNIFORM"]))
    ft = R.flat_torus(32)
    u = np.sin(ft.chart.mesh()[0])
    checks.append(check_le("scales", "sine_norm", abs(scales.multi_sobolev_norm(ft, u, 1) - 2 * np.pi), cfg.tolerance("scales.sine_norm")))
    h = R.random_smooth_metric(_rng(cfg, "scales", "sobolev"), R.torus_chart(32))
    one, two = scales.multi_sobolev_norm([h], u, 2), scales.multi_sobolev_norm([h, h], u, 2)
    checks.append(check_le("scales", "duplication", abs(two**2 - 2 * one**2) / one**2, cfg.tolerance("scales.duplication")))
    fields = R.band_limited(_rng(cfg, "scales", "fields"), ft.chart, count=p["fields"])
    worst = 0.0
    for k in (0, 1):
        eq = scales.sobolev_equivalence_constants(ft, h, list(fields), k)
        lo, hi = eq["envelope"]
        worst = max(worst, lo - eq["C1"], eq["C2"] - hi)
        tables[f"sobolev_k{k}"] = {"C1": eq["C1"], "C2": eq["C2"], "envelope": [lo, hi]}
    checks.append(check_le("scales", "envelope", max(worst, 0.0), cfg.tolerance("scales.envelope")))
    return checks, tables


RUNNERS = {
    "cone": suite_cone,
    "curvature": suite_curvature,
    "gauge": suite_gauge,
    "geodesic": suite_geodesic,
    "chern": suite_chern,
    "index": suite_index,
    "scales": suite_scales,
}
assert set(RUNNERS) == set(SUITES)


def run_suite(cfg, timestamp=None):
    """Run the configured suite(s) and return a :class:`SuiteReport`."""
    validate_suite(cfg.suite)
    checks, tables = [], {}
    for name in cfg.suites():
        c, t = RUNNERS[name](cfg)
        checks.extend(c)
        if t:
            tables[name] = t
    grids = {s: {k: v for k, v in cfg.params(s).items() if "resolution" in k or k in ("callias_n", "sphere_band")}
             for s in cfg.suites()}
    provenance = {"config": cfg.echo(), "seed": cfg.seed, "grid_resolutions": grids}
    return SuiteReport(cfg.suite, checks, provenance, tables, timestamp if timestamp is not None else now_stamp())
