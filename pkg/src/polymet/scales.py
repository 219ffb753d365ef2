"""Large-scale comparisons of metrics: grid-graph distances, quasi-isometry
fits, warped-end diagnostics, and multi-metric Sobolev norms."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .cone import MetricField, Polymetric
from .connection import christoffel, covariant_derivative_array, inverse_metric, norm_squared_array, volume_density
from .errors import DisconnectedGraph, EmptySamples
from .grid import integrate_array
from .recipes import product_end

# ---------------------------------------------------------------------------
# distances


@dataclass(frozen=True)
class DistanceSampleSet:
    point_pairs: tuple
    distances: np.ndarray
    metric_id: str = ""


def _offsets(dim):
    grids = np.array(np.meshgrid(*[[-1, 0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    return [o for o in grids if np.any(o) and tuple(o) > tuple(-o)]


def grid_graph(g):
    """Sparse graph of nodes joined to all king-move neighbours.

    An edge's weight is the length of the straight coordinate segment in the
    average of the endpoint metrics (a midpoint rule for ``int |c'|_g``).
    ``g`` is a MetricField or a ``(chart, components)`` pair; the latter
    skips signature validation for metrics whose conditioning exceeds double
    precision (far out on exponentially warped ends).
    """
    chart, comps = (g.chart, g.components) if isinstance(g, MetricField) else g
    comps = np.asarray(comps, float)
    shape = chart.shape
    idx = np.arange(chart.size).reshape(shape)
    h = np.array(chart.spacing)
    rows, cols, wts = [], [], []
    for off in _offsets(chart.dim):
        dst_idx = idx
        valid = np.ones(shape, dtype=bool)
        shifted_g = comps
        for a, o in enumerate(off):
            if o == 0:
                continue
            dst_idx = np.roll(dst_idx, -o, axis=a)
            shifted_g = np.roll(shifted_g, -o, axis=a)
            if not chart.periodic[a]:
                sl = [slice(None)] * chart.dim
                sl[a] = slice(shape[a] - 1, None) if o > 0 else slice(0, 1)
                valid[tuple(sl)] = False
        delta = off * h
        gmid = 0.5 * (comps + shifted_g)
        length = np.sqrt(np.einsum("i,...ij,j->...", delta, gmid, delta))
        rows.append(idx[valid])
        cols.append(dst_idx[valid])
        wts.append(length[valid])
    r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    return sp.csr_matrix((w, (r, c)), shape=(chart.size, chart.size))


def graph_distances(g, pairs=None, sources=None, metric_id=""):
    """Shortest-path distances between flat node indices.

    ``pairs`` is a sequence of ``(i, j)``; if omitted, all pairs among
    ``sources`` are returned (both orders and the diagonal included).
    """
    graph = grid_graph(g)
    if pairs is None:
        if sources is None:
            raise EmptySamples("give pairs or sources")
        sources = [int(s) for s in sources]
        pairs = [(a, b) for a in sources for b in sources]
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        raise EmptySamples("no point pairs requested")
    src = sorted({a for a, _ in pairs})
    dist = dijkstra(graph, directed=False, indices=src)
    row = {s: i for i, s in enumerate(src)}
    d = np.array([dist[row[a], b] for a, b in pairs])
    if not np.all(np.isfinite(d)):
        raise DisconnectedGraph("some requested node pairs are not connected in the grid graph")
    return DistanceSampleSet(tuple(pairs), d, metric_id)


# ---------------------------------------------------------------------------
# quasi-isometry fits


@dataclass(frozen=True)
class QIFit:
    C: float
    c: float
    residual_violations: int
    c_budget: float


def _additive_needed(d0, d1, C):
    return max(0.0, float(np.max(d1 - C * d0)), float(np.max(d0 / C - d1)))


def qi_violations(s0, s1, C, c, slack=1e-12):
    d0, d1 = np.asarray(s0.distances), np.asarray(s1.distances)
    tol = slack * max(float(d0.max()), float(d1.max()), 1.0)
    lo = d0 / C - c - tol
    hi = C * d0 + c + tol
    return int(np.sum((d1 < lo) | (d1 > hi)))


def qi_fit(s0: DistanceSampleSet, s1: DistanceSampleSet, c_budget=0.0, tol=1e-10, C_max=1e6):
    """Smallest ``C >= 1`` whose minimal additive constant fits ``c_budget``.

    For a given ``C`` the least admissible ``c`` is
    ``max(0, max(d1 - C d0), max(d0 / C - d1))``, nonincreasing in ``C``.
    With ``c`` unconstrained every sample set fits at ``C = 1``, so the
    additive budget fixes the trade-off; ``c_budget = 0`` is the
    bi-Lipschitz fit.  The crossing is located by a coarse geometric grid
    refined with bisection to ``tol``.
    """
    if len(s0.distances) == 0 or len(s1.distances) == 0:
        raise EmptySamples("qi_fit needs at least one sampled pair")
    if tuple(s0.point_pairs) != tuple(s1.point_pairs):
        raise ValueError("sample sets must share their point pairs")
    d0, d1 = np.asarray(s0.distances, float), np.asarray(s1.distances, float)
    need = lambda C: _additive_needed(d0, d1, C)  # noqa: E731
    if need(1.0) <= c_budget:
        C = 1.0
    else:
        grid = np.geomspace(1.0, C_max, 121)
        vals = np.array([need(C) for C in grid])
        ok = np.nonzero(vals <= c_budget)[0]
        if not ok.size:
            raise ValueError(f"no C <= {C_max} meets the additive budget {c_budget}")
        hi = grid[ok[0]]
        lo = grid[ok[0] - 1]
        while hi - lo > tol * hi:
            mid = 0.5 * (lo + hi)
            if need(mid) <= c_budget:
                hi = mid
            else:
                lo = mid
        C = hi
    c = need(C)
    return QIFit(float(C), float(c), qi_violations(s0, s1, C, c), float(c_budget))


def end_sample_nodes(chart, per_ring=8, rings=None):
    """Flat indices spread along rings ``t = const`` of a cylinder chart."""
    nt, nth = chart.resolution
    rings = rings if rings is not None else np.unique(np.linspace(0, nt - 1, 5).round().astype(int))
    cols = np.unique(np.linspace(0, nth, per_ring, endpoint=False).round().astype(int) % nth)
    return [int(r * nth + c) for r in rings for c in cols]


def _warped_components(a, T, resolution):
    chart = product_end(T, None, resolution).chart
    t, _ = chart.mesh()
    comps = np.zeros(chart.shape + (2, 2))
    comps[..., 0, 0] = 1.0
    comps[..., 1, 1] = np.exp(2.0 * a * t)
    return chart, comps


def end_growth_diagnostic(a, T_list, reference=None, per_unit=6, n_theta=32, growth_factor=2.0, c_budget=0.0):
    """Fitted bi-Lipschitz constant ``C(T)`` of ``dt^2 + e^{2at} dtheta^2``
    against the product end, for each truncation length ``T``.

    ``NONUNIFORM`` is flagged when ``C(T)`` increases strictly along
    ``T_list`` and the last value exceeds the first by ``growth_factor``.
    """
    rows = []
    for T in T_list:
        nt = int(round(per_unit * T)) + 1
        g1 = _warped_components(a, T, (nt, n_theta))
        g0 = reference(T, (nt, n_theta)) if reference else product_end(T, None, (nt, n_theta))
        nodes = end_sample_nodes(g0.chart)
        pairs = [(p, q) for i, p in enumerate(nodes) for q in nodes[i + 1 :]]
        s0 = graph_distances(g0, pairs, metric_id="product")
        s1 = graph_distances(g1, pairs, metric_id=f"warped a={a}")
        fit = qi_fit(s0, s1, c_budget)
        rows.append({"T": float(T), "C": fit.C, "c": fit.c, "violations": fit.residual_violations})
    Cs = [r["C"] for r in rows]
    increasing = all(b > a_ for a_, b in zip(Cs, Cs[1:]))
    nonuniform = bool(len(Cs) > 1 and increasing and Cs[-1] >= growth_factor * Cs[0])
    return {"a": float(a), "trend": rows, "strictly_increasing": increasing, "flag": "NONUNIFORM" if nonuniform else "BOUNDED"}


# ---------------------------------------------------------------------------
# Sobolev norms


def _components(G):
    if isinstance(G, Polymetric):
        return list(G.components)
    if isinstance(G, MetricField):
        return [G]
    return list(G)


def _field_slots(u):
    values = getattr(u, "values", None)
    if values is not None:
        return np.asarray(values, float), 0, 0
    if hasattr(u, "components"):
        return np.asarray(u.components, float), u.contravariant_rank, u.covariant_rank
    return np.asarray(u, float), 0, 0


def sobolev_terms(g: MetricField, u, k, scheme="spectral"):
    """``[int |nabla^j u|_g^2 dvol_g for j = 0..k]`` for one metric."""
    if not 0 <= k <= 2:
        raise ValueError("Sobolev order must be 0, 1 or 2")
    conn = christoffel(g, scheme)
    vol = volume_density(g)
    t, upper, lower = _field_slots(u)
    out = []
    for j in range(k + 1):
        dens = norm_squared_array(t, g.components, conn.g_inv, upper, lower) if upper + lower else t**2
        out.append(integrate_array(dens * vol, g.chart))
        if j < k:
            t = covariant_derivative_array(t, conn, upper, lower)
            lower += 1
    return out


def multi_sobolev_norm(G, u, k=1, scheme="spectral"):
    """``(sum_i sum_{j<=k} int |nabla^(i),j u|^2_{g_i} dvol_{g_i})^{1/2}``."""
    total = sum(sum(sobolev_terms(g, u, k, scheme)) for g in _components(G))
    return float(np.sqrt(total))


def eigenvalue_ratio_range(g: MetricField, h: MetricField):
    """Extreme nodewise eigenvalues of ``g^-1 h``."""
    g_inv = inverse_metric(g)[0]
    ev = np.linalg.eigvals(np.einsum("...ij,...jk->...ik", g_inv, h.components)).real
    return float(ev.min()), float(ev.max())


def analytic_envelope(G, H, k, field_rank=0):
    """Bounds ``[lo, hi]`` on ``||u||_H / ||u||_G`` from nodewise eigenvalue ratios.

    Valid for scalar fields with ``k <= 1`` (first derivatives do not see the
    connection) and componentwise paired polymetrics; ``None`` otherwise.
    """
    Gs, Hs = _components(G), _components(H)
    if field_rank or k > 1 or len(Gs) != len(Hs):
        return None
    lo, hi = np.inf, 0.0
    for g, h in zip(Gs, Hs):
        n = g.dim
        rmin, rmax = eigenvalue_ratio_range(g, h)
        vol_lo, vol_hi = rmin ** (n / 2), rmax ** (n / 2)
        terms_lo, terms_hi = [vol_lo], [vol_hi]
        if k == 1:
            terms_lo.append(vol_lo / rmax)
            terms_hi.append(vol_hi / rmin)
        lo, hi = min(lo, min(terms_lo)), max(hi, max(terms_hi))
    return float(np.sqrt(lo)), float(np.sqrt(hi))


def sobolev_equivalence_constants(G, H, field_samples, k=1, scheme="spectral"):
    """Empirical ``C1 = min ||u||_H / ||u||_G`` and ``C2 = max`` over the samples."""
    ratios = []
    for u in field_samples:
        ng = multi_sobolev_norm(G, u, k, scheme)
        nh = multi_sobolev_norm(H, u, k, scheme)
        ratios.append(nh / ng)
    if not ratios:
        raise EmptySamples("no sample fields")
    rank = 0 if getattr(field_samples[0], "values", None) is not None or np.ndim(field_samples[0]) == _components(G)[0].dim else 1
    return {
        "C1": float(min(ratios)),
        "C2": float(max(ratios)),
        "ratios": np.array(ratios),
        "envelope": analytic_envelope(G, H, k, rank),
    }
