"""Levi-Civita data of a metric on a chart.

Index layout follows the grid convention: grid axes first, then tensor slots
with upper indices before lower ones.  ``gamma[..., k, i, j]`` is
``Gamma^k_ij`` and ``riemann[..., l, i, j, k]`` is ``R^l_ijk`` with

    R^l_ijk = d_j Gamma^l_ik - d_k Gamma^l_ij + Gamma^l_jm Gamma^m_ik - Gamma^l_km Gamma^m_ij

so that ``Ric_ij = R^k_ikj`` and the round sphere has positive curvature.
"""

from dataclasses import dataclass

import numpy as np

from .cone import Inertia, MetricField
from .errors import MapsOutsideChart, SingularJacobian, SingularMetric
from .grid import Interpolator, ScalarField, TensorField, _same_chart, gradient_array

COND_LIMIT = 1e12


def inverse_metric(g: MetricField):
    """Nodewise inverse via symmetric eigendecomposition.

    Returns ``(g_inv, condition)``; raises SingularMetric when the worst
    condition number exceeds ``COND_LIMIT``.
    """
    lam, vec = np.linalg.eigh(g.components)
    absl = np.abs(lam)
    cond = absl.max(axis=-1) / np.maximum(absl.min(axis=-1), np.finfo(float).tiny)
    worst = float(cond.max())
    if not np.isfinite(worst) or worst > COND_LIMIT:
        idx = tuple(int(i) for i in np.unravel_index(np.argmax(cond), cond.shape))
        raise SingularMetric(f"metric condition number {worst:.3e} at node {idx} exceeds {COND_LIMIT:.0e}")
    ginv = np.einsum("...ik,...k,...jk->...ij", vec, 1.0 / lam, vec)
    return 0.5 * (ginv + np.swapaxes(ginv, -1, -2)), cond


def volume_density(g: MetricField):
    return np.sqrt(np.abs(np.linalg.det(g.components)))


@dataclass(frozen=True)
class ConnectionCoeffs:
    chart: object
    gamma: np.ndarray
    first_kind: np.ndarray
    g_inv: np.ndarray
    condition: np.ndarray
    scheme: str


def christoffel(g: MetricField, scheme="central4"):
    """Christoffel symbols ``Gamma^k_ij`` from the Koszul formula."""
    g_inv, cond = inverse_metric(g)
    dg = gradient_array(g.components, g.chart, scheme)  # [..., i, j, m] = d_m g_ij
    # first kind: G[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    d_i_gjl = np.einsum("...jli->...lij", dg)
    d_j_gil = np.einsum("...ilj->...lij", dg)
    d_l_gij = np.einsum("...ijl->...lij", dg)
    first = 0.5 * (d_i_gjl + d_j_gil - d_l_gij)
    first = 0.5 * (first + np.swapaxes(first, -1, -2))
    gamma = np.einsum("...kl,...lij->...kij", g_inv, first)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    for a in (gamma, first, g_inv):
        a.setflags(write=False)
    return ConnectionCoeffs(g.chart, gamma, first, g_inv, cond, scheme)


@dataclass(frozen=True)
class CurvatureData:
    chart: object
    riemann: np.ndarray
    riemann_lower: np.ndarray
    ricci: TensorField
    scalar: ScalarField
    volume_density: ScalarField
    connection: ConnectionCoeffs


def curvature(g: MetricField, scheme="central4"):
    """Riemann, Ricci and scalar curvature plus the volume density.

    The fully covariant tensor is assembled from first-kind symbols,

        R_pijk = d_j G_p,ik - d_k G_p,ij - G_l,jp Gamma^l_ik + G_l,kp Gamma^l_ij,

    which equals ``g_pl R^l_ijk`` once ``d g`` is expanded through metric
    compatibility.  It avoids differentiating ``g^-1`` (steep near a polar
    axis) and keeps the pair antisymmetries and first Bianchi identity exact
    up to rounding, because discrete partials along different axes commute.
    """
    conn = christoffel(g, scheme)
    G, gam = conn.first_kind, conn.gamma
    dG = gradient_array(G, g.chart, scheme)  # [..., p, i, k, j] = d_j G_p,ik
    lower = np.einsum("...pikj->...pijk", dG) - dG
    lower -= np.einsum("...ljp,...lik->...pijk", G, gam)
    lower += np.einsum("...lkp,...lij->...pijk", G, gam)
    riemann = np.einsum("...lp,...pijk->...lijk", conn.g_inv, lower)
    ricci = np.einsum("...kikj->...ij", riemann)
    scal = np.einsum("...ij,...ij->...", conn.g_inv, ricci)
    vol = volume_density(g)
    for a in (lower, riemann):
        a.setflags(write=False)
    return CurvatureData(
        g.chart,
        riemann,
        lower,
        TensorField(g.chart, ricci, 2, 0, symmetric=True),
        ScalarField(g.chart, scal),
        ScalarField(g.chart, vol),
        conn,
    )


def gauss_curvature(g: MetricField, scheme="central4"):
    """Sectional curvature of a surface, ``R_1212 / det g``."""
    if g.dim != 2:
        raise ValueError("gauss_curvature is defined for surfaces")
    curv = curvature(g, scheme)
    return curv.riemann_lower[..., 0, 1, 0, 1] / np.linalg.det(g.components)


def curvature_residuals(curv: CurvatureData):
    """Relative residuals of the algebraic curvature identities."""
    R = curv.riemann_lower
    scale = max(float(np.abs(R).max()), 1e-300)
    bianchi = R + np.einsum("...lijk->...ljki", R) + np.einsum("...lijk->...lkij", R)
    contraction = curv.ricci.components - np.einsum("...kikj->...ij", curv.riemann)
    return {
        "antisym_first_pair": float(np.abs(R + np.swapaxes(R, -4, -3)).max()) / scale,
        "antisym_second_pair": float(np.abs(R + np.swapaxes(R, -2, -1)).max()) / scale,
        "pair_swap": float(np.abs(R - np.einsum("...lijk->...jkli", R)).max()) / scale,
        "first_bianchi": float(np.abs(bianchi).max()) / scale,
        "ricci_contraction": float(np.abs(contraction).max()),
        "min_volume_density": float(curv.volume_density.values.min()),
    }


# ---------------------------------------------------------------------------
# covariant derivatives and norms


def covariant_derivative_array(values, conn: ConnectionCoeffs, upper, lower):
    """``nabla T`` for an array with ``upper`` then ``lower`` tensor slots.

    The derivative direction is appended as the last slot.
    """
    chart = conn.chart
    values = np.asarray(values, dtype=float)
    out = gradient_array(values, chart, conn.scheme)
    grid = values.ndim - upper - lower
    gam = conn.gamma
    for s in range(upper + lower):
        ax = grid + s
        # bring slot s to the end, contract with Gamma, move back
        moved = np.moveaxis(values, ax, -1)  # [..., rest, c]
        if s < upper:
            term = np.einsum("...c,...acm->...am", moved, _bcast(gam, moved.ndim - 1 - grid))
        else:
            term = -np.einsum("...c,...cbm->...bm", moved, _bcast(gam, moved.ndim - 1 - grid))
        out = out + np.moveaxis(term, -2, ax)
    return out


def _bcast(gam, extra):
    # insert `extra` singleton slots between the grid axes and Gamma's slots
    grid = gam.ndim - 3
    return gam.reshape(gam.shape[:grid] + (1,) * extra + gam.shape[grid:])


def covariant_derivative(field: TensorField, g: MetricField, scheme="central4", conn=None):
    _same_chart(field.chart, g.chart)
    conn = conn or christoffel(g, scheme)
    if isinstance(field, ScalarField):
        return TensorField(field.chart, gradient_array(field.values, field.chart, conn.scheme), 1, 0)
    comps = covariant_derivative_array(field.components, conn, field.contravariant_rank, field.covariant_rank)
    return TensorField(field.chart, comps, field.covariant_rank + 1, field.contravariant_rank)


def norm_squared_array(values, g_comps, g_inv, upper, lower):
    """Pointwise ``|T|_g^2``: upper slots lowered with g, lower slots raised with g^-1."""
    t = np.asarray(values, dtype=float)
    s = t
    grid = t.ndim - upper - lower
    for k in range(upper + lower):
        s = _apply(s, g_comps if k < upper else g_inv, grid + k)
    axes = tuple(range(grid, t.ndim))
    return np.sum(s * t, axis=axes)


def _apply(t, m, ax):
    moved = np.moveaxis(t, ax, -1)
    grid = m.ndim - 2
    mm = m.reshape(m.shape[:grid] + (1,) * (moved.ndim - 1 - grid) + m.shape[grid:])
    res = np.einsum("...c,...cd->...d", moved, mm)
    return np.moveaxis(res, -1, ax)


def pointwise_norm(field, g: MetricField):
    g_inv, _ = inverse_metric(g)
    if isinstance(field, ScalarField):
        return np.abs(field.values)
    sq = norm_squared_array(field.components, g.components, g_inv, field.contravariant_rank, field.covariant_rank)
    return np.sqrt(np.maximum(sq, 0.0))


def bounded_geometry_report(g: MetricField, order=2, scheme="central4"):
    """Sup over nodes of ``|nabla^k Riem|_g`` for ``k = 0..order`` (order <= 2)."""
    if not 0 <= order <= 2:
        raise ValueError("derivative order must be 0, 1 or 2 (stencil accuracy limit)")
    curv = curvature(g, scheme)
    conn = curv.connection
    t = np.asarray(curv.riemann_lower)
    lower = 4
    out = {}
    for k in range(order + 1):
        sq = norm_squared_array(t, g.components, conn.g_inv, 0, lower)
        out[f"sup_nabla{k}_riem" if k else "sup_riem"] = float(np.sqrt(np.maximum(sq, 0.0)).max())
        if k < order:
            t = covariant_derivative_array(t, conn, 0, lower)
            lower += 1
    return out


def metric_compatibility_residual(g: MetricField, scheme="central4"):
    """Relative sup of ``nabla g`` (a rank-3 field that vanishes for Levi-Civita)."""
    conn = christoffel(g, scheme)
    ng = covariant_derivative_array(g.components, conn, 0, 2)
    return float(np.abs(ng).max() / np.abs(g.components).max())


# ---------------------------------------------------------------------------
# pullback


def _numerical_jacobian(phi, chart, eps=1e-6):
    pts = chart.points()
    n = chart.dim
    jac = np.empty(chart.shape + (n, n))
    for i in range(n):
        dp = np.zeros(n)
        dp[i] = eps
        jac[..., :, i] = (np.asarray(phi(pts + dp)) - np.asarray(phi(pts - dp))) / (2 * eps)
    return jac


def pullback_metric(g: MetricField, phi, jacobian=None, domain=None, interpolation="linear", metric_fn=None):
    """``(phi^* g)_ij = (d phi^a / dx^i)(d phi^b / dx^j) g_ab(phi(x))``.

    ``phi`` maps an ``(..., dim)`` array of domain points to target points;
    ``jacobian`` (optional) returns ``J[..., a, i] = d phi^a / d x^i``.  The
    target metric is interpolated from the grid unless ``metric_fn`` gives it
    in closed form.  ``domain`` defaults to the chart of ``g``.
    """
    chart = domain or g.chart
    pts = chart.points()
    img = np.asarray(phi(pts), dtype=float)
    interp = Interpolator(g.chart, g.components, interpolation)
    flat = img.reshape(-1, chart.dim)
    outside = [k for k in range(flat.shape[0]) if not interp.contains(flat[k])]
    if outside:
        k = outside[0]
        raise MapsOutsideChart(f"{len(outside)} image points leave the chart; first {flat[k].tolist()}")
    jac = np.asarray(jacobian(pts)) if jacobian is not None else _numerical_jacobian(phi, chart)
    det = np.linalg.det(jac)
    scale = np.abs(jac).max(axis=(-1, -2)) ** chart.dim
    if np.any(np.abs(det) <= 1e-12 * np.maximum(scale, 1e-300)):
        raise SingularJacobian("Jacobian of the map is singular at some node")
    if metric_fn is not None:
        gt = np.asarray(metric_fn(img), dtype=float)
    else:
        gt = interp.many(flat).reshape(chart.shape + (chart.dim, chart.dim))
    comps = np.einsum("...ai,...bj,...ab->...ij", jac, jac, gt)
    return MetricField(chart, comps, g.declared_inertia, g.eig_tolerance)


__all__ = [
    "ConnectionCoeffs",
    "CurvatureData",
    "Inertia",
    "bounded_geometry_report",
    "christoffel",
    "covariant_derivative",
    "curvature",
    "curvature_residuals",
    "gauss_curvature",
    "inverse_metric",
    "metric_compatibility_residual",
    "pointwise_norm",
    "pullback_metric",
    "volume_density",
]
