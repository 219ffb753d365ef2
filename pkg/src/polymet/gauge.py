"""Orbit and gauge calculus for metrics on a chart.

Divergence convention: ``(div_g h)_j = g^ik nabla_i h_kj``.  With it the
integration-by-parts identity on a closed chart reads

    <L_X g, h>_g = -2 int <X, (div_g h)^#> dvol_g,

and the Bianchi operator is ``B_g(h) = div_g h - 1/2 d(tr_g h)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .cone import MetricField, stability_radius
from .connection import covariant_derivative_array, christoffel, curvature, inverse_metric, volume_density
from .errors import InertiaMismatch, NonPeriodicChart, SignatureLost, SolverNonconvergence
from .grid import ScalarField, TensorField, _same_chart, derivative_matrix, gradient_array, integrate_array


def _comps(t):
    return t.components if isinstance(t, (TensorField, MetricField)) else np.asarray(t, dtype=float)


def _require_periodic(chart, what):
    if not chart.fully_periodic:
        raise NonPeriodicChart(f"{what} needs a fully periodic chart (no boundary terms)")


# ---------------------------------------------------------------------------
# pointwise operators


def lie_derivative_metric(X: TensorField, g: MetricField, scheme="central4"):
    """``(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k``."""
    _same_chart(X.chart, g.chart)
    x = _comps(X)
    dg = gradient_array(g.components, g.chart, scheme)  # [..., i, j, k]
    dx = gradient_array(x, g.chart, scheme)  # [..., k, i] = d_i X^k
    gc = g.components
    lie = np.einsum("...k,...ijk->...ij", x, dg)
    term = np.einsum("...kj,...ki->...ij", gc, dx)
    lie = lie + term + np.swapaxes(term, -1, -2)
    return TensorField(g.chart, lie, 2, 0, symmetric=True)


def trace(g: MetricField, h, g_inv=None):
    g_inv = inverse_metric(g)[0] if g_inv is None else g_inv
    return np.einsum("...ij,...ij->...", g_inv, _comps(h))


def divergence(g: MetricField, h, scheme="central4", conn=None):
    """``(div_g h)_j = g^ik nabla_i h_kj`` as a 1-form array."""
    conn = conn or christoffel(g, scheme)
    nh = covariant_derivative_array(_comps(h), conn, 0, 2)  # [..., k, j, i] = nabla_i h_kj
    return np.einsum("...ik,...kji->...j", conn.g_inv, nh)


def bianchi_operator(g: MetricField, h: TensorField, scheme="central4"):
    """``B_g(h) = div_g h - 1/2 d(tr_g h)`` as a 1-form field."""
    _same_chart(g.chart, h.chart)
    conn = christoffel(g, scheme)
    div = divergence(g, h, scheme, conn)
    tr = trace(g, h, conn.g_inv)
    out = div - 0.5 * gradient_array(tr, g.chart, scheme)
    return TensorField(g.chart, out, 1, 0)


def laplacian(g: MetricField, u, scheme="central4"):
    """``Delta_g u = |g|^-1/2 d_i(|g|^1/2 g^ij d_j u)`` (nonpositive spectrum)."""
    g_inv, _ = inverse_metric(g)
    vol = volume_density(g)
    du = gradient_array(np.asarray(getattr(u, "values", u), dtype=float), g.chart, scheme)
    flux = vol[..., None] * np.einsum("...ij,...j->...i", g_inv, du)
    div = sum(gradient_array(flux[..., i], g.chart, scheme)[..., i] for i in range(g.dim))
    return div / vol


# ---------------------------------------------------------------------------
# L2 structure


@dataclass(frozen=True)
class L2Pairing:
    value: float
    quadrature_resolution: tuple

    def __float__(self):
        return self.value


def _pairing_density(g_inv, vol, a, b):
    return np.einsum("...ik,...jl,...ij,...kl->...", g_inv, g_inv, a, b) * vol


def l2_pairing(g: MetricField, h1, h2):
    """``int g^ik g^jl h1_ij h2_kl dvol_g`` on the chart quadrature."""
    for t in (h1, h2):
        if isinstance(t, TensorField):
            _same_chart(g.chart, t.chart)
    g_inv, _ = inverse_metric(g)
    vol = volume_density(g)
    a, b = _comps(h1), _comps(h2)
    # symmetric summation order so that swapping arguments is bit-identical
    dens = 0.5 * (_pairing_density(g_inv, vol, a, b) + _pairing_density(g_inv, vol, b, a))
    return L2Pairing(integrate_array(dens, g.chart), tuple(g.chart.resolution))


def l2_norm(g, h):
    return float(np.sqrt(max(l2_pairing(g, h, h).value, 0.0)))


def form_vector_pairing(g: MetricField, X, alpha):
    """``int alpha(X) dvol_g`` (``= int <X, alpha^#>``)."""
    return integrate_array(np.einsum("...j,...j->...", _comps(X), _comps(alpha)) * volume_density(g), g.chart)


def adjoint_identity_residual(g: MetricField, X: TensorField, h: TensorField, scheme="spectral"):
    """Compare ``<L_X g, h>`` with ``-2 int <X, div_g h>`` on a closed chart.

    ``scale`` is the Cauchy-Schwarz bound ``||L_X g|| ||h||`` (floored at
    ``||X|| ||h||`` so Killing fields do not divide by zero).
    """
    _require_periodic(g.chart, "adjoint_identity_residual")
    _same_chart(g.chart, X.chart, h.chart)
    conn = christoffel(g, scheme)
    lie = lie_derivative_metric(X, g, scheme)
    lie_pairing = l2_pairing(g, lie, h).value
    div = divergence(g, h, scheme, conn)
    div_pairing = form_vector_pairing(g, X, div)
    bianchi_pairing = form_vector_pairing(g, X, bianchi_operator(g, h, scheme).components)
    h_norm = l2_norm(g, h)
    x_norm = np.sqrt(integrate_array(np.einsum("...ij,...i,...j->...", g.components, X.components, X.components)
                                     * volume_density(g), g.chart))
    scale = max(l2_norm(g, lie) * h_norm, x_norm * h_norm, 1e-300)
    return {
        "lie_pairing": lie_pairing,
        "div_pairing": div_pairing,
        "bianchi_pairing": bianchi_pairing,
        "scale": scale,
        "residual": abs(lie_pairing + 2.0 * div_pairing) / scale,
    }


# ---------------------------------------------------------------------------
# first variations


def total_volume(g):
    return integrate_array(volume_density(g), g.chart)


def conformal_variation_check(g: MetricField, u, tau=1e-4, scheme="central4", tol=1e-4):
    """Finite-difference vs closed-form first variation under ``g -> e^{2ut} g``.

    Closed forms: ``d/dt Scal = -2(n-1) Delta_g u - 2 u Scal`` and
    ``d/dt dvol = n u dvol``.  When the residual exceeds ``tol`` the
    difference quotient is Richardson-refined with ``tau/2``.
    """
    uv = np.asarray(getattr(u, "values", u), dtype=float)
    n = g.dim
    scal = curvature(g, scheme).scalar.values
    formula_scal = -2.0 * (n - 1) * laplacian(g, uv, scheme) - 2.0 * uv * scal
    formula_vol = integrate_array(n * uv * volume_density(g), g.chart)

    def rates(step):
        plus, minus = g.scaled(np.exp(2.0 * uv * step)), g.scaled(np.exp(-2.0 * uv * step))
        ds = (curvature(plus, scheme).scalar.values - curvature(minus, scheme).scalar.values) / (2 * step)
        dv = (total_volume(plus) - total_volume(minus)) / (2 * step)
        return ds, dv

    fd_scal, fd_vol = rates(tau)
    refined = False
    if np.abs(fd_scal - formula_scal).max() > tol:
        half_s, half_v = rates(tau / 2)
        fd_scal = (4 * half_s - fd_scal) / 3
        fd_vol = (4 * half_v - fd_vol) / 3
        refined = True
    return {
        "fd_scal_rate": ScalarField(g.chart, fd_scal),
        "formula_scal_rate": ScalarField(g.chart, formula_scal),
        "fd_vol_rate": float(fd_vol),
        "formula_vol_rate": float(formula_vol),
        "max_residual": float(np.abs(fd_scal - formula_scal).max()),
        "vol_residual": abs(fd_vol - formula_vol),
        "tau": tau,
        "richardson": refined,
    }


def volume_first_variation(g: MetricField, h, tau=1e-4):
    """``d/dt vol(g + t h)`` at 0 against ``1/2 int tr_g h dvol_g``.

    ``tau`` is reduced below the stability radius so both sides of the
    difference stay in the cone of ``g``.
    """
    hc = _comps(h)
    hmax = float(np.abs(np.linalg.eigvalsh(hc)).max())
    if hmax > 0:
        tau = min(tau, 0.5 * stability_radius(g) / hmax)
    formula = 0.5 * integrate_array(trace(g, hc) * volume_density(g), g.chart)
    try:
        plus = MetricField(g.chart, g.components + tau * hc, g.declared_inertia, g.eig_tolerance)
        minus = MetricField(g.chart, g.components - tau * hc, g.declared_inertia, g.eig_tolerance)
    except InertiaMismatch as exc:
        raise SignatureLost(f"g + tau h left the cone at tau={tau:.3e}") from exc
    fd = (total_volume(plus) - total_volume(minus)) / (2 * tau)
    return {"fd_rate": fd, "formula_rate": formula, "residual": abs(fd - formula), "tau": tau}


# ---------------------------------------------------------------------------
# slice decomposition


def lie_operator_matrix(g: MetricField, scheme="spectral"):
    """Sparse matrix of ``X -> L_X g``.

    Vector fields are stacked component-major (``X^k`` at node p sits at
    ``k*N + p``); symmetric tensors likewise with all ``n*n`` slots.
    """
    chart = g.chart
    n, N = chart.dim, chart.size
    gc = g.components.reshape(N, n, n)
    dg = gradient_array(g.components, chart, scheme).reshape(N, n, n, n)
    D = [derivative_matrix(chart, a, scheme) for a in range(n)]
    blocks = [[None] * n for _ in range(n * n)]
    for i in range(n):
        for j in range(n):
            row = i * n + j
            for k in range(n):
                m = sp.diags(dg[:, i, j, k]) + sp.diags(gc[:, k, j]) @ D[i] + sp.diags(gc[:, i, k]) @ D[j]
                blocks[row][k] = m
    return sp.bmat(blocks, format="csr")


def pairing_weight_matrix(g: MetricField):
    """Block-diagonal weight ``W`` with ``h1 . W h2 = <h1, h2>_g`` (flattened)."""
    chart = g.chart
    n, N = chart.dim, chart.size
    g_inv = inverse_metric(g)[0].reshape(N, n, n)
    w = (volume_density(g) * chart.quadrature_weights).reshape(N)
    blocks = [[None] * (n * n) for _ in range(n * n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    blocks[i * n + j][k * n + l] = sp.diags(g_inv[:, i, k] * g_inv[:, j, l] * w)
    return sp.bmat(blocks, format="csr")


def _flat_tensor(h, N, n):
    return np.moveaxis(_comps(h).reshape(N, n, n), 0, -1).reshape(-1)


def _unflat_tensor(v, shape, n):
    return np.moveaxis(v.reshape(n, n, -1), -1, 0).reshape(shape + (n, n))


def _normal_system(g, h, scheme):
    n, N = g.dim, g.chart.size
    L = lie_operator_matrix(g, scheme)
    W = pairing_weight_matrix(g)
    A = (L.T @ W @ L).tocsr()
    hf = _flat_tensor(h, N, n)
    b = L.T @ (W @ hf)
    # forward rounding bound of b: below it the right-hand side is noise
    floor = 1e-13 * float(np.linalg.norm(abs(L).T @ (abs(W) @ np.abs(hf))))
    return L, W, A, b, floor


def _solve(A, b, max_iter, floor=0.0):
    bnorm = float(np.linalg.norm(b))
    if bnorm <= floor:
        return np.zeros_like(b), 0
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = cg(A, b, rtol=1e-10, atol=floor, maxiter=max_iter, callback=cb)
    if info != 0:
        res = np.linalg.norm(b - A @ x) / bnorm
        raise SolverNonconvergence(f"conjugate gradients stopped after {count[0]} iterations, relative residual {res:.3e}")
    return x, count[0]


def _killing_constants(L, n, N):
    """Components k for which the constant field e_k lies in the kernel of L."""
    out = []
    scale = max(float(abs(L).max()), 1e-300)
    for k in range(n):
        e = np.zeros(n * N)
        e[k * N : (k + 1) * N] = 1.0
        if np.abs(L @ e).max() < 1e-10 * scale:
            out.append(k)
    return out


ZERO_PART = 1e-6


@dataclass(frozen=True)
class SliceDecomposition:
    vector_part: TensorField
    divfree_part: TensorField
    lie_part: TensorField
    residual: float
    divergence_defect: float
    bianchi_defect: float
    orthogonality_defect: float
    orthogonality_cosine: float
    degenerate: bool
    iterations: int


def slice_decompose(g: MetricField, h: TensorField, scheme="spectral"):
    """Split ``h = L_X g + k`` with ``k`` L2-orthogonal to the orbit tangent.

    ``X`` minimizes ``||h - L_X g||_g`` (normal equations by conjugate
    gradients); translation Killing fields are removed by making ``X``
    mean-zero in each component whose constant field is Killing.
    """
    _require_periodic(g.chart, "slice_decompose")
    _same_chart(g.chart, h.chart)
    chart = g.chart
    n, N = chart.dim, chart.size
    L, W, A, b, floor = _normal_system(g, h, scheme)
    x, iters = _solve(A, b, 10 * N, floor)
    for k in _killing_constants(L, n, N):
        x[k * N : (k + 1) * N] -= x[k * N : (k + 1) * N].mean()
    X = TensorField(chart, np.moveaxis(x.reshape(n, *chart.shape), 0, -1), 0, 1)
    lie = lie_derivative_metric(X, g, scheme)
    k_part = TensorField(chart, _comps(h) - _unflat_tensor(L @ x, chart.shape, n), 2, 0, symmetric=True)
    # the operator route and the matrix route must agree
    residual = float(np.abs(_comps(h) - lie.components - k_part.components).max())
    h_norm = l2_norm(g, h)
    h_sup = max(float(np.abs(_comps(h)).max()), 1e-300)
    div = divergence(g, k_part, scheme)
    bian = bianchi_operator(g, k_part, scheme).components
    pair = l2_pairing(g, lie, k_part).value
    lie_norm, k_norm = l2_norm(g, lie), l2_norm(g, k_part)
    # a part below the reconstruction tolerance counts as zero, hence orthogonal
    degenerate = min(lie_norm, k_norm) < ZERO_PART * h_norm
    cosine = 0.0 if degenerate else abs(pair) / (lie_norm * k_norm)
    return SliceDecomposition(
        vector_part=X,
        divfree_part=k_part,
        lie_part=lie,
        residual=residual / h_sup,
        divergence_defect=float(np.abs(div).max()) / h_sup,
        bianchi_defect=float(np.abs(bian).max()) / h_sup,
        orthogonality_defect=abs(pair) / max(h_norm**2, 1e-300),
        orthogonality_cosine=cosine,
        degenerate=bool(degenerate),
        iterations=iters,
    )


def product_slice_check(gs, hs, scheme="spectral"):
    """Shared-X slice for a polymetric: summed normal forms vs the joint system.

    Returns both solutions and their relative difference; the summed form is
    what a block-diagonal operator on the product produces.
    """
    chart = gs[0].chart
    for g, h in zip(gs, hs):
        _require_periodic(g.chart, "product_slice_check")
        _same_chart(chart, g.chart, h.chart)
    n, N = chart.dim, chart.size
    parts = [_normal_system(g, h, scheme) for g, h in zip(gs, hs)]
    A_sum = sum(p[2] for p in parts)
    b_sum = sum(p[3] for p in parts)
    floor = sum(p[4] for p in parts)
    L_joint = sp.vstack([p[0] for p in parts], format="csr")
    W_joint = sp.block_diag([p[1] for p in parts], format="csr")
    h_joint = np.concatenate([_flat_tensor(h, N, n) for h in hs])
    A_joint = (L_joint.T @ W_joint @ L_joint).tocsr()
    b_joint = L_joint.T @ (W_joint @ h_joint)
    x_sum, _ = _solve(A_sum, b_sum, 10 * N, floor)
    x_joint, _ = _solve(A_joint, b_joint, 10 * N, floor)
    scale = max(float(np.linalg.norm(x_joint)), 1e-300)
    return {
        "matrix_difference": float(abs(A_sum - A_joint).max()) / max(float(abs(A_joint).max()), 1e-300),
        "solution_difference": float(np.linalg.norm(x_sum - x_joint)) / scale,
        "x_sum": x_sum,
        "x_joint": x_joint,
    }
