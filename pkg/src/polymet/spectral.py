"""Discretized elliptic operators, spectral cutoffs and index computations.

Hodge Laplacians on periodic charts use a nodal Galerkin complex: forms are
sampled at grid nodes, ``d`` is built from spectral derivatives and the mass
matrices carry the metric,

    M0 = w sqrt|g|,  M1 = w g^-1 sqrt|g| (per node),  M2 = w / sqrt|g|,

with ``w`` the quadrature weight.  The weak Laplacian on k-forms is
``S_k = d_k^T M_{k+1} d_k + M_k d_{k-1} M_{k-1}^-1 d_{k-1}^T M_k`` and its
spectrum solves ``S_k v = lambda M_k v``.  An even resolution makes the
spectral derivative annihilate the Nyquist mode, which would add a spurious
harmonic form, so odd resolutions are required (NyquistKernel otherwise).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy import special

from .cone import MetricField
from .connection import inverse_metric, volume_density
from .errors import (
    EigensolveFailure,
    KernelGapTooSmall,
    NonPeriodicChart,
    NyquistKernel,
    PotentialNotCoercive,
)
from .grid import derivative_matrix_1d

ZERO_REL = 1e-9
KERNEL_REL = 1e-6
SHIFT = 1e-8


@dataclass(frozen=True)
class OperatorMatrix:
    size: int
    entries: np.ndarray
    mass: np.ndarray = None
    domain_meta: dict = field(default_factory=dict)

    def symmetry_defect(self):
        a = self.entries
        return float(np.abs(a - a.T).max())


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    cutoff: float
    rank_below: int
    kernel_dim: int
    kernel_tol: float
    shifted: bool = False
    index: int = None
    basis: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# Hodge Laplacian on periodic charts


def _kron_derivative(chart, axis, scheme):
    mats = [np.eye(n) for n in chart.resolution]
    mats[axis] = derivative_matrix_1d(chart, axis, scheme)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _exterior_derivatives(chart, scheme):
    """Dense ``d_0`` (and ``d_1`` in 2D) acting on component-stacked node values."""
    D = [_kron_derivative(chart, a, scheme) for a in range(chart.dim)]
    if chart.dim == 1:
        return [D[0]]
    d0 = np.vstack(D)  # f -> (d_x f, d_y f)
    d1 = np.hstack([-D[1], D[0]])  # (a, b) -> d_x b - d_y a
    return [d0, d1]


def _mass_matrices(g, chart):
    N = chart.size
    w = chart.quadrature_weights.reshape(N)
    vol = volume_density(g).reshape(N)
    g_inv = inverse_metric(g)[0].reshape(N, chart.dim, chart.dim)
    m0 = np.diag(w * vol)
    if chart.dim == 1:
        return [m0, np.diag(w / vol)]
    m1 = np.zeros((2 * N, 2 * N))
    for i in range(2):
        for j in range(2):
            m1[i * N : (i + 1) * N, j * N : (j + 1) * N] = np.diag(w * vol * g_inv[:, i, j])
    return [m0, m1, np.diag(w / vol)]


def _block_inverse(m, chart):
    if chart.dim == 1 or m.shape[0] == chart.size:
        return np.diag(1.0 / np.diag(m))
    N = chart.size
    blocks = np.stack([[np.diag(m[i * N : (i + 1) * N, j * N : (j + 1) * N]) for j in range(2)] for i in range(2)])
    inv = np.linalg.inv(np.moveaxis(blocks, -1, 0))
    out = np.zeros_like(m)
    for i in range(2):
        for j in range(2):
            out[i * N : (i + 1) * N, j * N : (j + 1) * N] = np.diag(inv[:, i, j])
    return out


def hodge_laplacian(g: MetricField, degree, scheme="spectral"):
    """Weak Hodge Laplacian on ``degree``-forms with its mass matrix."""
    chart = g.chart
    if not chart.fully_periodic:
        raise NonPeriodicChart("hodge_laplacian needs a fully periodic chart")
    if chart.dim > 2:
        raise ValueError("hodge_laplacian supports charts of dimension 1 or 2")
    if not 0 <= degree <= chart.dim:
        raise ValueError(f"form degree {degree} outside 0..{chart.dim}")
    if scheme in ("spectral", "central2", "central4") and any(n % 2 == 0 for n in chart.resolution):
        raise NyquistKernel(
            f"resolution {list(chart.resolution)} has an even axis; centred and spectral derivatives annihilate "
            "the Nyquist mode there, which fakes harmonic forms. Use odd resolutions."
        )
    d = _exterior_derivatives(chart, scheme)
    M = _mass_matrices(g, chart)
    S = np.zeros_like(M[degree])
    if degree < chart.dim:
        S += d[degree].T @ M[degree + 1] @ d[degree]
    if degree > 0:
        dm = d[degree - 1]
        S += M[degree] @ dm @ _block_inverse(M[degree - 1], chart) @ dm.T @ M[degree]
    S = 0.5 * (S + S.T)
    meta = {"chart": tuple(chart.resolution), "degree": degree, "scheme": scheme}
    return OperatorMatrix(S.shape[0], S, M[degree], meta)


# ---------------------------------------------------------------------------
# spectral cutoffs


def generalized_spectrum(op: OperatorMatrix, vectors=False):
    try:
        if op.mass is None:
            return la.eigh(op.entries, eigvals_only=not vectors)
        return la.eigh(op.entries, op.mass, eigvals_only=not vectors)
    except (la.LinAlgError, ValueError) as exc:
        raise EigensolveFailure(str(exc)) from exc


def kernel_threshold(eigenvalues):
    """``(kernel_tol, gap)`` for a nonnegative spectrum.

    Eigenvalues below ``ZERO_REL * max`` are kernel candidates; the gap is the
    smallest eigenvalue above that and ``kernel_tol = KERNEL_REL * gap``.
    Candidates that do not fall below ``kernel_tol`` make the count ambiguous.
    """
    ev = np.sort(np.asarray(eigenvalues))
    top = max(float(np.abs(ev).max()), 1e-300)
    above = ev[ev >= ZERO_REL * top]
    gap = float(above[0]) if above.size else top
    tol = KERNEL_REL * gap
    ambiguous = ev[(ev >= tol) & (ev < ZERO_REL * top)]
    if ambiguous.size:
        raise KernelGapTooSmall(
            f"eigenvalue {ambiguous[0]:.3e} sits between the kernel tolerance {tol:.3e} and the gap {gap:.3e}"
        )
    if gap < 10 * tol:
        raise KernelGapTooSmall(f"smallest nonzero eigenvalue {gap:.3e} is within 10x of the kernel tolerance")
    return tol, gap


def spectral_cutoff(op: OperatorMatrix, cutoff, basis=False):
    """Rank of the spectral projection below ``cutoff``.

    A cutoff within ``1e-8`` of an eigenvalue is moved up by ``1e-8`` and the
    report marks it as shifted.
    """
    if basis:
        ev, vec = generalized_spectrum(op, vectors=True)
    else:
        ev, vec = generalized_spectrum(op), None
    lam = float(cutoff)
    shifted = False
    if np.any(np.abs(ev - lam) < SHIFT):
        lam += SHIFT
        shifted = True
    tol, _ = kernel_threshold(ev)
    below = ev <= lam
    return SpectralReport(
        eigenvalues=ev,
        cutoff=lam,
        rank_below=int(below.sum()),
        kernel_dim=int((ev < tol).sum()),
        kernel_tol=tol,
        shifted=shifted,
        basis=vec[:, below] if basis else None,
    )


def kernel_dimension(op: OperatorMatrix):
    ev = generalized_spectrum(op)
    tol, _ = kernel_threshold(ev)
    return int((ev < tol).sum()), ev


@dataclass(frozen=True)
class DeRhamIndex:
    index: int
    betti: tuple
    spectra: tuple = field(repr=False, default=())

    def __int__(self):
        return self.index


def de_rham_index(g: MetricField, scheme="spectral"):
    """Euler characteristic from Hodge kernels on a periodic chart."""
    betti, spectra = [], []
    for k in range(g.dim + 1):
        dim_ker, ev = kernel_dimension(hodge_laplacian(g, k, scheme))
        betti.append(dim_ker)
        spectra.append(ev)
    return DeRhamIndex(sum((-1) ** k * b for k, b in enumerate(betti)), tuple(betti), tuple(spectra))


# ---------------------------------------------------------------------------
# the round sphere by harmonic Galerkin


def _real_harmonics(band, theta, phi):
    """Real orthonormal Y_lm, d_theta Y_lm, d_phi Y_lm on a (theta, phi) mesh.

    ``d_theta`` uses ``d_theta Y_l^m = m cot(theta) Y_l^m + sqrt((l-m)(l+m+1)) e^{-i phi} Y_l^{m+1}``.
    """
    vals, dth, dph, labels = [], [], [], []

    def cplx(l, m):
        if abs(m) > l:
            return np.zeros_like(theta, dtype=complex)
        return special.sph_harm_y(l, m, theta, phi)

    for l in range(band + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            y = cplx(l, am)
            dy = am / np.tan(theta) * y + np.sqrt((l - am) * (l + am + 1)) * np.exp(-1j * phi) * cplx(l, am + 1)
            if m == 0:
                vals.append(y.real)
                dth.append(dy.real)
                dph.append(np.zeros_like(theta))
            else:
                s = np.sqrt(2.0) * (-1) ** am
                if m > 0:
                    vals.append(s * y.real)
                    dth.append(s * dy.real)
                    dph.append(-s * am * y.imag)
                else:
                    vals.append(s * y.imag)
                    dth.append(s * dy.imag)
                    dph.append(s * am * y.real)
            labels.append((l, m))
    return np.array(vals), np.array(dth), np.array(dph), labels


@dataclass(frozen=True)
class SphereGalerkin:
    band: int
    operators: tuple
    quadrature: tuple


def sphere_quadrature(band):
    nt = 2 * band + 8
    nphi = 4 * band + 8
    x, wx = np.polynomial.legendre.leggauss(nt)
    theta = np.arccos(x)[::-1]
    wt = wx[::-1]
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    # weights of d(cos theta) d phi, i.e. already including sin(theta)
    W = np.outer(wt, np.full(nphi, 2.0 * np.pi / nphi))
    return TH, PH, W


def sphere_hodge_operators(band=16, radius=1.0, fd_step=1e-5):
    """Galerkin Hodge Laplacians of the round sphere of ``radius``.

    Bases: ``Y_lm`` for 0-forms, ``{dY_lm, *dY_lm}`` (l >= 1) for 1-forms and
    ``Y_lm dvol`` for 2-forms, all with ``l <= band``.  First derivatives are
    analytic; the second ``theta`` derivative needed for ``d`` and ``delta``
    of 1-forms is a central difference of analytic first derivatives.
    """
    TH, PH, W = sphere_quadrature(band)
    r2 = radius**2
    sin, cos = np.sin(TH), np.cos(TH)
    dvol = r2 * W  # W already carries sin(theta)
    Y, Yt, Yp, labels = _real_harmonics(band, TH, PH)
    fd = {}
    for name, (dt, dp) in {"t": (fd_step, 0.0), "p": (0.0, fd_step)}.items():
        _, tp, pp, _ = _real_harmonics(band, TH + dt, PH + dp)
        _, tm, pm, _ = _real_harmonics(band, TH - dt, PH - dp)
        fd[name] = ((tp - tm) / (2 * fd_step), (pp - pm) / (2 * fd_step))
    Ytt, Ypt = fd["t"]  # d_theta of (d_theta Y, d_phi Y)
    Ytp, Ypp = fd["p"]  # d_phi of (d_theta Y, d_phi Y)
    idx = [i for i, (l, _) in enumerate(labels) if l >= 1]
    # metric r^2 (d theta^2 + sin^2 d phi^2);  dY = (Yt, Yp),  *dY = (-Yp / sin, sin Yt)
    a_t = np.concatenate([Yt[idx], -Yp[idx] / sin])
    a_p = np.concatenate([Yp[idx], sin * Yt[idx]])
    # d alpha = (d_theta a_phi - d_phi a_theta) d theta ^ d phi
    da = np.concatenate([Ypt[idx] - Ytp[idx], cos * Yt[idx] + sin * Ytt[idx] + Ypp[idx] / sin])
    # delta alpha = -|g|^-1/2 d_i(|g|^1/2 g^ij a_j),  |g|^1/2 g^-1 = diag(sin, 1/sin)
    flux_div = np.concatenate([
        cos * Yt[idx] + sin * Ytt[idx] + Ypp[idx] / sin,  # dY
        -Ypt[idx] + Ytp[idx],  # *dY
    ])
    dela = -flux_div / (r2 * sin)
    g_tt, g_pp = 1.0 / r2, 1.0 / (r2 * sin**2)

    def gram(a, b, weight):
        return np.einsum("ixy,jxy,xy->ij", a, b, weight)

    def one_form_gram(at, ap, bt, bp):
        return gram(at, bt, dvol * g_tt) + gram(ap, bp, dvol * g_pp)

    M0 = gram(Y, Y, dvol)
    S0 = one_form_gram(Yt, Yp, Yt, Yp)
    M1 = one_form_gram(a_t, a_p, a_t, a_p)
    two = dvol / (r2 * sin) ** 2  # |c dtheta^dphi|^2 = c^2 / |g|
    S1 = gram(da, da, two) + gram(dela, dela, dvol)
    # 2-forms c dtheta^dphi with c = Y |g|^1/2, so *c = Y and delta c = -*dY
    c = Y * r2 * sin
    M2 = gram(c, c, two)
    S2 = one_form_gram(Yp / sin, -sin * Yt, Yp / sin, -sin * Yt)
    ops = tuple(
        OperatorMatrix(S.shape[0], 0.5 * (S + S.T), 0.5 * (M + M.T), {"sphere_band": band, "degree": k})
        for k, (S, M) in enumerate([(S0, M0), (S1, M1), (S2, M2)])
    )
    return SphereGalerkin(band, ops, (TH, PH, W))


def sphere_de_rham_index(band=16, radius=1.0):
    gal = sphere_hodge_operators(band, radius)
    betti, spectra = [], []
    for op in gal.operators:
        k, ev = kernel_dimension(op)
        betti.append(k)
        spectra.append(ev)
    return DeRhamIndex(sum((-1) ** k * b for k, b in enumerate(betti)), tuple(betti), tuple(spectra))


# ---------------------------------------------------------------------------
# 1D Callias operators


@dataclass(frozen=True)
class CalliasReport:
    index: int
    kernel: int
    cokernel: int
    sign_count: int
    dirichlet: tuple
    singular_values: np.ndarray = field(repr=False, default=None)
    operator: object = field(repr=False, default=None)


def callias_operator(potential, L=20.0, N=2000, coercivity=1e-3):
    """Sparse ``A = d/dx + phi`` on ``[-L, L]`` from N nodes to N-1 midpoints.

    Box scheme: ``(u_{i+1} - u_i)/h + phi_{i+1/2} (u_i + u_{i+1})/2``.  A
    zero mode behaves like ``exp(-int phi)``; at an end where it would grow
    outward (``phi(-L) > 0`` or ``phi(L) < 0``) the node value is pinned to
    zero by dropping its column.  The truncated kernel then matches the
    kernel on the line.
    """
    x = np.linspace(-L, L, N)
    phi = np.asarray(potential(x), dtype=float)
    mid = np.asarray(potential(0.5 * (x[1:] + x[:-1])), dtype=float)
    if min(abs(phi[0]), abs(phi[-1])) < coercivity:
        raise PotentialNotCoercive(f"|phi| at the ends ({phi[0]:.3e}, {phi[-1]:.3e}) is below {coercivity}")
    h = x[1] - x[0]
    A = sp.diags([-1.0 / h + 0.5 * mid, 1.0 / h + 0.5 * mid], [0, 1], shape=(N - 1, N), format="csc")
    keep = np.ones(N, dtype=bool)
    dirichlet = []
    if phi[0] > 0:
        keep[0] = False
        dirichlet.append("left")
    if phi[-1] < 0:
        keep[-1] = False
        dirichlet.append("right")
    return A[:, keep].tocsr(), tuple(dirichlet), x, phi


def sign_change_count(phi_values):
    """Directed zero crossings: +1 for each - to + change, -1 for + to -."""
    s = np.sign(np.asarray(phi_values, dtype=float))
    s = s[s != 0]
    return int(np.sum(np.diff(s) > 0) - np.sum(np.diff(s) < 0))


def _tridiagonal_gram_eigs(A):
    """Eigenvalues of ``A^T A`` and ``A A^T`` when both are tridiagonal."""
    out = []
    for G in (A.T @ A, A @ A.T):
        G = sp.csr_matrix(G)
        n = G.shape[0]
        band = G.tocoo()
        if np.any(np.abs(band.row - band.col) > 1):
            raise ValueError("Gram matrix is not tridiagonal")
        diag = np.asarray(G.diagonal(), dtype=float)
        off = np.asarray(G.diagonal(1), dtype=float) if n > 1 else np.zeros(0)
        out.append(la.eigvalsh_tridiagonal(diag, off))
    return out


def operator_index(A, rel_tol=1e-6, method="auto"):
    """``dim ker A - dim ker A^T`` from singular values below ``rel_tol * ||A||``.

    ``method="dense"`` uses a dense SVD; ``"tridiagonal"`` squares the
    singular values through the tridiagonal Gram matrices of a
    (block-)bidiagonal operator; ``"auto"`` picks the latter when it applies.
    Returns ``(index, kernel, cokernel, singular_values)``.
    """
    rows, cols = A.shape
    if method == "auto":
        method = "tridiagonal" if sp.issparse(A) else "dense"
    if method == "tridiagonal":
        try:
            ev_c, ev_r = _tridiagonal_gram_eigs(sp.csr_matrix(A))
        except ValueError:
            method = "dense"
        else:
            top = max(float(ev_c.max()), 1e-300)
            thresh = (rel_tol**2) * top
            ker = int((ev_c < thresh).sum())
            coker = int((ev_r < thresh).sum())
            sv = np.sqrt(np.clip(np.sort(ev_c if cols <= rows else ev_r)[::-1], 0.0, None))
            return ker - coker, ker, coker, sv
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    sv = la.svdvals(dense)
    thresh = rel_tol * max(float(sv.max()), 1e-300)
    small = int((sv < thresh).sum())
    ker = small + max(cols - rows, 0)
    coker = small + max(rows - cols, 0)
    return ker - coker, ker, coker, sv


def callias_index_1d(potential, L=20.0, N=2000, method="auto"):
    A, dirichlet, x, phi = callias_operator(potential, L, N)
    index, ker, coker, sv = operator_index(A, method=method)
    return CalliasReport(index, ker, coker, sign_change_count(phi), dirichlet, sv, A)


def block_index_additivity(blocks, method="auto"):
    """Assemble the block-diagonal operator and compare its index with the sum.

    ``blocks`` are CalliasReports or ``(matrix, index)`` pairs.
    """
    mats, indices = [], []
    for b in blocks:
        if isinstance(b, CalliasReport):
            mats.append(b.operator)
            indices.append(b.index)
        else:
            mats.append(b[0])
            indices.append(int(b[1]))
    assembled = sp.block_diag(mats, format="csr")
    total, ker, coker, _ = operator_index(assembled, method=method)
    return {
        "block_indices": indices,
        "sum": int(sum(indices)),
        "assembled_index": int(total),
        "kernel": ker,
        "cokernel": coker,
        "additive": int(total) == int(sum(indices)),
    }
