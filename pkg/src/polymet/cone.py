"""Signature cones: inertia, stability radii, convex paths, polymetrics, John ellipsoids."""

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    ChartMismatch,
    DegenerateBody,
    InertiaMismatch,
    NotSymmetric,
    SignatureLost,
)
from .grid import Chart, TensorField

DEFAULT_EIG_TOL = 1e-9


@dataclass(frozen=True)
class Inertia:
    positive: int
    negative: int
    degenerate: bool = False

    @classmethod
    def riemannian(cls, n):
        return cls(n, 0, False)

    def __str__(self):
        tag = ", degenerate" if self.degenerate else ""
        return f"({self.positive},{self.negative}{tag})"


# ---------------------------------------------------------------------------
# eigenvalues


def jacobi_eigvalsh(a, tol=1e-15, max_sweeps=60):
    """Eigenvalues of a batch of symmetric matrices by cyclic Jacobi rotations.

    ``a`` has shape ``(..., n, n)``; returns ``(..., n)`` in ascending order.
    Every rotation is applied to the whole batch at once.
    """
    a = np.array(a, dtype=float)
    batch = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape(-1, n, n).copy()
    if n == 1:
        return a[:, 0, 0].reshape(batch + (1,))
    scale = np.sqrt(np.einsum("bij,bij->b", a, a))
    for _ in range(max_sweeps):
        diag = np.diagonal(a, axis1=1, axis2=2)
        off = np.sqrt(np.clip(np.einsum("bij,bij->b", a, a) - np.einsum("bi,bi->b", diag, diag), 0.0, None))
        if np.all(off <= tol * np.maximum(scale, np.finfo(float).tiny)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                theta = 0.5 * np.arctan2(2.0 * apq, a[:, q, q] - a[:, p, p])
                c = np.cos(theta)[:, None]
                s = np.sin(theta)[:, None]
                colp, colq = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = c * colp - s * colq
                a[:, :, q] = s * colp + c * colq
                rowp, rowq = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = c * rowp - s * rowq
                a[:, q, :] = s * rowp + c * rowq
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
    ev = np.sort(np.diagonal(a, axis1=1, axis2=2), axis=-1)
    return ev.reshape(batch + (n,))


def _check_symmetric(m, rtol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != m.shape[-2]:
        raise NotSymmetric(f"matrix is not square: {m.shape}")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m - np.swapaxes(m, -1, -2)).max() > rtol * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12 relative")
    return m


def count_inertia(eigvals, tol=DEFAULT_EIG_TOL):
    """Nodewise ``(p, q, zero)`` counts; threshold is ``tol`` times the largest |eigenvalue|."""
    eigvals = np.asarray(eigvals)
    thresh = tol * np.abs(eigvals).max(axis=-1, keepdims=True)
    p = (eigvals > thresh).sum(axis=-1)
    q = (eigvals < -thresh).sum(axis=-1)
    return p, q, eigvals.shape[-1] - p - q


def inertia_of(matrix, tol=DEFAULT_EIG_TOL):
    """Inertia of one symmetric matrix (Jacobi eigenvalues, scale-relative threshold)."""
    m = _check_symmetric(matrix)
    p, q, z = count_inertia(jacobi_eigvalsh(m), tol)
    return Inertia(int(p), int(q), bool(z > 0))


def inertia_by_minors(matrix, tol=DEFAULT_EIG_TOL):
    """Sylvester-Jacobi sign rule on leading principal minors.

    ``q`` equals the number of sign changes in ``1, D_1, ..., D_n`` when no
    minor vanishes.  Returns None when an intermediate minor is (numerically)
    zero and the rule is inconclusive.
    """
    m = _check_symmetric(matrix)
    n = m.shape[0]
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    minors = [1.0] + [np.linalg.det(m[:k, :k]) for k in range(1, n + 1)]
    small = [abs(d) <= tol * scale**k for k, d in enumerate(minors)]
    if small[n]:
        return Inertia(0, 0, True) if n else Inertia(0, 0, False)
    if any(small[1:n]):
        return None
    changes = sum(1 for a, b in zip(minors, minors[1:]) if a * b < 0)
    return Inertia(n - changes, changes, False)


# ---------------------------------------------------------------------------
# metric fields


def _components_array(components, chart):
    if isinstance(components, TensorField):
        if components.chart != chart:
            raise ChartMismatch("components live on a different chart")
        return components.components
    return np.asarray(components, dtype=float)


class MetricField:
    """Nondegenerate symmetric 2-tensor field of fixed, validated inertia.

    Construction symmetrizes the components and checks the inertia at every
    node; :class:`InertiaMismatch` is raised on the first failing node.
    """

    def __init__(self, chart: Chart, components, declared_inertia=None, eig_tolerance=DEFAULT_EIG_TOL):
        comps = _components_array(components, chart)
        tensor = TensorField(chart, comps, covariant_rank=2, symmetric=True)
        self.chart = chart
        self.tensor = tensor
        self.eig_tolerance = float(eig_tolerance)
        self.eigenvalues = jacobi_eigvalsh(tensor.components)
        p, q, z = count_inertia(self.eigenvalues, self.eig_tolerance)
        if declared_inertia is None:
            first = tuple(0 for _ in range(chart.dim))
            declared_inertia = Inertia(int(p[first]), int(q[first]), False)
        self.declared_inertia = declared_inertia
        bad = (p != declared_inertia.positive) | (q != declared_inertia.negative) | (z > 0)
        if declared_inertia.degenerate or np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0]) if np.any(bad) else tuple(0 for _ in range(chart.dim))
            found = Inertia(int(p[idx]), int(q[idx]), bool(z[idx] > 0))
            record = {
                "node": idx,
                "coordinates": chart.node_coordinates(idx),
                "found": str(found),
                "declared": str(declared_inertia),
                "failing_nodes": int(bad.sum()),
            }
            raise InertiaMismatch(
                f"inertia {found} at node {idx} {record['coordinates']} differs from declared {declared_inertia}",
                [record],
            )

    @property
    def components(self):
        return self.tensor.components

    @property
    def dim(self):
        return self.chart.dim

    @property
    def is_riemannian(self):
        return self.declared_inertia.positive == self.chart.dim

    def scaled(self, factor):
        """Pointwise product with a positive scalar array (or number)."""
        f = np.asarray(factor, dtype=float)
        if f.ndim:
            f = f[..., None, None]
        return MetricField(self.chart, self.components * f, self.declared_inertia, self.eig_tolerance)

    def __repr__(self):
        return f"MetricField(chart={self.chart.resolution}, inertia={self.declared_inertia})"


@dataclass
class Polymetric:
    components: List[MetricField]
    inertias: List[Inertia] = field(default_factory=list)

    @property
    def chart(self):
        return self.components[0].chart

    def __len__(self):
        return len(self.components)


def stability_radius(g: MetricField):
    """Half the smallest |eigenvalue| over all nodes.

    Any symmetric perturbation whose nodewise spectral norm stays below this
    value keeps every node's inertia (Weyl's inequality).
    """
    return 0.5 * float(np.abs(g.eigenvalues).min())


def convex_path(g0: MetricField, g1: MetricField, t):
    """Straight-line interpolant ``(1-t) g0 + t g1``.

    Always stays in the cone for Riemannian endpoints; indefinite endpoints
    can cancel, in which case :class:`SignatureLost` is raised.
    """
    if g0.chart != g1.chart:
        raise ChartMismatch("convex_path endpoints live on different charts")
    if g0.declared_inertia != g1.declared_inertia:
        raise ValueError(f"endpoint inertias differ: {g0.declared_inertia} vs {g1.declared_inertia}")
    comps = (1.0 - t) * g0.components + t * g1.components
    try:
        return MetricField(g0.chart, comps, g0.declared_inertia, g0.eig_tolerance)
    except InertiaMismatch as exc:
        raise SignatureLost(f"t={t}: {exc}") from exc


def validate_polymetric(components, inertias):
    """Build a :class:`Polymetric`, or raise InertiaMismatch with a per-component report."""
    if not components:
        raise ValueError("a polymetric needs at least one component")
    if len(components) != len(inertias):
        raise ValueError("one declared inertia per component is required")
    chart = components[0].chart
    for c in components[1:]:
        if c.chart != chart:
            raise ChartMismatch("polymetric components live on different charts")
    metrics, report = [], []
    for i, (comp, inertia) in enumerate(zip(components, inertias)):
        comps = comp.components
        tol = getattr(comp, "eig_tolerance", DEFAULT_EIG_TOL)
        try:
            metrics.append(MetricField(chart, comps, inertia, tol))
        except InertiaMismatch as exc:
            for rec in exc.report:
                report.append(dict(rec, component=i + 1))
    if report:
        first = report[0]
        raise InertiaMismatch(
            f"component {first['component']}: inertia {first['found']} at {first['coordinates']}, "
            f"declared {first['declared']}",
            report,
        )
    return Polymetric(metrics, list(inertias))


# ---------------------------------------------------------------------------
# John ellipsoid


@dataclass(frozen=True)
class EllipsoidCertificate:
    """Ellipsoid ``{x : x^T Q x <= 1}`` containing the body, which in turn
    contains the same ellipsoid shrunk by ``1 / bilipschitz_factor``."""

    matrix: np.ndarray
    bilipschitz_factor: float
    iterations: int = 0

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.matrix, x))


def _khachiyan(points, tol, max_iter):
    # centered minimum-volume ellipsoid for a centrally symmetric point set,
    # with Todd-Yildirim away steps
    m, n = points.shape
    u = np.full(m, 1.0 / m)
    it = 0
    for it in range(1, max_iter + 1):
        x = points.T @ (u[:, None] * points)
        mvals = np.einsum("ij,ij->i", points @ np.linalg.inv(x), points)
        j = int(np.argmax(mvals))
        active = u > 0
        k = int(np.flatnonzero(active)[np.argmin(mvals[active])])
        up, down = (mvals[j] - n) / n, (n - mvals[k]) / n
        if max(up, down) <= tol:
            break
        if up >= down:
            beta = (mvals[j] - n) / (n * (mvals[j] - 1.0))
            u *= 1.0 - beta
            u[j] += beta
        else:
            drop = -u[k] / (1.0 - u[k])
            # for mvals <= 1 the objective falls monotonically along the away
            # direction and the stationary-point formula has the wrong sign
            beta = (mvals[k] - n) / (n * (mvals[k] - 1.0)) if mvals[k] > 1.0 else drop
            u *= 1.0 - max(beta, drop)
            # a full drop step removes the point exactly; rounding would leave it active
            u[k] = 0.0 if beta <= drop else u[k] + beta
    x = points.T @ (u[:, None] * points)
    return np.linalg.inv(x) / n, it


def john_metric(norm_samples, tol=1e-7, max_iter=200_000):
    """Minimum-volume enclosing ellipsoid of a centrally symmetric body.

    ``norm_samples`` are boundary points of the body; each sample ``p``
    also contributes ``-p``.  The returned matrix is rescaled so every sample
    lies in the closed unit ball of ``Q``; the factor is the reciprocal of the
    largest ``r`` with ``r * (Q-ball)`` inside the convex hull.
    """
    pts = np.atleast_2d(np.asarray(norm_samples, dtype=float))
    m, n = pts.shape
    if 2 * m < 2 * n:
        raise DegenerateBody(f"need at least {2 * n} samples after symmetrization, got {2 * m}")
    pts = np.vstack([pts, -pts])
    if np.linalg.matrix_rank(pts) < n:
        raise DegenerateBody("samples span fewer than n dimensions")
    q, iters = _khachiyan(pts, tol, max_iter)
    q = 0.5 * (q + q.T)
    q /= np.einsum("ij,jk,ik->i", pts, q, pts).max()
    if n == 1:
        return EllipsoidCertificate(q, 1.0, iters)
    chol = np.linalg.cholesky(q)
    y = pts @ chol
    try:
        hull = ConvexHull(y)
    except QhullError as exc:
        raise DegenerateBody(f"convex hull failed: {exc}") from exc
    inradius = float(np.min(-hull.equations[:, -1]))
    return EllipsoidCertificate(q, 1.0 / inradius, iters)
