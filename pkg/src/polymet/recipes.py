"""Named metric generators used by the suites, the CLI and the tests."""

import numpy as np

from .cone import Inertia, MetricField
from .grid import make_chart

TWO_PI = 2.0 * np.pi


def _diag(chart, *entries):
    n = chart.dim
    out = np.zeros(chart.shape + (n, n))
    for i, e in enumerate(entries):
        out[..., i, i] = e
    return out


def euclidean(chart):
    comps = np.broadcast_to(np.eye(chart.dim), chart.shape + (chart.dim, chart.dim)).copy()
    return MetricField(chart, comps, Inertia.riemannian(chart.dim))


def torus_chart(resolution=32, dim=2, length=TWO_PI):
    res = [resolution] * dim if np.isscalar(resolution) else list(resolution)
    return make_chart(dim, [(0.0, length)] * dim, res, [True] * dim)


def flat_torus(resolution=32, dim=2, length=TWO_PI):
    return euclidean(torus_chart(resolution, dim, length))


def conformal(chart, factor):
    """``factor * delta`` for a positive sampled factor."""
    comps = np.asarray(factor)[..., None, None] * np.eye(chart.dim)
    return MetricField(chart, comps, Inertia.riemannian(chart.dim))


def bumpy_torus(eps=0.3, resolution=32):
    """``(1 + eps sin x sin y) delta`` on the 2pi-periodic square torus."""
    chart = torus_chart(resolution)
    x, y = chart.mesh()
    return conformal(chart, 1.0 + eps * np.sin(x) * np.sin(y))


def circle(resolution=64, length=TWO_PI, factor=None):
    chart = make_chart(1, [(0.0, length)], [resolution], [True])
    if factor is None:
        return euclidean(chart)
    return conformal(chart, factor(chart.axis_nodes(0)))


def sphere_chart(resolution=(128, 128), delta=None):
    """Polar chart ``theta in [delta, pi - delta]``, ``phi`` periodic.

    The default excision is four grid spacings: ``delta = 4 h`` with
    ``h = (pi - 2 delta) / (n_theta - 1)``, i.e. ``h = pi / (n_theta + 7)``.
    """
    nt, nphi = (resolution, resolution) if np.isscalar(resolution) else resolution
    if delta is None:
        delta = 4.0 * np.pi / (nt + 7)
    return make_chart(2, [(delta, np.pi - delta), (0.0, TWO_PI)], [nt, nphi], [False, True])


def round_sphere(resolution=(128, 128), delta=None, radius=1.0):
    chart = sphere_chart(resolution, delta)
    th, _ = chart.mesh()
    return MetricField(chart, radius**2 * _diag(chart, np.ones_like(th), np.sin(th) ** 2), Inertia.riemannian(2))


def polar_plane(resolution=(64, 32), r_range=(0.5, 2.0)):
    """``dr^2 + r^2 dtheta^2`` on an annulus."""
    nr, nt = (resolution, resolution) if np.isscalar(resolution) else resolution
    chart = make_chart(2, [r_range, (0.0, TWO_PI)], [nr, nt], [False, True])
    r, _ = chart.mesh()
    return MetricField(chart, _diag(chart, np.ones_like(r), r**2), Inertia.riemannian(2))


def half_plane(resolution=(16, 257), y_range=(1.0, 2.0), x_length=1.0):
    """Poincare metric ``(dx^2 + dy^2) / y^2``; x periodic, y a closed interval."""
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    chart = make_chart(2, [(0.0, x_length), y_range], [nx, ny], [True, False])
    _, y = chart.mesh()
    return conformal(chart, 1.0 / y**2)


def warped_cylinder(a, length, resolution=(65, 32)):
    """``dt^2 + e^{2 a t} dtheta^2`` on ``[0, length] x S^1``."""
    nt, nth = (resolution, resolution) if np.isscalar(resolution) else resolution
    chart = make_chart(2, [(0.0, length), (0.0, TWO_PI)], [nt, nth], [False, True])
    t, _ = chart.mesh()
    return MetricField(chart, _diag(chart, np.ones_like(t), np.exp(2.0 * a * t)), Inertia.riemannian(2))


def product_end(length, profile=None, resolution=(65, 32)):
    """``dt^2 + h(t) dtheta^2``; ``profile`` maps t to h(t) (default 1)."""
    nt, nth = (resolution, resolution) if np.isscalar(resolution) else resolution
    chart = make_chart(2, [(0.0, length), (0.0, TWO_PI)], [nt, nth], [False, True])
    t, _ = chart.mesh()
    h = np.ones_like(t) if profile is None else profile(t)
    return MetricField(chart, _diag(chart, np.ones_like(t), h), Inertia.riemannian(2))


# ---------------------------------------------------------------------------
# random fields


def band_limited(rng, chart, modes=2, amplitude=1.0, count=None):
    """Random trigonometric polynomial of degree <= ``modes`` on a periodic chart."""
    shape = chart.shape if count is None else (count,) + chart.shape
    mesh = chart.mesh()
    scale = [TWO_PI / L for L in chart.lengths]
    out = np.zeros(shape)
    ks = np.array(np.meshgrid(*[np.arange(-modes, modes + 1)] * chart.dim, indexing="ij")).reshape(chart.dim, -1).T
    for k in ks:
        phase = sum(k[a] * scale[a] * mesh[a] for a in range(chart.dim))
        a, b = rng.normal(size=(2,) + ((count,) if count is not None else ()))
        a = np.asarray(a)[..., None, None] if count is not None else a
        b = np.asarray(b)[..., None, None] if count is not None else b
        out = out + a * np.cos(phase) + b * np.sin(phase)
    return amplitude * out / np.sqrt(len(ks))


def random_smooth_metric(rng, chart, modes=2, strength=0.4):
    """Identity plus a band-limited symmetric perturbation of sup spectral norm ``strength``."""
    n = chart.dim
    pert = np.zeros(chart.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            f = band_limited(rng, chart, modes)
            pert[..., i, j] = f
            pert[..., j, i] = f
    norm = np.abs(np.linalg.eigvalsh(pert)).max()
    comps = np.eye(n) + strength / norm * pert
    return MetricField(chart, comps, Inertia.riemannian(n))


def random_pd_components(rng, chart, count=None, floor=0.1):
    """Nodewise independent positive-definite matrices ``A A^T + floor I``."""
    n = chart.dim
    lead = () if count is None else (count,)
    a = rng.normal(size=lead + chart.shape + (n, n))
    return np.einsum("...ij,...kj->...ik", a, a) + floor * np.eye(n)
