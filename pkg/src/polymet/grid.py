"""Charts, sampled fields, finite-difference/spectral derivatives and quadrature.

Arrays sampled on a chart always carry the grid axes first, followed by any
tensor index axes.  Upper (contravariant) indices precede lower (covariant)
ones, so a Christoffel array ``gamma[..., k, i, j]`` stores
:math:`\\Gamma^k_{ij}`.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (
    ChartMismatch,
    InvalidBounds,
    ResolutionTooSmall,
    SchemeUnsupported,
)

SCHEMES = ("central2", "central4", "spectral")
MIN_RESOLUTION = 8


@dataclass(frozen=True)
class Chart:
    """Rectangular coordinate box with a uniform grid."""

    dim: int
    bounds: tuple
    resolution: tuple
    periodic: tuple

    @property
    def shape(self):
        return tuple(self.resolution)

    @property
    def size(self):
        return int(np.prod(self.resolution))

    @cached_property
    def spacing(self):
        out = []
        for (lo, hi), n, per in zip(self.bounds, self.resolution, self.periodic):
            out.append((hi - lo) / (n if per else n - 1))
        return tuple(out)

    @cached_property
    def lengths(self):
        return tuple(hi - lo for lo, hi in self.bounds)

    def axis_nodes(self, axis):
        lo, _ = self.bounds[axis]
        return lo + self.spacing[axis] * np.arange(self.resolution[axis])

    def mesh(self):
        """Node coordinates, one array of shape ``self.shape`` per axis."""
        return np.meshgrid(*[self.axis_nodes(a) for a in range(self.dim)], indexing="ij")

    def points(self):
        """Node coordinates stacked along a trailing axis, shape ``shape + (dim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def node_coordinates(self, index):
        return tuple(float(self.axis_nodes(a)[i]) for a, i in enumerate(index))

    @cached_property
    def fully_periodic(self):
        return all(self.periodic)

    def axis_weights(self, axis):
        n = self.resolution[axis]
        w = np.full(n, self.spacing[axis])
        if not self.periodic[axis]:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    @cached_property
    def quadrature_weights(self):
        w = np.ones(self.shape)
        for a in range(self.dim):
            shape = [1] * self.dim
            shape[a] = self.resolution[a]
            w = w * self.axis_weights(a).reshape(shape)
        w.flags.writeable = False
        return w


def make_chart(dim, bounds, resolution, periodic):
    """Validate and build a :class:`Chart`.

    Node ``k`` on axis ``i`` sits at ``lo_i + k (hi_i - lo_i) / N_i`` with
    ``N_i = resolution_i`` on periodic axes (``hi_i`` is identified with
    ``lo_i``) and ``resolution_i - 1`` otherwise.
    """
    dim = int(dim)
    if dim < 1:
        raise InvalidBounds(f"dimension must be positive, got {dim}")
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    resolution = tuple(int(n) for n in resolution)
    periodic = tuple(bool(p) for p in periodic)
    if not (len(bounds) == len(resolution) == len(periodic) == dim):
        raise InvalidBounds("bounds, resolution and periodic must each have one entry per axis")
    for axis, (lo, hi) in enumerate(bounds):
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise InvalidBounds(f"axis {axis}: need lo < hi, got ({lo}, {hi})")
    for axis, n in enumerate(resolution):
        if n < MIN_RESOLUTION:
            raise ResolutionTooSmall(f"axis {axis}: resolution {n} < {MIN_RESOLUTION}")
    return Chart(dim, bounds, resolution, periodic)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    chart: Chart
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.chart.shape:
            raise ValueError(f"values shape {values.shape} != chart shape {self.chart.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field has non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class TensorField:
    """Tensor field sampled on a chart.

    ``components`` has shape ``chart.shape + (dim,) * (contravariant_rank +
    covariant_rank)``.  With ``symmetric`` set the last two (covariant) axes
    are symmetrized on construction.
    """

    chart: Chart
    components: np.ndarray
    covariant_rank: int = 0
    contravariant_rank: int = 0
    symmetric: bool = False

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        rank = self.covariant_rank + self.contravariant_rank
        expected = self.chart.shape + (self.chart.dim,) * rank
        if comps.shape != expected:
            raise ValueError(f"components shape {comps.shape} != expected {expected}")
        if self.symmetric:
            if self.covariant_rank < 2:
                raise ValueError("symmetric flag needs a covariant pair")
            comps = 0.5 * (comps + np.swapaxes(comps, -1, -2))
        if not np.all(np.isfinite(comps)):
            raise ValueError("tensor field has non-finite components")
        object.__setattr__(self, "components", _frozen(comps))

    @property
    def rank(self):
        return self.covariant_rank + self.contravariant_rank


def vector_field(chart, components):
    return TensorField(chart, components, covariant_rank=0, contravariant_rank=1)


def symmetric_2tensor(chart, components):
    return TensorField(chart, components, covariant_rank=2, symmetric=True)


def one_form(chart, components):
    return TensorField(chart, components, covariant_rank=1)


# ---------------------------------------------------------------------------
# differentiation


def _spectral(values, axis, n, length):
    k = 2.0 * np.pi / length * np.fft.rfftfreq(n, d=1.0 / n)
    mult = 1j * k
    if n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = mult.size
    coef = np.fft.rfft(values, axis=axis)
    return np.fft.irfft(coef * mult.reshape(shape), n=n, axis=axis)


def _take(values, axis, idx):
    return np.take(values, idx, axis=axis)


def _central_nonperiodic(values, axis, h, order):
    n = values.shape[axis]
    out = np.empty_like(values)
    sl = [slice(None)] * values.ndim

    def put(index, data):
        sl[axis] = index
        out[tuple(sl)] = data

    f = lambda i: _take(values, axis, i)  # noqa: E731
    if order == 2:
        put(slice(1, n - 1), (f(np.arange(2, n)) - f(np.arange(0, n - 2))) / (2 * h))
        put(0, (-3 * f(0) + 4 * f(1) - f(2)) / (2 * h))
        put(n - 1, (3 * f(n - 1) - 4 * f(n - 2) + f(n - 3)) / (2 * h))
        return out
    i = np.arange(2, n - 2)
    put(slice(2, n - 2), (f(i - 2) - 8 * f(i - 1) + 8 * f(i + 1) - f(i + 2)) / (12 * h))
    # six-point one-sided closures (fifth order) on the first two nodes: composing
    # two first derivatives then loses only one order at the boundary
    put(0, (-137 * f(0) + 300 * f(1) - 300 * f(2) + 200 * f(3) - 75 * f(4) + 12 * f(5)) / (60 * h))
    put(1, (-12 * f(0) - 65 * f(1) + 120 * f(2) - 60 * f(3) + 20 * f(4) - 3 * f(5)) / (60 * h))
    m = n - 1
    put(m, (137 * f(m) - 300 * f(m - 1) + 300 * f(m - 2) - 200 * f(m - 3) + 75 * f(m - 4) - 12 * f(m - 5)) / (60 * h))
    put(m - 1, (12 * f(m) + 65 * f(m - 1) - 120 * f(m - 2) + 60 * f(m - 3) - 20 * f(m - 4) + 3 * f(m - 5)) / (60 * h))
    return out


def partial(values, chart, axis, scheme="central4"):
    """Partial derivative of a sampled array along grid ``axis``."""
    if not 0 <= axis < chart.dim:
        raise ValueError(f"axis {axis} out of range for a {chart.dim}-dimensional chart")
    if scheme not in SCHEMES:
        raise SchemeUnsupported(f"unknown scheme {scheme!r}")
    values = np.asarray(values, dtype=float)
    h = chart.spacing[axis]
    if chart.periodic[axis]:
        if scheme == "spectral":
            return _spectral(values, axis, chart.resolution[axis], chart.lengths[axis])
        r = lambda s: np.roll(values, -s, axis=axis)  # noqa: E731  (r(s)[i] = f[i+s])
        if scheme == "central2":
            return (r(1) - r(-1)) / (2 * h)
        return (r(-2) - 8 * r(-1) + 8 * r(1) - r(2)) / (12 * h)
    if scheme == "spectral":
        raise SchemeUnsupported(f"spectral differentiation needs a periodic axis (axis {axis})")
    return _central_nonperiodic(values, axis, h, 2 if scheme == "central2" else 4)


def gradient_array(values, chart, scheme="central4"):
    """Stack of all partials, new trailing axis indexing the derivative direction."""
    return np.stack([partial(values, chart, a, scheme) for a in range(chart.dim)], axis=-1)


def differentiate(field, axis, scheme="central4"):
    """Partial derivative of a scalar or tensor field along one chart axis.

    Tensor components are differentiated independently; use
    :func:`gradient` for the field with the extra covariant slot.
    """
    if isinstance(field, ScalarField):
        return ScalarField(field.chart, partial(field.values, field.chart, axis, scheme))
    return TensorField(
        field.chart,
        partial(field.components, field.chart, axis, scheme),
        field.covariant_rank,
        field.contravariant_rank,
        field.symmetric,
    )


def gradient(field, scheme="central4"):
    """Coordinate gradient: appends one covariant slot (last axis)."""
    if isinstance(field, ScalarField):
        return TensorField(field.chart, gradient_array(field.values, field.chart, scheme), 1, 0)
    return TensorField(
        field.chart,
        gradient_array(field.components, field.chart, scheme),
        field.covariant_rank + 1,
        field.contravariant_rank,
    )


def derivative_matrix_1d(chart, axis, scheme="central4"):
    n = chart.resolution[axis]
    sub = make_chart(1, [chart.bounds[axis]], [n], [chart.periodic[axis]])
    return partial(np.eye(n), sub, 0, scheme)


def derivative_matrix(chart, axis, scheme="central4"):
    """Sparse matrix of ``partial(., axis)`` acting on C-ordered flattened scalars."""
    mats = [sp.identity(n, format="csr") for n in chart.resolution]
    d1 = derivative_matrix_1d(chart, axis, scheme)
    d1[np.abs(d1) < 1e-14 * np.abs(d1).max()] = 0.0
    mats[axis] = sp.csr_matrix(d1)
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


# ---------------------------------------------------------------------------
# quadrature


def _same_chart(*charts):
    first = charts[0]
    for c in charts[1:]:
        if c != first:
            raise ChartMismatch("fields live on different charts")


def integrate_array(values, chart):
    return float(np.sum(np.asarray(values) * chart.quadrature_weights))


def integrate(f, weight=None):
    """Quadrature of ``f * weight`` over the chart.

    Uniform weights on periodic axes, trapezoid weights otherwise.
    """
    if weight is None:
        return integrate_array(f.values, f.chart)
    _same_chart(f.chart, weight.chart)
    if np.any(weight.values < 0):
        raise ValueError("integration weight must be nonnegative")
    return integrate_array(f.values * weight.values, f.chart)


# ---------------------------------------------------------------------------
# interpolation


def _trig_weights(x, n, length):
    # periodic band-limited (Dirichlet kernel) cardinal functions on n nodes
    s = 2.0 * np.pi * (x - np.arange(n) * (length / n)) / length
    m = n // 2
    k = np.arange(1, (n - 1) // 2 + 1)
    w = 1.0 + 2.0 * np.cos(np.outer(s, k)).sum(axis=1)
    if n % 2 == 0:
        w += np.cos(m * s)
    return w / n


def _linear_weights(x, n, h, periodic):
    w = np.zeros(n)
    t = x / h
    i0 = int(np.floor(t))
    frac = t - i0
    if periodic:
        w[i0 % n] += 1.0 - frac
        w[(i0 + 1) % n] += frac
    else:
        if i0 >= n - 1:
            i0, frac = n - 2, 1.0
        w[i0] += 1.0 - frac
        w[i0 + 1] += frac
    return w


class Interpolator:
    """Evaluate grid-sampled arrays at arbitrary chart points.

    ``method`` is ``"linear"`` (multilinear on every axis), ``"spectral"``
    (trigonometric on periodic axes, linear elsewhere) or ``"auto"`` (same as
    spectral).  Points must lie inside the chart after periodic wrapping.
    """

    def __init__(self, chart, values, method="linear"):
        if method not in ("linear", "spectral", "auto"):
            raise ValueError(f"unknown interpolation method {method!r}")
        self.chart = chart
        self.values = np.asarray(values, dtype=float)
        self.method = method

    def wrap(self, x):
        x = np.array(x, dtype=float)
        for a in range(self.chart.dim):
            lo, hi = self.chart.bounds[a]
            if self.chart.periodic[a]:
                x[a] = lo + np.mod(x[a] - lo, hi - lo)
        return x

    def contains(self, x):
        x = self.wrap(x)
        tol = 1e-12
        for a in range(self.chart.dim):
            lo, hi = self.chart.bounds[a]
            if not self.chart.periodic[a] and not (lo - tol * (hi - lo) <= x[a] <= hi + tol * (hi - lo)):
                return False
        return True

    def weights(self, x):
        x = self.wrap(x)
        out = []
        for a in range(self.chart.dim):
            lo, hi = self.chart.bounds[a]
            n = self.chart.resolution[a]
            rel = min(max(x[a] - lo, 0.0), hi - lo) if not self.chart.periodic[a] else x[a] - lo
            if self.chart.periodic[a] and self.method != "linear":
                out.append(_trig_weights(rel, n, hi - lo))
            else:
                out.append(_linear_weights(rel, n, self.chart.spacing[a], self.chart.periodic[a]))
        return out

    def __call__(self, x):
        v = self.values
        for w in self.weights(x):
            v = np.tensordot(w, v, axes=(0, 0))
        return v

    def many(self, xs):
        """Vectorized evaluation at an ``(m, dim)`` array of points."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        per_point = [self.weights(x) for x in xs]
        out = None
        for a in range(self.chart.dim):
            w = np.array([pw[a] for pw in per_point])
            if out is None:
                out = np.tensordot(w, self.values, axes=(1, 0))
            else:
                out = np.einsum("pj,pj...->p...", w, out)
        return out
