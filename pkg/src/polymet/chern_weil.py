"""Characteristic forms: curvature 2-forms, the Euler form, and the
multiplicative series Ahat, L, Todd and the Chern character.

Sign conventions (fixed here and nowhere else):

* ``curvature_two_form`` returns ``Omega_ab = R(E_a, E_b, ., .)`` for a
  positively oriented orthonormal frame ``E``; on a surface
  ``Omega_12 = K dA``.
* Real curvature matrices ``F`` (values in so(r)) enter through
  ``Y = F / 2pi``; the Pontryagin power sums are
  ``P_k = (-1)^k tr(Y^{2k}) / 2``, so ``p_1 = -tr(F^F) / (8 pi^2)``.
* Complex bundles are given by the real matrix ``X = i F / 2pi`` (for a line
  bundle, the first Chern form itself); Chern power sums are
  ``S_k = tr(X^k)`` and ``ch = rank + sum_k S_k / k!``.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .cone import MetricField
from .connection import curvature
from .errors import FamilyDiscontinuous, OddDimension, TruncationTooHigh
from .grid import ScalarField, integrate_array

# ---------------------------------------------------------------------------
# exterior algebra on a grid


def _merge_sign(a, b):
    """Sign of the permutation sorting ``a + b`` (disjoint index tuples)."""
    inv = sum(1 for x in a for y in b if x > y)
    return -1.0 if inv % 2 else 1.0


def _component_product(a, b, ra, rb):
    if ra and rb:
        return a @ b
    if rb:
        return a[..., None, None] * b
    if ra:
        return a * b[..., None, None]
    return a * b


class Form:
    """A differential form with node-sampled components.

    ``comps`` maps increasing index tuples to arrays of a common shape.  For
    matrix-valued forms the arrays carry two trailing ``(r, r)`` axes and
    products use matrix multiplication.
    """

    def __init__(self, dim, degree, comps, shape=(), rank=None):
        self.dim = int(dim)
        self.degree = int(degree)
        self.shape = tuple(shape)
        self.rank = rank
        full = self.shape + ((rank, rank) if rank else ())
        self.comps = {}
        for idx in combinations(range(self.dim), self.degree):
            self.comps[idx] = np.broadcast_to(np.asarray(comps.get(idx, 0.0), dtype=float), full).copy()

    @classmethod
    def zero(cls, dim, degree, shape=(), rank=None):
        return cls(dim, degree, {}, shape, rank)

    @classmethod
    def scalar(cls, dim, value, shape=(), rank=None):
        return cls(dim, 0, {(): value}, shape, rank)

    @classmethod
    def from_two_form_array(cls, arr, dim, rank=None):
        """From components ``arr[..., i, j]`` (matrix-valued: ``arr[..., a, b, i, j]``)."""
        arr = np.asarray(arr, dtype=float)
        shape = arr.shape[:-4] if rank else arr.shape[:-2]
        comps = {(i, j): arr[..., i, j] for i, j in combinations(range(dim), 2)}
        return cls(dim, 2, comps, shape, rank)

    def _like(self, degree, comps, rank="same"):
        return Form(self.dim, degree, comps, self.shape, self.rank if rank == "same" else rank)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Form.scalar(self.dim, other if not self.rank else other * np.eye(self.rank), self.shape, self.rank)
        if other.degree != self.degree:
            raise ValueError("only forms of equal degree add; use EvenForm for mixed degrees")
        return self._like(self.degree, {k: self.comps[k] + other.comps[k] for k in self.comps})

    def __mul__(self, c):
        return self._like(self.degree, {k: v * c for k, v in self.comps.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def wedge(self, other):
        deg = self.degree + other.degree
        rank = self.rank or other.rank
        if deg > self.dim:
            return _ZeroForm(self.dim, deg, self.shape, rank)
        out = {}
        for I, a in self.comps.items():
            for J, b in other.comps.items():
                if set(I) & set(J):
                    continue
                key = tuple(sorted(I + J))
                term = _merge_sign(I, J) * _component_product(a, b, self.rank, other.rank)
                out[key] = out[key] + term if key in out else term
        return Form(self.dim, deg, out, self.shape, rank)

    def __xor__(self, other):
        return self.wedge(other)

    def trace(self):
        if not self.rank:
            return self
        return Form(self.dim, self.degree, {k: np.trace(v, axis1=-2, axis2=-1) for k, v in self.comps.items()}, self.shape)

    def top_component(self):
        """Coefficient of ``dx^0 ^ ... ^ dx^{n-1}`` (zero if degree < n)."""
        if self.degree != self.dim:
            return np.zeros(self.shape + ((self.rank, self.rank) if self.rank else ()))
        return self.comps[tuple(range(self.dim))]

    def max_abs(self):
        return max((float(np.abs(v).max()) for v in self.comps.values()), default=0.0)


class _ZeroForm(Form):
    """Placeholder for a product whose degree exceeds the dimension."""

    def __init__(self, dim, degree, shape=(), rank=None):
        self.dim, self.degree, self.shape, self.rank = dim, degree, tuple(shape), rank
        self.comps = {}

    def wedge(self, other):
        return _ZeroForm(self.dim, self.degree + other.degree, self.shape, self.rank or other.rank)

    def __add__(self, other):
        return other if not isinstance(other, _ZeroForm) else self

    def __mul__(self, c):
        return self

    __rmul__ = __mul__


class EvenForm:
    """Inhomogeneous sum of even-degree scalar forms, keyed by degree."""

    def __init__(self, dim, parts, shape=()):
        self.dim = dim
        self.shape = tuple(shape)
        self.parts = {d: p for d, p in parts.items() if d <= dim and not isinstance(p, _ZeroForm)}

    @classmethod
    def one(cls, dim, shape=(), value=1.0):
        return cls(dim, {0: Form.scalar(dim, value, shape)}, shape)

    def degree(self, d):
        return self.parts.get(d, Form.zero(self.dim, d, self.shape) if d <= self.dim else _ZeroForm(self.dim, d, self.shape))

    def __add__(self, other):
        keys = set(self.parts) | set(other.parts)
        out = {}
        for d in keys:
            if d in self.parts and d in other.parts:
                out[d] = self.parts[d] + other.parts[d]
            else:
                out[d] = self.parts.get(d, other.parts.get(d))
        return EvenForm(self.dim, out, self.shape)

    def scale(self, c):
        return EvenForm(self.dim, {d: p * c for d, p in self.parts.items()}, self.shape)

    def wedge(self, other, max_degree):
        out = {}
        for d1, a in self.parts.items():
            for d2, b in other.parts.items():
                d = d1 + d2
                if d > max_degree or d > self.dim:
                    continue
                term = a.wedge(b)
                out[d] = out[d] + term if d in out else term
        return EvenForm(self.dim, out, self.shape)


# ---------------------------------------------------------------------------
# formal power series with exact coefficients


def _series_mul(a, b, order):
    out = [Fraction(0)] * (order + 1)
    for i, x in enumerate(a[: order + 1]):
        if x:
            for j, y in enumerate(b[: order + 1 - i]):
                out[i + j] += x * y
    return out


def _series_inv(a, order):
    if a[0] == 0:
        raise ZeroDivisionError("series with zero constant term has no inverse")
    out = [Fraction(0)] * (order + 1)
    out[0] = 1 / Fraction(a[0])
    for k in range(1, order + 1):
        s = sum((a[j] if j < len(a) else 0) * out[k - j] for j in range(1, k + 1))
        out[k] = -s / a[0]
    return out


def _series_log(a, order):
    """``log a`` for a series with ``a[0] = 1``, via ``(log a)' = a' / a``."""
    if a[0] != 1:
        raise ValueError("log series needs constant term 1")
    da = [(k + 1) * a[k + 1] if k + 1 < len(a) else Fraction(0) for k in range(order)]
    q = _series_mul(da, _series_inv(a, order), order - 1) if order else []
    return [Fraction(0)] + [q[k] / (k + 1) for k in range(order)]


def taylor_coefficients(kind, order):
    """Exact Taylor coefficients of the characteristic function of ``kind``.

    ``Ahat``: ``(sqrt z / 2) / sinh(sqrt z / 2)`` and ``L``:
    ``sqrt z / tanh(sqrt z)``, both in ``z = x^2``; ``Todd``:
    ``x / (1 - e^{-x})`` in ``x``.
    """
    f = Fraction
    if kind == "Ahat":
        # sinh(y/2)/(y/2) = sum (y/2)^{2m} / (2m+1)!, in z = y^2
        denom = [f(1, 4**m * math.factorial(2 * m + 1)) for m in range(order + 1)]
        return _series_inv(denom, order)
    if kind == "L":
        cosh = [f(1, math.factorial(2 * m)) for m in range(order + 1)]
        sinh_over = [f(1, math.factorial(2 * m + 1)) for m in range(order + 1)]
        return _series_mul(cosh, _series_inv(sinh_over, order), order)
    if kind == "Todd":
        one_minus = [f((-1) ** m, math.factorial(m + 1)) for m in range(order + 1)]
        return _series_inv(one_minus, order)
    raise ValueError(f"unknown characteristic series {kind!r}")


def log_coefficients(kind, order):
    return _series_log(taylor_coefficients(kind, order), order)


# ---------------------------------------------------------------------------
# characteristic series of curvature matrices


@dataclass(frozen=True)
class CharSeries:
    kind: str
    degree_terms: list
    truncation_degree: int

    def term(self, degree):
        return self.degree_terms[degree // 2]


def _matrix_power_traces(Y, kmax, max_degree):
    """``tr(Y^k)`` as forms for k = 1..kmax (skipping degrees above ``max_degree``)."""
    out = {}
    power = Y
    for k in range(1, kmax + 1):
        if 2 * k > max_degree:
            break
        out[k] = power.trace()
        power = power.wedge(Y)
    return out


def _exp_series(log_part: EvenForm, max_degree):
    total = EvenForm.one(log_part.dim, log_part.shape)
    term = EvenForm.one(log_part.dim, log_part.shape)
    for m in range(1, max_degree // 2 + 1):
        term = term.wedge(log_part, max_degree).scale(1.0 / m)
        total = total + term
    return total


def char_series(F, kind, truncation_degree=None, dim=None):
    """Evaluate ``kind`` in {Ahat, L, Todd, ch} on a curvature matrix of 2-forms.

    ``F`` is a matrix-valued 2-form (:class:`Form` with ``rank``), a
    :class:`CurvatureTwoForm`, or an array ``[..., a, b, i, j]``.  For
    ``Ahat``/``L`` it is the real so(r) curvature; for ``Todd``/``ch`` it is
    the real Chern matrix ``X = i F / 2pi`` (see module docstring).
    """
    if isinstance(F, CurvatureTwoForm):
        F = F.as_form()
    elif not isinstance(F, Form):
        arr = np.asarray(F, dtype=float)
        F = Form.from_two_form_array(arr, dim or arr.shape[-1], rank=arr.shape[-3])
    n = F.dim
    top = n if truncation_degree is None else int(truncation_degree)
    if top > n:
        raise TruncationTooHigh(f"truncation degree {top} exceeds the form dimension {n}")
    if kind not in ("Ahat", "L", "Todd", "ch"):
        raise ValueError(f"unknown characteristic series {kind!r}")
    r = F.rank
    kmax = top // 2
    if kind in ("Ahat", "L"):
        Y = F * (1.0 / (2.0 * np.pi))
        y2 = Y.wedge(Y)
        traces = _matrix_power_traces(y2, kmax, top)  # tr(Y^{2k}) sits in degree 4k
        a = log_coefficients(kind, kmax)
        log_part = EvenForm(n, {}, F.shape)
        for k, tr in traces.items():
            if 4 * k > top:
                continue
            pk = tr * (((-1) ** k) / 2.0)
            log_part = log_part + EvenForm(n, {4 * k: pk * float(a[k])}, F.shape)
        total = _exp_series(log_part, top)
    elif kind == "Todd":
        traces = _matrix_power_traces(F, 2 * kmax, top)
        b = log_coefficients("Todd", 2 * kmax)
        log_part = EvenForm(n, {}, F.shape)
        for k, tr in traces.items():
            if 2 * k <= top:
                log_part = log_part + EvenForm(n, {2 * k: tr * float(b[k])}, F.shape)
        total = _exp_series(log_part, top)
    else:
        traces = _matrix_power_traces(F, kmax, top)
        total = EvenForm.one(n, F.shape, float(r))
        for k, tr in traces.items():
            total = total + EvenForm(n, {2 * k: tr * (1.0 / math.factorial(k))}, F.shape)
    terms = [total.degree(d) for d in range(0, top + 1, 2)]
    return CharSeries(kind, terms, top)


# ---------------------------------------------------------------------------
# curvature in an orthonormal frame


def orthonormal_frame(g: MetricField, reverse=False):
    """Columns ``E[..., :, a]`` of a g-orthonormal, positively oriented frame.

    Gram-Schmidt on the coordinate frame in index order (or reversed order);
    in the reversed case the last vector is flipped when needed to restore
    positive orientation.
    """
    n = g.dim
    gc = g.components
    order = list(range(n))[::-1] if reverse else list(range(n))
    E = np.zeros(g.chart.shape + (n, n))
    for slot, c in enumerate(order):
        v = np.zeros(g.chart.shape + (n,))
        v[..., c] = 1.0
        for prev in range(slot):
            e = E[..., :, prev]
            v = v - np.einsum("...i,...ij,...j->...", v, gc, e)[..., None] * e
        norm = np.sqrt(np.einsum("...i,...ij,...j->...", v, gc, v))
        E[..., :, slot] = v / norm[..., None]
    det = np.linalg.det(E)
    E[..., :, -1] *= np.sign(det)[..., None]
    return E


@dataclass(frozen=True)
class CurvatureTwoForm:
    chart: object
    omega: np.ndarray  # [..., a, b, i, j]
    frame: np.ndarray

    def as_form(self):
        return Form.from_two_form_array(self.omega, self.chart.dim, rank=self.chart.dim)


def curvature_two_form(g: MetricField, scheme="central4", reverse=False):
    """``Omega_ab(d_i, d_j) = R(E_a, E_b, d_i, d_j)`` in an orthonormal frame."""
    curv = curvature(g, scheme)
    E = orthonormal_frame(g, reverse)
    om = np.einsum("...la,...kb,...lkij->...abij", E, E, curv.riemann_lower)
    om = 0.5 * (om - np.swapaxes(om, -4, -3))
    om = 0.5 * (om - np.swapaxes(om, -2, -1))
    return CurvatureTwoForm(g.chart, om, E)


def euler_form(g: MetricField, scheme="central4", reverse=False):
    """``Pf(Omega / 2pi)`` as a density against ``dx^1 ... dx^n`` (surfaces)."""
    n = g.dim
    if n % 2:
        raise OddDimension(f"the Euler form needs an even dimension, got {n}")
    if n != 2:
        raise NotImplementedError("Euler-form quadrature is implemented for surfaces")
    om = curvature_two_form(g, scheme, reverse).omega
    return ScalarField(g.chart, om[..., 0, 1, 0, 1] / (2.0 * np.pi))


def euler_integral(g: MetricField, scheme="central4"):
    return integrate_array(euler_form(g, scheme).values, g.chart)


def extrapolate_in_delta(factory, deltas, scheme="central4"):
    """Euler integral over ``delta``-truncated charts, extrapolated to ``delta = 0``.

    ``factory(delta)`` returns the metric on the chart with excision
    ``delta``; the values are fitted by a polynomial in ``delta^2`` through
    all points and evaluated at zero.
    """
    deltas = np.asarray(deltas, dtype=float)
    values = np.array([euler_integral(factory(d), scheme) for d in deltas])
    coeffs = np.polyfit(deltas**2, values, len(deltas) - 1)
    return {"deltas": deltas, "values": values, "extrapolated": float(np.polyval(coeffs, 0.0))}


# ---------------------------------------------------------------------------
# families


def family_constancy(family, functional, parameters=None, check_continuity=True):
    """Evaluate ``functional`` over a metric family and report its spread.

    ``functional`` is ``"euler_integral"``, ``"de_rham_index"`` or a callable.
    Consecutive members must differ (sup norm) by less than the stability
    radius of the earlier one, else FamilyDiscontinuous.
    """
    from .cone import stability_radius

    if functional == "euler_integral":
        fn = euler_integral
    elif functional == "de_rham_index":
        from .spectral import de_rham_index

        fn = lambda g: de_rham_index(g).index  # noqa: E731
    else:
        fn = functional
    family = list(family)
    if check_continuity:
        for i in range(len(family) - 1):
            jump = float(np.abs(np.linalg.eigvalsh(family[i + 1].components - family[i].components)).max())
            if jump >= stability_radius(family[i]):
                raise FamilyDiscontinuous(f"members {i} and {i + 1} differ by {jump:.3e}, above the stability radius")
    values = [fn(g) for g in family]
    base = values[0]
    return {
        "parameters": list(parameters) if parameters is not None else list(range(len(family))),
        "values": values,
        "max_deviation": float(max(abs(v - base) for v in values)),
    }
