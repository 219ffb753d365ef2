"""Geodesic spray, exponential map and its dependence on the metric."""

from dataclasses import dataclass, field

import numpy as np

from .cone import MetricField, convex_path
from .connection import christoffel
from .errors import OutsideChart, StepTooLarge
from .grid import Interpolator

DRIFT_LIMIT = 1e-5


@dataclass(frozen=True)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    time: float
    speed_drift: float = 0.0
    trajectory: np.ndarray = field(default=None, repr=False)


class Spray:
    """Christoffel symbols and metric of ``g`` interpolated off the grid.

    ``interpolation="auto"`` uses trigonometric interpolation on periodic axes
    (band-limited, keeps the first integral to spectral accuracy) and
    multilinear interpolation elsewhere; ``"linear"`` is multilinear on every
    axis.
    """

    def __init__(self, g: MetricField, scheme="central4", interpolation="auto", conn=None):
        self.g = g
        self.chart = g.chart
        self.conn = conn or christoffel(g, scheme)
        n = g.dim
        packed = np.concatenate(
            [np.asarray(self.conn.gamma).reshape(self.chart.shape + (n**3,)), g.components.reshape(self.chart.shape + (n * n,))],
            axis=-1,
        )
        self._interp = Interpolator(self.chart, packed, interpolation)

    def locate(self, x):
        if not self._interp.contains(x):
            raise OutsideChart(f"point {np.asarray(x).tolist()} is outside the chart")
        return self._interp.wrap(x)

    def fields_at(self, x):
        n = self.chart.dim
        vals = self._interp(self.locate(x))
        return vals[: n**3].reshape(n, n, n), vals[n**3 :].reshape(n, n)

    def acceleration(self, x, v):
        gam, _ = self.fields_at(x)
        return -np.einsum("kij,i,j->k", gam, v, v)

    def speed(self, x, v):
        _, gx = self.fields_at(x)
        return float(np.sqrt(max(v @ gx @ v, 0.0)))


def spray(g: MetricField, state, scheme="central4", interpolation="auto"):
    """``a^k = -Gamma^k_ij(x) v^i v^j`` at ``state = (position, velocity)``."""
    pos = state.position if isinstance(state, GeodesicState) else state[0]
    vel = state.velocity if isinstance(state, GeodesicState) else state[1]
    return Spray(g, scheme, interpolation).acceleration(np.asarray(pos, float), np.asarray(vel, float))


def exp_map(g, x, v, t_end=1.0, dt=1e-3, scheme="central4", interpolation="auto", spray_obj=None,
            record=False, drift_limit=DRIFT_LIMIT):
    """Integrate the geodesic equation with classical fixed-step RK4.

    The last step is shortened to land on ``t_end``.  Raises OutsideChart
    when the path leaves a non-periodic chart and StepTooLarge when the
    relative speed drift exceeds ``drift_limit``.
    """
    s = spray_obj or Spray(g, scheme, interpolation)
    x = s.locate(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float).copy()
    speed0 = s.speed(x, v)
    ref = max(speed0, 1e-300)
    t, drift = 0.0, 0.0
    rows = [np.concatenate([[t], x, v, [speed0]])] if record else None
    f = s.acceleration
    steps = int(np.ceil(abs(t_end) / dt - 1e-12)) if t_end else 0
    h = t_end / steps if steps else 0.0
    for _ in range(steps):
        k1x, k1v = v, f(x, v)
        k2x, k2v = v + 0.5 * h * k1v, f(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, f(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, f(x + h * k3x, v + h * k3v)
        x = s.locate(x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x))
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t += h
        sp = s.speed(x, v)
        drift = max(drift, abs(sp - speed0) / ref)
        if drift > drift_limit:
            raise StepTooLarge(f"relative speed drift {drift:.3e} at t={t:.6g} exceeds {drift_limit:.0e}; reduce dt")
        if record:
            rows.append(np.concatenate([[t], x, v, [sp]]))
    return GeodesicState(x, v, t, drift, np.array(rows) if record else None)


def _displacement(chart, a, b):
    d = np.asarray(b, float) - np.asarray(a, float)
    for ax in range(chart.dim):
        if chart.periodic[ax]:
            L = chart.lengths[ax]
            d[ax] = (d[ax] + 0.5 * L) % L - 0.5 * L
    return d


def exp_dependence(g0, g1, x, v, t_end, samples=8, dt=1e-3, scheme="central4", interpolation="auto"):
    """Endpoints of ``exp^{g_s}(x, t_end v)`` along the straight metric path.

    Reports successive endpoint displacements (periodic axes unwrapped) and
    the empirical Lipschitz constant in ``s``.
    """
    s_values = np.linspace(0.0, 1.0, samples + 1)
    ends = []
    for s in s_values:
        gs = convex_path(g0, g1, s)
        ends.append(exp_map(gs, x, v, t_end, dt, scheme, interpolation).position)
    ends = np.array(ends)
    steps = np.array([np.linalg.norm(_displacement(g0.chart, ends[i], ends[i + 1])) for i in range(samples)])
    from_start = np.array([np.linalg.norm(_displacement(g0.chart, ends[0], e)) for e in ends])
    return {
        "s": s_values,
        "endpoints": ends,
        "increments": steps,
        "displacement": from_start,
        "max_increment": float(steps.max()) if samples else 0.0,
        "lipschitz": float(steps.max() * samples) if samples else 0.0,
    }


def refinement_defect(coarse, fine, chart):
    """Largest gap between the fine endpoint curve and the coarse one interpolated to fine ``s``."""
    base = coarse["endpoints"][0]
    unwrap = lambda e: base + np.array([_displacement(chart, base, p) for p in e])  # noqa: E731
    c, f = unwrap(coarse["endpoints"]), unwrap(fine["endpoints"])
    interp = np.stack([np.interp(fine["s"], coarse["s"], c[:, a]) for a in range(chart.dim)], axis=-1)
    return float(np.abs(interp - f).max())
