"""Regularity diagnostics of a computed ray and its moment measure.

Hoelder quotients of the gradient are measured at dyadic physical separations
no smaller than two grid spacings, and compared across two resolutions: a
C^{1,alpha} function gives quotients that settle under refinement, a gradient
with a weaker modulus makes them grow as smaller separations become visible.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvariantViolation
from .monge_ampere import _central_determinant
from .stencils import directional_curvatures

DENSITY_FLOOR = -1e-6
DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 0.9, 0.99)
NOISE_FLOOR = 1e-9


def gradient(phi):
    """Gradient (d_x1, ..., d_xn, d_t) of a grid function, stacked on axis 0.

    Central differences in the interior, second-order one-sided at the edges.
    """
    return np.stack(np.gradient(phi.values, *phi.axes, edge_order=2))


def _separations(extent, h_min, count=None):
    """Dyadic separations extent/4, extent/8, ... down to 2 h_min."""
    out = []
    s = extent / 4.0
    while s >= 2.0 * h_min - 1e-12:
        out.append(s)
        s /= 2.0
    return out[:count] if count else out


def _quotients(phi, alphas, separations):
    """Q(alpha, s) over axis-aligned node pairs at offset round(s/h) per axis."""
    grad = gradient(phi)
    spacings = phi.spacings
    q = {a: {} for a in alphas}
    for s in separations:
        best = np.zeros(len(alphas))
        for axis, h in enumerate(spacings):
            m = int(round(s / h))
            if m < 2 or m >= phi.values.shape[axis]:
                continue
            lo = [slice(None)] * phi.values.ndim
            hi = [slice(None)] * phi.values.ndim
            lo[axis] = slice(0, -m)
            hi[axis] = slice(m, None)
            diff = grad[(slice(None),) + tuple(hi)] - grad[(slice(None),) + tuple(lo)]
            top = float(np.sqrt((diff ** 2).sum(axis=0)).max())
            dist = m * h
            best = np.maximum(best, [top / dist ** a for a in alphas])
        for a, b in zip(alphas, best):
            q[a][s] = float(b)
    return q


@dataclass
class RegularityReport:
    alphas: tuple
    resolutions: tuple  # grid spacings (h_x..., h_t) per resolution, coarse first
    quotients: list  # per resolution: {alpha: {s: Q}}
    sup_quotients: list  # per resolution: {alpha: max_s Q}
    second_difference_max: list
    trend: dict  # alpha -> sup Q fine / sup Q coarse
    verdict: dict  # alpha -> "bounded" | "diverging"
    threshold: float = 1.2

    def to_json(self):
        return {
            "alphas": list(self.alphas),
            "resolutions": [list(r) for r in self.resolutions],
            "quotients": [{str(a): {f"{s:.17g}": v for s, v in qa.items()}
                           for a, qa in q.items()} for q in self.quotients],
            "sup_quotients": [{str(a): v for a, v in q.items()} for q in self.sup_quotients],
            "second_difference_max": self.second_difference_max,
            "trend": {str(a): v for a, v in self.trend.items()},
            "verdict": {str(a): v for a, v in self.verdict.items()},
            "threshold": self.threshold,
        }


def holder_estimate(phis, alphas=DEFAULT_ALPHAS, threshold=1.2, noise_floor=NOISE_FLOOR):
    """Hoelder quotients of grad Phi at two or more resolutions.

    ``phis`` holds the same function sampled on grids of the same box, coarse
    to fine.  Each resolution uses the dyadic separations it resolves
    (s >= 2h); the verdict for alpha is "bounded" when the finest sup-quotient
    exceeds the coarsest by at most ``threshold``.  Quotients below
    ``noise_floor`` are rounding noise of a flat gradient and count as bounded.
    """
    if len(phis) < 2:
        raise ConfigError("holder_estimate needs the function at >= 2 resolutions")
    phis = sorted(phis, key=lambda p: -max(p.spacings))
    alphas = tuple(sorted(alphas))
    extent = min(a[-1] - a[0] for a in phis[0].axes)
    quotients, sups, d2 = [], [], []
    for phi in phis:
        seps = _separations(extent, max(phi.spacings))
        if not seps:
            raise ConfigError(f"grid spacing {max(phi.spacings):g} resolves no separation "
                              f"of a box of extent {extent:g}; refine the grid")
        q = _quotients(phi, alphas, seps)
        quotients.append(q)
        sups.append({a: max(q[a].values()) for a in alphas})
        d2.append(float(np.abs(directional_curvatures(phi.values, phi.spacings)).max()))
    trend, verdict = {}, {}
    for a in alphas:
        coarse, fine = sups[0][a], sups[-1][a]
        ratio = fine / coarse if coarse > 0 else (1.0 if fine == 0 else math.inf)
        trend[a] = ratio
        flat = fine <= noise_floor
        verdict[a] = "bounded" if flat or ratio <= threshold else "diverging"
    return RegularityReport(alphas, tuple(p.spacings for p in phis), quotients, sups, d2,
                            trend, verdict, threshold)


def _bump(y, centre, radius):
    r2 = ((y - centre) / radius) ** 2
    return np.where(r2 < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)


@dataclass
class MomentTable:
    t_samples: tuple
    orders: tuple
    moments: dict  # t -> {order: value}; order 0 is the total mass
    bumps: tuple = ()  # (centre, radius) pairs
    bump_values: dict = field(default_factory=dict)  # t -> [value per bump]
    variation: dict = field(default_factory=dict)  # entry -> cross-t relative variation
    volume: float = 1.0
    mass_error: float = 0.0  # max_t |mu_t(1) - V| / V

    def rows(self):
        for t in self.t_samples:
            row = [t] + [self.moments[t][m] for m in (0,) + tuple(self.orders)]
            yield row + list(self.bump_values.get(t, []))

    def header(self):
        return (["t", "mass"] + [f"m{m}" for m in self.orders]
                + [f"bump{i}" for i in range(len(self.bumps))])


def _node(axis, value):
    j = int(np.argmin(np.abs(axis - value)))
    if abs(axis[j] - value) > 1e-9 * max(1.0, abs(value)):
        raise ConfigError(f"t = {value} is not a grid node")
    if j == 0 or j == len(axis) - 1:
        raise ConfigError(f"t = {value} needs neighbours for a central difference")
    return j


def moment_measure(phi, metric, t_samples=(-0.5, -1.0, -2.0), orders=(1, 2, 3),
                   bumps=None, density_floor=DENSITY_FLOOR):
    """mu_t(f) = int_X f(d_t phi) omega_phi^n on the grid, for each t sample.

    ``phi`` is the ray (not the full potential); the omega_phi density is the
    calibrated determinant of the x-Hessian of f_0 + phi at fixed t, taken at
    interior x nodes with cell weight prod(h_x).
    """
    xs = phi.x_points()
    f0 = metric.potential(xs).reshape(tuple(len(a) for a in phi.x_axes))
    hx = phi.spacings[:-1]
    cell = float(np.prod(hx))
    h_t = phi.spacings[-1]
    idx = {t: _node(phi.t, t) for t in t_samples}
    dots, dens = {}, {}
    for t, j in idx.items():
        dot = (phi.values[..., j + 1] - phi.values[..., j - 1]) / (2.0 * h_t)
        det, margin = _central_determinant(f0 + phi.values[..., j], hx)
        d = metric.calibration * det
        if d.min() < density_floor:
            raise InvariantViolation(
                f"negative omega_phi density {d.min():.3e} at t={t}",
                record={"t": t, "min_density": float(d.min())})
        inner = tuple(slice(margin, s - margin) for s in dot.shape)
        dots[t], dens[t] = dot[inner], d
    lo = min(float(d.min()) for d in dots.values())
    hi = max(float(d.max()) for d in dots.values())
    if bumps is None:
        width = hi - lo if hi - lo > 1e-12 else 3.0
        mid = 0.5 * (lo + hi)
        bumps = ((mid - width / 6.0, width / 3.0), (mid + width / 6.0, width / 3.0))
    moments, bump_values = {}, {}
    for t in t_samples:
        w = dens[t] * cell
        moments[t] = {0: float(w.sum())}
        for m in orders:
            moments[t][m] = float((dots[t] ** m * w).sum())
        bump_values[t] = [float((_bump(dots[t], c, r) * w).sum()) for c, r in bumps]
    variation = {}
    entries = [("m", m) for m in (0,) + tuple(orders)] + [("bump", i) for i in range(len(bumps))]
    for kind, key in entries:
        vals = np.array([moments[t][key] if kind == "m" else bump_values[t][key]
                         for t in t_samples])
        scale = np.abs(vals).max()
        spread = float(vals.max() - vals.min())
        variation[f"{kind}{key}"] = spread / scale if scale > 1e-12 else spread
    volume = metric.volume
    mass_error = max(abs(moments[t][0] - volume) / volume for t in t_samples)
    return MomentTable(tuple(t_samples), tuple(orders), moments, tuple(bumps), bump_values,
                       variation, volume, mass_error)
