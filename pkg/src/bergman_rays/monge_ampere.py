"""Discrete Monge-Ampere measures of invariant potentials.

For a T^n x S^1 invariant function the complex Monge-Ampere measure of the
full potential F(x, t) is a constant multiple of det D^2_{(x,t)} F dx dt.  The
constant is the same calibration that turns det D^2 f_0 into omega_0^n.

In two dimensions (n = 1) the determinant is the wide-stencil formula
min over orthogonal stencil frames (v, w) of D_vv F * D_ww F, which is exact
(zero) for potentials affine along a stencil direction, as geodesic rays are.
In higher dimensions a clamped central-difference determinant is used.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvariantViolation, NumericalFailure
from .grid import GridFunction
from .stencils import FRAMES_2D, interior_slices, min_curvature, second_difference

logger = logging.getLogger(__name__)

NEG_FLOOR = -1e-9


@dataclass
class MAField:
    potential: GridFunction
    cell_masses: np.ndarray  # on interior nodes
    total: float
    calibration: float
    clamp: float  # total mass removed by clamping negative determinants
    margin: int
    method: str

    def interior_axes(self):
        return tuple(a[self.margin:len(a) - self.margin] for a in self.potential.axes)

    def mass_where(self, mask):
        """Total mass over interior nodes selected by a full-grid boolean mask."""
        inner = mask[interior_slices(mask.shape, self.margin)]
        return float(self.cell_masses[inner].sum())

    def mass_in_t_window(self, t_min, t_max):
        t_int = self.interior_axes()[-1]
        sel = (t_int >= t_min - 1e-12) & (t_int <= t_max + 1e-12)
        return float(self.cell_masses[..., sel].sum())


def _wide_determinant(values, spacings):
    margin = 2
    hx, ht = spacings
    raw = None
    for v, w in FRAMES_2D:
        dv = second_difference(values, v, margin) / (v[0] ** 2 + v[1] ** 2)
        dw = second_difference(values, w, margin) / (w[0] ** 2 + w[1] ** 2)
        # Hadamard: for PSD Hessians every frame product bounds det from above;
        # a negative curvature in either direction makes the frame negative
        prod = dv * dw
        cand = np.where(np.minimum(dv, dw) < 0, -np.abs(prod), prod)
        raw = cand if raw is None else np.minimum(raw, cand)
    return raw / (hx * ht) ** 2, margin


def _central_determinant(values, spacings):
    dim = values.ndim
    margin = 1
    hess = np.empty(tuple(s - 2 for s in values.shape) + (dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            if i == j:
                v = [0] * dim
                v[i] = 1
                d = second_difference(values, tuple(v), margin) / spacings[i] ** 2
            else:
                sl = lambda si, sj: tuple(
                    slice(1 + (si if a == i else sj if a == j else 0),
                          values.shape[a] - 1 + (si if a == i else sj if a == j else 0))
                    for a in range(dim))
                d = (values[sl(1, 1)] - values[sl(1, -1)] - values[sl(-1, 1)]
                     + values[sl(-1, -1)]) / (4 * spacings[i] * spacings[j])
            hess[..., i, j] = d
            hess[..., j, i] = d
    return np.linalg.det(hess), margin


def ma_measure(F, calibration=1.0, method=None):
    """Cell masses of (background + dd^c u)^{n+1} for the full convex potential F."""
    if not np.all(np.isfinite(F.values)):
        raise NumericalFailure("non-finite potential values")
    dim = F.values.ndim
    method = method or ("wide" if dim == 2 else "central")
    if method == "wide":
        if dim != 2:
            raise ConfigError("the wide-stencil determinant is implemented for (x, t) in 2-D only")
        det, margin = _wide_determinant(F.values, F.spacings)
    elif method == "central":
        det, margin = _central_determinant(F.values, F.spacings)
    else:
        raise ConfigError(f"unknown Monge-Ampere method {method!r}")
    if not np.all(np.isfinite(det)):
        raise NumericalFailure("overflow in discrete Hessian determinant")
    cell = float(np.prod(F.spacings))
    masses = calibration * det * cell
    clamp = float(-masses[masses < 0].sum())
    masses = np.maximum(masses, 0.0)
    return MAField(F, masses, float(masses.sum()), calibration, clamp, margin, method)


def analytic_product_mass(metric, c, x_lo, x_hi, t_lo, t_hi):
    """Exact mass of f_0(x) + c t^2 over [x_lo, x_hi] x [t_lo, t_hi] (n = 1)."""
    g = metric.gradient(np.array([[x_hi], [x_lo]]))[:, 0]
    return metric.calibration * float(g[0] - g[1]) * 2.0 * c * (t_hi - t_lo)


def calibration_error(metric, x_axes, t, c=1.0):
    """Relative error of the discrete mass of f_0 + c t^2 against its exact value,
    both taken over the union of interior cells."""
    x = x_axes[0]
    pot = GridFunction.from_callable(
        lambda X, T: metric.potential(X.reshape(-1, 1)).reshape(X.shape) + c * T ** 2,
        x_axes, t)
    field_ = ma_measure(pot, metric.calibration)
    m = field_.margin
    hx, ht = pot.spacings
    exact = analytic_product_mass(metric, c, x[m] - hx / 2, x[-1 - m] + hx / 2,
                                  t[m] - ht / 2, t[-1 - m] + ht / 2)
    return abs(field_.total - exact) / exact, field_.total, exact


def mass_decay(psis, background_one, calibration=1.0, window=(-4.0, 0.0), slack=0.10,
               mass_floor=1e-9):
    """Monge-Ampere mass of Omega_1 + dd^c Psi_k over the t-window, per level.

    ``background_one`` is the convex potential of Omega_1 (f_0 + Phi_1).
    Fits C in masses <= C/k as the geometric mean of k * mass and reports the
    log-log slope; any mass above (1 + slack) C/k is an invariant violation.
    Masses below ``mass_floor`` count as zero (degenerate baseline, no fit).
    """
    ks = sorted(psis)
    masses = {}
    clamps = {}
    for k in ks:
        if not psis[k].same_grid(background_one):
            raise ConfigError("background and Psi_k grids differ")
        pot = background_one.with_values(background_one.values + psis[k].values, level=k)
        f = ma_measure(pot, calibration)
        masses[k] = f.mass_in_t_window(*window)
        clamps[k] = f.clamp
    if any(m < NEG_FLOOR for m in masses.values()):
        raise InvariantViolation("negative Monge-Ampere mass", record={"masses": masses})
    report = {"levels": ks, "masses": masses, "clamp": clamps, "window": list(window)}
    positive = [k for k in ks if masses[k] > mass_floor]
    if len(positive) >= 2:
        report["slope"] = float(np.polyfit(np.log(positive),
                                           np.log([masses[k] for k in positive]), 1)[0])
        C = float(np.exp(np.mean([np.log(k * masses[k]) for k in positive])))
        report["C"] = C
        excess = {k: masses[k] * k / C - 1.0 for k in positive}
        report["max_excess"] = max(excess.values())
        if report["max_excess"] > slack:
            raise InvariantViolation("Monge-Ampere mass exceeds fitted C/k", record=report)
    else:
        report.update(slope=None, C=0.0, max_excess=0.0, degenerate=True)
    return report


def _perimeter(mask, spacings):
    """Length of the boundary of a node set, counting grid edges between in/out nodes."""
    hx, ht = spacings
    edges_x = np.count_nonzero(mask[1:, :] != mask[:-1, :])
    edges_t = np.count_nonzero(mask[:, 1:] != mask[:, :-1])
    return edges_x * ht + edges_t * hx


def comparison_check(u, v, background, calibration=1.0, c_tol=1.0, psh_tol=1e-6):
    """Compare MA masses of background+v and background+u on S = {u < v}.

    Returns ``(mass_v_on_S, mass_u_on_S, ok)``.  The tolerance is
    c_tol * h * perimeter(S) with h the larger grid spacing.
    """
    for gf in (u, v):
        if not gf.same_grid(background):
            raise ConfigError("comparison inputs live on different grids")
    full_u = background.values + u.values
    full_v = background.values + v.values
    for name, arr in (("u", full_u), ("v", full_v)):
        mc = float(min_curvature(arr, background.spacings).min())
        if mc < -psh_tol:
            raise ConfigError(f"{name} is not background-psh on the grid (min curvature {mc:.3e})")
    edge = np.ones(u.values.shape, dtype=bool)
    edge[interior_slices(edge.shape, 1)] = False
    if np.any(u.values[edge] < v.values[edge]):
        raise ConfigError("boundary condition u >= v violated on the grid boundary")
    S = u.values < v.values
    mu = ma_measure(background.with_values(full_u), calibration)
    mv = ma_measure(background.with_values(full_v), calibration)
    mass_u = mu.mass_where(S)
    mass_v = mv.mass_where(S)
    tol = c_tol * max(background.spacings) * _perimeter(S, background.spacings)
    return mass_v, mass_u, bool(mass_v <= mass_u + tol)


def _draw_pair(rng, background):
    """A psh pair (u, v = u + eps * bump) with the bump's concavity dominated by u.

    u is a convex quadratic centred at a random node, v adds
    eps (1 - r^2)_+ on a random ellipse well inside the grid, so S = {u < v}
    is the ellipse and the boundary condition u >= v holds on the grid edge.
    """
    X, T = background.mesh()
    x0, x1 = X.min(), X.max()
    t0, t1 = T.min(), T.max()
    lx, lt = x1 - x0, t1 - t0
    rx = rng.uniform(0.08, 0.25) * lx
    rt = rng.uniform(0.08, 0.25) * lt
    xc = rng.uniform(x0 + 1.2 * rx, x1 - 1.2 * rx)
    tc = rng.uniform(t0 + 1.2 * rt, t1 - 1.2 * rt)
    ax = rng.uniform(0.2, 2.0) / lx ** 2
    at = rng.uniform(0.2, 2.0) / lt ** 2
    kappa = rng.uniform(0.1, 0.9)
    eps = 0.5 * kappa * min(ax * rx ** 2, at * rt ** 2)
    qx, qt = rng.uniform(x0, x1), rng.uniform(t0, t1)
    u = 0.5 * (ax * (X - qx) ** 2 + at * (T - qt) ** 2)
    r2 = ((X - xc) / rx) ** 2 + ((T - tc) / rt) ** 2
    v = u + eps * np.maximum(1.0 - r2, 0.0)
    params = {"rx": rx, "rt": rt, "xc": xc, "tc": tc, "ax": ax, "at": at,
              "eps": eps, "qx": qx, "qt": qt}
    return background.with_values(u), background.with_values(v), params


def comparison_harness(background, draws=100, seed=0, calibration=1.0, c_tol=1.0,
                       executor=None):
    """Run ``draws`` randomized comparison checks plus the two equality cases.

    Each draw has its own child of ``SeedSequence(seed)``, so results do not
    depend on scheduling.  A failing draw aborts with its parameters in the
    violation record.
    """
    children = np.random.SeedSequence(seed).spawn(draws)

    def one(i):
        u, v, params = _draw_pair(np.random.default_rng(children[i]), background)
        mv, mu, ok = comparison_check(u, v, background, calibration, c_tol)
        return {"draw": i, "mass_v": mv, "mass_u": mu, "ok": ok, **params}

    rows = list(executor.map(one, range(draws))) if executor else [one(i) for i in range(draws)]
    failed = [r for r in rows if not r["ok"]]
    if failed:
        raise InvariantViolation("comparison inequality failed", record={"failed": failed})
    zero = background.with_values(np.zeros_like(background.values))
    equal = comparison_check(zero, zero, background, calibration, c_tol)
    shifted = comparison_check(zero.with_values(zero.values + 0.25), zero, background,
                               calibration, c_tol)
    exact = {"u_equals_v": equal, "u_equals_v_plus_c": shifted}
    for name, (mv, mu, ok) in exact.items():
        if not (ok and mv == 0.0 and mu == 0.0):
            raise InvariantViolation(f"equality case {name} failed",
                                     record={"case": name, "mass_v": mv, "mass_u": mu})
    return {"draws": rows, "equality_cases": exact, "seed": seed}


def _lower_hull_1d(s, y):
    """Values at s of the lower convex hull of the points (s_i, y_i); s increasing."""
    hull = []
    for i in range(len(s)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (y[b] - y[a]) * (s[i] - s[a]) >= (y[i] - y[a]) * (s[b] - s[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(s, s[hull], y[hull])


def _line_starts(shape, v):
    """Grid nodes from which a line in direction v starts (p - v is outside)."""
    nx, nt = shape
    starts = []
    for i in range(nx):
        for j in range(nt):
            if not (0 <= i - v[0] < nx and 0 <= j - v[1] < nt):
                starts.append((i, j))
    return starts


def directional_convex_envelope(values, max_sweeps=50, tol=1e-13):
    """Largest function below ``values`` that is convex along every stencil line.

    Each sweep replaces the data on every lattice line (for each stencil
    direction) by its 1-D lower convex hull; end points of lines are kept, so
    boundary data is respected.  Iterated to a fixed point.
    """
    from .stencils import DIRECTIONS_2D

    u = values.astype(float).copy()
    shape = u.shape
    lines = {}
    for v in DIRECTIONS_2D:
        idx = []
        for i0, j0 in _line_starts(shape, v):
            ii, jj = [], []
            i, j = i0, j0
            while 0 <= i < shape[0] and 0 <= j < shape[1]:
                ii.append(i)
                jj.append(j)
                i += v[0]
                j += v[1]
            if len(ii) >= 3:
                idx.append((np.array(ii), np.array(jj)))
        lines[v] = idx
    for sweep in range(max_sweeps):
        before = u.copy()
        for v, idx in lines.items():
            for ii, jj in idx:
                s = np.arange(len(ii), dtype=float)
                u[ii, jj] = np.minimum(u[ii, jj], _lower_hull_1d(s, u[ii, jj]))
        if np.max(np.abs(u - before)) <= tol:
            return u, sweep + 1
    return u, max_sweeps


def uniqueness_probe(phi, background, delta, perturbation=None, mass_tol=1e-6,
                     calibration=1.0):
    """Perturb a solution of the degenerate equation and project back.

    The projection is the directional convex envelope of background + phi +
    delta * perturbation with the boundary values fixed.  A maximal (zero-mass)
    solution is recovered exactly, so the reported sup-distance should vanish
    as delta -> 0 and stay at grid level otherwise.
    """
    full = background.values + phi.values
    base_mass = ma_measure(background.with_values(full), calibration).total
    if base_mass > mass_tol:
        raise ConfigError(f"phi does not solve the degenerate equation (mass {base_mass:.3e})")
    if perturbation is None:
        X, T = phi.mesh()
        xc = 0.5 * (X.min() + X.max())
        tc = 0.5 * (T.min() + T.max())
        rx = 0.25 * (X.max() - X.min())
        rt = 0.25 * (T.max() - T.min())
        r2 = ((X - xc) / rx) ** 2 + ((T - tc) / rt) ** 2
        perturbation = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1 - r2, 1e-300)) * np.e, 0.0)
    perturbed = full + delta * perturbation
    projected, sweeps = directional_convex_envelope(perturbed)
    distance = float(np.max(np.abs(projected - full)))
    return {"delta": delta, "distance": distance, "sweeps": sweeps,
            "h": max(phi.spacings), "base_mass": base_mass,
            "perturbation_sup": float(np.max(np.abs(delta * perturbation)))}
