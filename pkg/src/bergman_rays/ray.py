"""Bergman approximations Phi_k of a geodesic ray, their differences Psi_k and
the upper envelope.

    Phi_k(z, w) = (1/k) log sum_alpha |w|^{2 eta_alpha} |s_alpha(z)|^2_{h_0^k} - (n/k) log k

With t = log|w| every term is exp(2 eta_alpha t + <alpha, x> - k f_0(x) - log r_alpha^2),
so Phi_k is evaluated as a log-sum-exp; at t = -8, k = 32 the individual terms
span hundreds of orders of magnitude.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, InvariantViolation
from .grid import GridFunction
from .stencils import min_curvature
from .weights import trace_ratio, traceless_weights, weights

PSH_TOL = 1e-6
IDENTITY_TOL = 1e-12


def _log_bergman_sum(basis, exponents, x_axes, t, chunk=64):
    """log sum_alpha exp(exponents_alpha * 2t + <alpha,x> - log r_alpha^2), shape (*nx, nt).

    The -k f_0 factor is left out; callers add it back when they want Phi_k
    rather than the convex potential f_0 + Phi_k.
    """
    mesh = np.meshgrid(*x_axes, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=1)
    base = xs @ basis.index.points.T.astype(float) - basis.log_norms_sq[None, :]
    slope = 2.0 * np.asarray(exponents, dtype=float)
    out = np.empty((len(xs), len(t)))
    for start in range(0, len(t), chunk):
        tt = t[start:start + chunk]
        terms = base[:, None, :] + tt[None, :, None] * slope[None, None, :]
        out[:, start:start + chunk] = logsumexp(terms, axis=2)
    return out.reshape(tuple(len(a) for a in x_axes) + (len(t),))


def _check_level(basis, k):
    if basis.k != k:
        raise ConfigError(f"basis is for level {basis.k}, not {k}")


def convex_potential(basis, ws, x_axes, t, k, exponents=None):
    """f_0 + Phi_k: a (1/k)-scaled log-sum-exp of affine functions of (x, t)."""
    _check_level(basis, k)
    if exponents is None:
        exponents = weights(ws, k, basis.index)
    n = basis.index.points.shape[1]
    vals = _log_bergman_sum(basis, exponents, x_axes, t) / k - n / k * math.log(k)
    return GridFunction(x_axes, t, vals, level=k)


def phi_k(basis, ws, x_axes, t, k, exponents=None):
    """Phi_k on the grid; ``exponents`` overrides the integer weights (e.g. lambda)."""
    conv = convex_potential(basis, ws, x_axes, t, k, exponents)
    mesh = np.meshgrid(*x_axes, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=1)
    f0 = basis.metric.potential(xs).reshape(tuple(len(a) for a in x_axes))
    return conv.with_values(conv.values - f0[..., None], level=k)


def phi_sharp(basis, ws, x_axes, t, k):
    """Phi_k built from the traceless weights lambda^(k)."""
    lam = np.array([float(v) for v in traceless_weights(ws, k, basis.index)])
    out = phi_k(basis, ws, x_axes, t, k, exponents=lam)
    out.meta["weights"] = "traceless"
    return out


def phi_sharp_identity(phi, phi_hash, ws, k, tol=IDENTITY_TOL):
    """max |Phi_k - Phi_k^# - (Tr B_k / k(N_k+1)) 2t| over the grid."""
    if not phi.same_grid(phi_hash):
        raise ConfigError("Phi_k and Phi_k^# live on different grids")
    ratio = float(trace_ratio(ws, k))
    shift = ratio * 2.0 * phi.t
    residual = float(np.max(np.abs(phi.values - phi_hash.values - shift)))
    if residual > tol:
        raise InvariantViolation(
            f"trace-shift identity residual {residual:.3e} > {tol:.0e} at k={k}",
            record={"k": k, "residual": residual, "trace_ratio": ratio})
    return residual


def psi_k(phi, phi_one):
    if not phi.same_grid(phi_one):
        raise ConfigError("Psi_k needs Phi_k and Phi_1 on the same grid")
    return phi.with_values(phi.values - phi_one.values, level=phi.level)


def _neighbour_max(values):
    out = values.copy()
    for axis in range(values.ndim):
        for shift in (1, -1):
            rolled = np.roll(values, shift, axis=axis)
            edge = [slice(None)] * values.ndim
            edge[axis] = 0 if shift == 1 else -1
            rolled[tuple(edge)] = -np.inf
            out = np.maximum(out, rolled)
    return out


def envelope(phis, k_cut, apply_filter=False):
    """sup_{l >= k_cut} Phi_l, with the usc step handled on the grid.

    The supremum of finitely many continuous functions is already upper
    semicontinuous, so by default the values are returned unchanged; the
    one-pass neighbour max-filter is still evaluated and its sup-norm effect
    recorded in ``meta['usc_filter_effect']`` so its decay under refinement
    can be watched.  ``apply_filter=True`` returns the filtered values.
    """
    chosen = [p for p in phis if p.level is not None and p.level >= k_cut]
    if len(chosen) < 3:
        raise ConfigError(f"envelope needs at least 3 levels >= {k_cut}, got {len(chosen)}")
    for p in chosen[1:]:
        if not p.same_grid(chosen[0]):
            raise ConfigError("envelope inputs live on different grids")
    sup = np.max(np.stack([p.values for p in chosen]), axis=0)
    filtered = _neighbour_max(sup)
    effect = float(np.max(filtered - sup))
    values = filtered if apply_filter else sup
    out = chosen[0].with_values(values, level="envelope",
                                k_cut=k_cut, levels=[p.level for p in chosen],
                                usc_filter_effect=effect, filter_applied=apply_filter)
    return out


def ladder(k_cut, k_max):
    levels = []
    k = k_cut
    while k <= k_max:
        levels.append(k)
        k *= 2
    return levels


def boundary_decay(phi):
    """a_k = sup over the t = 0 slice of |Phi_k| (the ray must vanish at |w| = 1)."""
    if not np.isclose(phi.t[-1], 0.0):
        raise ConfigError("grid does not contain t = 0")
    return float(np.max(np.abs(phi.values[..., -1])))


def decay_slope(levels, values):
    """Least-squares slope of log(values) against log(levels)."""
    return float(np.polyfit(np.log(levels), np.log(values), 1)[0])


def psi_lower_bound(k, n, volume, sup_norm, count_k, count_1):
    """-(1/k) log(V (N_k+1)) - 2 log M - (n/k) log k - log(N_1+1)."""
    return (-math.log(volume * count_k) / k - 2.0 * math.log(sup_norm)
            - n / k * math.log(k) - math.log(count_1))


def uniform_bound_check(psis, bases, basis_one):
    """Check min Psi_k against the explicit lower bound for every level.

    ``psis`` maps k -> Psi_k, ``bases`` maps k -> OrthonormalBasis.
    """
    n = basis_one.index.points.shape[1]
    rows = {}
    violations = []
    running = 0.0
    for k in sorted(psis):
        psi = psis[k]
        bound = psi_lower_bound(k, n, basis_one.volume, basis_one.sup_norm,
                                   bases[k].index.size, basis_one.index.size)
        lo, hi = float(psi.values.min()), float(psi.values.max())
        running = max(running, abs(lo), abs(hi))
        rows[k] = {"min": lo, "max": hi, "lower_bound": bound, "margin": lo - bound,
                   "running_sup_abs": running}
        if lo < bound:
            violations.append({"k": k, "min": lo, "bound": bound})
    report = {"levels": rows, "sup_abs": running, "violations": violations}
    if violations:
        raise InvariantViolation("Psi_k fell below the proven lower bound", record=report)
    return report


def t_derivative(gf):
    """First differences in t that satisfy the mean value theorem: central in the
    interior, one-sided at the ends."""
    return np.gradient(gf.values, gf.t, axis=-1, edge_order=1)


def t_derivative_check(phi, ws, k, strip=0.5, tol=1e-9, psi=None):
    """|d_t Phi_k| <= (2/k) max|eta| on the strip t in [-strip, 0].

    d_t Phi_k is a weighted average of 2 eta_alpha / k, and the differences
    used are mean values of d_t, so the bound holds up to rounding.
    """
    eta = weights(ws, k)
    bound = 2.0 / k * float(np.max(np.abs(eta)))
    mask = phi.t >= -strip - 1e-12
    dphi = t_derivative(phi)[..., mask]
    sup_phi = float(np.max(np.abs(dphi)))
    report = {"k": k, "bound": bound, "sup_dt_phi": sup_phi,
              "h_t": phi.spacings[-1]}
    if psi is not None:
        report["sup_dt_psi"] = float(np.max(np.abs(t_derivative(psi)[..., mask])))
    if sup_phi > bound + tol:
        raise InvariantViolation(f"|d_t Phi_{k}| = {sup_phi:.6g} exceeds {bound:.6g}",
                                 record=report)
    return report


def psh_margin(potential):
    """Minimum directional curvature of a convex potential (f_0 + Phi) over interior nodes."""
    return float(min_curvature(potential.values, potential.spacings).min())


@dataclass
class RayBundle:
    levels: list
    phi: dict
    psi: dict
    envelope: GridFunction
    diagnostics: dict = field(default_factory=dict)


def build_ray_bundle(bases, ws, x_axes, t, levels, k_cut, apply_filter=False,
                     executor=None, envelope_levels=None, identity_tol=IDENTITY_TOL):
    """Compute Phi_k, Psi_k and the envelope, plus the diagnostics that are
    cheap to attach.  ``bases`` maps k -> OrthonormalBasis and must include 1.
    The envelope runs over ``envelope_levels`` (default: every level >= k_cut)."""
    levels = sorted(set(levels) | set(envelope_levels or ()) | {1})
    run = (lambda f, items: list(executor.map(f, items))) if executor else \
        (lambda f, items: [f(i) for i in items])
    phis = dict(zip(levels, run(lambda k: phi_k(bases[k], ws, x_axes, t, k), levels)))
    psis = {k: psi_k(phis[k], phis[1]) for k in levels}
    chosen = envelope_levels if envelope_levels is not None else levels
    env_levels = [phis[k] for k in sorted(chosen) if k >= k_cut]
    env = envelope(env_levels, k_cut, apply_filter=apply_filter)
    sharp = {}
    for k in levels:
        sharp[k] = phi_sharp_identity(phis[k], phi_sharp(bases[k], ws, x_axes, t, k), ws, k,
                                      tol=identity_tol)
    diagnostics = {
        "boundary_decay": {k: boundary_decay(phis[k]) for k in levels},
        "psi_min": {k: float(psis[k].values.min()) for k in levels},
        "psi_max": {k: float(psis[k].values.max()) for k in levels},
        "trace_identity_residual": sharp,
        "phi_sup_abs": {k: float(np.max(np.abs(phis[k].values))) for k in levels},
        "usc_filter_effect": env.meta["usc_filter_effect"],
        "phi_at_depth": {k: float(np.max(np.abs(phis[k].values[..., 0]))) for k in levels},
    }
    diagnostics["interior_bound"] = max(diagnostics["phi_sup_abs"].values())
    return RayBundle(levels, phis, psis, env, diagnostics)
