"""Per-config orchestration shared by the command line and the acceptance suite.

A ``Context`` caches orthonormal bases and ray bundles so that several
reports on one config reuse the expensive pieces.  Every report returns a
JSON-ready payload and, where relevant, CSV tables as (header, rows).
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .monge_ampere import comparison_harness, mass_decay
from .ray import (build_ray_bundle, convex_potential, decay_slope, psh_margin,
                  t_derivative_check, uniform_bound_check)
from .regularity import holder_estimate, moment_measure
from .toric import build_basis, lattice_points
from .triangular import expand_power, expansion_rows, verify_bound, verify_support
from .weights import futaki, trace_ratio


@dataclass
class Context:
    cfg: object
    threads: int = 1
    _bases: dict = field(default_factory=dict)
    _bundles: dict = field(default_factory=dict)

    def executor(self):
        return ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None

    def basis(self, k):
        if k not in self._bases:
            cfg = self.cfg
            self._bases[k] = build_basis(cfg.polytope, k, cfg.metric, rtol=cfg.quadrature_tol)
        return self._bases[k]

    def bases(self, levels):
        missing = [k for k in levels if k not in self._bases]
        ex = self.executor()
        if ex is not None and missing:
            with ex:
                for k, b in zip(missing, ex.map(self.basis, missing)):
                    self._bases[k] = b
        return {k: self.basis(k) for k in levels}

    def bundle(self, cells=None):
        cfg = self.cfg
        cells = cfg.resolutions[-1] if cells is None else cells
        if cells not in self._bundles:
            levels = cfg.all_levels
            x_axes, t = cfg.grid(cells)
            ex = self.executor()
            try:
                b = build_ray_bundle(self.bases(levels), cfg.weights, x_axes, t, levels,
                                     cfg.k_cut, executor=ex,
                                     envelope_levels=cfg.envelope_levels,
                                     identity_tol=cfg.identity_tol)
            finally:
                if ex is not None:
                    ex.shutdown()
            for gf in list(b.phi.values()) + list(b.psi.values()) + [b.envelope]:
                gf.config_hash = cfg.hash
            self._bundles[cells] = b
        return self._bundles[cells]


def ray_report(ctx, cells=None):
    cfg = ctx.cfg
    b = ctx.bundle(cells)
    x_axes, t = b.envelope.x_axes, b.envelope.t
    psh = {}
    for k in b.levels:
        conv = convex_potential(ctx.basis(k), cfg.weights, x_axes, t, k)
        psh[k] = psh_margin(conv)
    payload = {
        "config": cfg.name, "levels": b.levels, "k_cut": cfg.k_cut,
        "envelope_levels": b.envelope.meta["levels"],
        "grid": {"cells": len(t) - 1, "spacings": list(b.envelope.spacings)},
        "diagnostics": b.diagnostics, "psh_margin": psh,
        "sup_norm_M": ctx.basis(1).sup_norm, "volume": cfg.metric.volume,
    }
    bad = {k: v for k, v in psh.items() if v < -cfg.psh_tol}
    if bad:
        raise InvariantViolation("f_0 + Phi_k is not convex on the grid",
                                 record={"psh_margin": bad})
    shown = [k for k in cfg.levels if k in b.phi]
    header = [f"x{i + 1}" for i in range(cfg.polytope.dimension)] + ["t", "envelope"] + \
        [f"phi_{k}" for k in shown]
    mesh = b.envelope.mesh()
    cols = [m.ravel() for m in mesh] + [b.envelope.values.ravel()] + \
        [b.phi[k].values.ravel() for k in shown]
    rows = (list(r) for r in zip(*(c.tolist() for c in cols)))
    return payload, {"ray.csv": (header, rows)}


def bounds_report(ctx, cells=None):
    cfg = ctx.cfg
    b = ctx.bundle(cells)
    bases = ctx.bases(b.levels)
    uniform = uniform_bound_check(b.psi, bases, bases[1])
    decay = b.diagnostics["boundary_decay"]
    fit = [k for k in b.levels if 4 <= k <= 32 and decay[k] > 0]
    slope = decay_slope(fit, [decay[k] for k in fit]) if len(fit) >= 2 else None
    dt = {k: t_derivative_check(b.phi[k], cfg.weights, k, psi=b.psi[k]) for k in b.levels}
    payload = {"config": cfg.name, "uniform_bound": uniform, "boundary_decay": decay,
               "decay_slope": slope, "t_derivative": dt,
               "sup_dt_psi": max(r["sup_dt_psi"] for r in dt.values())}
    rows = [[k, decay[k], uniform["levels"][k]["min"], uniform["levels"][k]["max"],
             uniform["levels"][k]["lower_bound"], dt[k]["sup_dt_phi"], dt[k]["bound"]]
            for k in b.levels]
    header = ["k", "a_k", "psi_min", "psi_max", "lower_bound", "sup_dt_phi", "dt_bound"]
    return payload, {"bounds.csv": (header, rows)}


def triangular_report(ctx, ks=None):
    cfg = ctx.cfg
    ks = list(range(1, cfg.triangular_k_max + 1)) if ks is None else list(ks)
    b1 = ctx.basis(1)
    betas = [tuple(int(c) for c in p) for p in lattice_points(cfg.polytope, 1)]
    rows, summary = [], []
    for k in ks:
        bk = ctx.basis(k)
        for beta in betas:
            exp = expand_power(beta, k, b1, bk, support_tol=cfg.support_tol)
            ok, violations, diag = verify_support(exp, cfg.weights, cfg.support_tol)
            bound_ok, margin = verify_bound(exp, b1)
            entry = {"beta": list(beta), "k": k, "max_abs_a": float(np.max(np.abs(exp.coefficients))),
                     "bound": exp.bound, "bound_margin": margin,
                     "support_size": int(exp.support.sum()),
                     "reconstruction_residual": exp.reconstruction_residual,
                     "traceless_form_failures": len(diag["traceless_form_failures"])}
            summary.append(entry)
            rows.extend(expansion_rows(exp, cfg.weights))
            if not ok:
                raise InvariantViolation(
                    f"support condition fails for beta={beta}, k={k}",
                    record={"beta": list(beta), "k": k, "violations": violations})
            if not bound_ok:
                raise InvariantViolation(
                    f"coefficient bound fails for beta={beta}, k={k}", record=entry)
    header = ["beta", "k", "alpha", "abs_a", "eta_alpha", "k_eta_beta", "bound"]
    return {"config": cfg.name, "expansions": summary}, {"triangular.csv": (header, rows)}


def mass_report(ctx, cells=None):
    cfg = ctx.cfg
    b = ctx.bundle(cells)
    psis = {k: b.psi[k] for k in cfg.mass_levels}
    background = convex_potential(ctx.basis(1), cfg.weights, b.envelope.x_axes,
                                  b.envelope.t, 1)
    report = mass_decay(psis, background, cfg.metric.calibration, cfg.mass_window,
                        cfg.mass_slack)
    report["config"] = cfg.name
    rows = [[k, report["masses"][k], report["clamp"][k]] for k in report["levels"]]
    return report, {"mass.csv": (["k", "mass", "clamp"], rows)}


def compare_report(ctx, cells=None, seed=None, draws=None):
    cfg = ctx.cfg
    x_axes, t = cfg.grid(cells)
    background = convex_potential(ctx.basis(1), cfg.weights, x_axes, t, 1)
    ex = ctx.executor()
    try:
        report = comparison_harness(background, draws or cfg.draws,
                                    cfg.seed if seed is None else seed,
                                    cfg.metric.calibration, cfg.comparison_tol, executor=ex)
    finally:
        if ex is not None:
            ex.shutdown()
    keys = ["draw", "mass_v", "mass_u", "ok", "eps", "rx", "rt", "xc", "tc", "ax", "at",
            "qx", "qt"]
    rows = [[r[k] for k in keys] for r in report["draws"]]
    payload = {"config": cfg.name, "seed": report["seed"], "draws": len(rows),
               "passed": sum(r["ok"] for r in report["draws"]),
               "equality_cases": report["equality_cases"]}
    return payload, {"compare.csv": (keys, rows)}


def regularity_report(ctx, resolutions=None):
    cfg = ctx.cfg
    resolutions = list(resolutions or cfg.resolutions)
    if len(resolutions) < 2:
        resolutions = [resolutions[0] // 2, resolutions[0]]
    envs = [ctx.bundle(c).envelope for c in resolutions]
    rep = holder_estimate(envs, cfg.alphas, cfg.holder_threshold)
    payload = rep.to_json()
    payload.update(config=cfg.name, cells=resolutions,
                   usc_filter_effect=[e.meta["usc_filter_effect"] for e in envs])
    rows = []
    for cells, q in zip(resolutions, rep.quotients):
        for a, per_s in q.items():
            for s, v in per_s.items():
                rows.append([cells, a, s, v])
    return payload, {"holder.csv": (["cells", "alpha", "s", "Q"], rows)}


def moments_report(ctx, cells=None):
    cfg = ctx.cfg
    env = ctx.bundle(cells).envelope
    table = moment_measure(env, cfg.metric, cfg.t_samples, cfg.orders)
    payload = {"config": cfg.name, "moments": table.moments, "variation": table.variation,
               "bumps": [list(b) for b in table.bumps], "bump_values": table.bump_values,
               "volume": table.volume, "mass_error": table.mass_error}
    return payload, {"moments.csv": (table.header(), list(table.rows()))}


def futaki_report(ctx):
    cfg = ctx.cfg
    fx = futaki(cfg.weights, cfg.polytope, cfg.futaki_samples)
    payload = {"config": cfg.name, "F0": str(fx.F0), "F1": str(fx.F1),
               "residual": str(fx.residual), "k_samples": list(fx.k_samples),
               "trace_coefficients": [str(c) for c in fx.trace_coefficients],
               "count_coefficients": [str(c) for c in fx.count_coefficients],
               "trace_ratios": {k: str(trace_ratio(cfg.weights, k)) for k in fx.k_samples}}
    return payload, fx


def closed_form_ray(x, t):
    """log((e^{2t} + e^x) / (1 + e^x)) evaluated without cancellation."""
    return np.logaddexp(2.0 * t, x) - np.logaddexp(0.0, x)


def closed_form_shift(k):
    return math.log1p(1.0 / k) / k
