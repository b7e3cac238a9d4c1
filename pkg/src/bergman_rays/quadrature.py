"""Adaptive Gauss-Legendre quadrature for vector-valued integrands.

Panels are bisected until the 2m-point and m-point rules on each panel agree.
The integrand maps a 1-D array of nodes to an array of shape ``(nodes, p)`` so
that many related integrals (one per lattice point, say) share the panel tree.
"""
import heapq

import numpy as np

from .errors import NumericalFailure

_RULES = {}


def _rule(m):
    if m not in _RULES:
        _RULES[m] = np.polynomial.legendre.leggauss(m)
    return _RULES[m]


def _panel(fun, a, b, m):
    xl, wl = _rule(m)
    xh, wh = _rule(2 * m)
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    nodes = np.concatenate([mid + half * xl, mid + half * xh])
    vals = np.asarray(fun(nodes), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    low = half * (wl @ vals[:m])
    high = half * (wh @ vals[m:])
    return high, np.abs(high - low)


def adaptive_gauss_legendre(fun, a, b, rtol=1e-12, atol=0.0, order=10,
                            initial_panels=16, max_panels=20000):
    """Integrate ``fun`` over ``[a, b]``.

    Returns ``(integral, error_estimate)``; both have shape ``(p,)``.
    Convergence is declared when, componentwise, the summed panel error is
    below ``max(atol, rtol * |integral|)``.
    """
    edges = np.linspace(a, b, initial_panels + 1)
    heap = []
    total = None
    err = None
    counter = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _panel(fun, lo, hi, order)
        total = val.copy() if total is None else total + val
        err = e.copy() if err is None else err + e
        heapq.heappush(heap, (-float(e.max()), counter, lo, hi, val, e))
        counter += 1

    def _target():
        return np.maximum(atol, rtol * np.abs(total))

    while np.any(err > _target()):
        if counter >= max_panels:
            rel = float(np.max(err / np.maximum(np.abs(total), 1e-300)))
            raise NumericalFailure(
                f"quadrature did not converge on [{a}, {b}] with {counter} panels",
                achieved=rel)
        _, _, lo, hi, val, e = heapq.heappop(heap)
        total -= val
        err -= e
        mid = 0.5 * (lo + hi)
        for l2, h2 in ((lo, mid), (mid, hi)):
            v2, e2 = _panel(fun, l2, h2, order)
            total += v2
            err += e2
            heapq.heappush(heap, (-float(e2.max()), counter, l2, h2, v2, e2))
            counter += 1
    # Re-sum in panel order so the result does not depend on heap history.
    panels = sorted(heap, key=lambda item: item[2])
    total = np.sum([p[4] for p in panels], axis=0)
    err = np.sum([p[5] for p in panels], axis=0)
    return total, err


def tensor_gauss_legendre(fun, lower, upper, panels, order=12, chunk=65536):
    """Composite tensor-product Gauss-Legendre rule with ``panels`` per axis."""
    xg, wg = _rule(order)
    axes, weights = [], []
    for lo, hi in zip(lower, upper):
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        axes.append((mid[:, None] + half[:, None] * xg[None, :]).ravel())
        weights.append((half[:, None] * wg[None, :]).ravel())
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    wmesh = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1), axis=-1).ravel()
    total = None
    for start in range(0, len(mesh), chunk):
        vals = np.asarray(fun(mesh[start:start + chunk]), dtype=float)
        part = wmesh[start:start + chunk] @ vals
        total = part if total is None else total + part
    return total


def integrate_box(fun, lower, upper, rtol=1e-12, atol=0.0, order=10, initial_panels=16,
                  max_panels=512):
    """Adaptive quadrature over an axis-aligned box.

    ``fun`` takes points of shape ``(m, n)`` and returns ``(m, p)``.  In one
    dimension panels are bisected locally; in higher dimensions the tensor rule
    is refined uniformly (panel count doubled) until successive estimates agree.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.size == 1:
        return adaptive_gauss_legendre(lambda s: fun(s[:, None]), lower[0], upper[0],
                                       rtol=rtol, atol=atol, order=order,
                                       initial_panels=initial_panels)
    panels = initial_panels
    prev = tensor_gauss_legendre(fun, lower, upper, panels, order)
    while True:
        panels *= 2
        cur = tensor_gauss_legendre(fun, lower, upper, panels, order)
        err = np.abs(cur - prev)
        if np.all(err <= np.maximum(atol, rtol * np.abs(cur))):
            return cur, err
        if panels >= max_panels:
            rel = float(np.max(err / np.maximum(np.abs(cur), 1e-300)))
            raise NumericalFailure("tensor quadrature did not converge", achieved=rel)
        prev = cur
