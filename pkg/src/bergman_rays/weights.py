"""Weights of a C^*-action on sections, traceless weights and the Futaki expansion.

All trace arithmetic is exact (``fractions.Fraction``): whether F_1 vanishes is
a yes/no question that floating point cannot settle.
"""
import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NumericalFailure
from .toric import lattice_points

logger = logging.getLogger(__name__)


def _frac(value):
    return value if isinstance(value, Fraction) else Fraction(str(value))


@dataclass(frozen=True)
class AffinePiece:
    coefficients: tuple
    constant: Fraction

    def __call__(self, y):
        return sum(c * _frac(v) for c, v in zip(self.coefficients, y)) + self.constant


@dataclass
class WeightSystem:
    """Integer weights eta_alpha^(k), either generated or tabulated.

    A generator g is the min (concave) or max (convex) of rational affine
    pieces and yields eta_alpha^(k) = ceil(k g(alpha/k)) (or floor, by
    ``rounding``).  A table maps k -> {alpha: eta} and takes precedence at
    the levels it covers.

    Ceiling is the default because ceil(k g(beta)) <= k ceil(g(beta)): the
    weight of s_beta^k never exceeds k times the weight of s_beta, which is
    the support condition of the lower-triangular expansion.  Floor reverses
    that inequality wherever g is non-integral at a vertex.
    """

    polytope: object
    pieces: tuple = ()
    combinator: str = "min"
    table: dict = field(default_factory=dict)
    label: str = ""
    rounding: str = "ceil"

    def __post_init__(self):
        self.pieces = tuple(
            p if isinstance(p, AffinePiece)
            else AffinePiece(tuple(_frac(c) for c in p[0]), _frac(p[1]))
            for p in self.pieces)
        if self.combinator not in ("min", "max"):
            raise ConfigError(f"combinator must be 'min' or 'max', got {self.combinator!r}")
        if self.rounding not in ("ceil", "floor"):
            raise ConfigError(f"rounding must be 'ceil' or 'floor', got {self.rounding!r}")
        for p in self.pieces:
            if len(p.coefficients) != self.polytope.dimension:
                raise ConfigError("affine piece dimension does not match polytope")
        if self.combinator == "max" and len(set(self.pieces)) > 1:
            warnings.warn(f"weight generator {self.label!r} is a max of affine pieces "
                          "(convex, not concave)", stacklevel=2)

    @classmethod
    def trivial(cls, polytope):
        return cls(polytope, pieces=(((0,) * polytope.dimension, 0),), label="trivial")

    @classmethod
    def from_csv(cls, polytope, path, base=None):
        """Read a table with columns k, alpha_1..alpha_n, eta."""
        table = {}
        n = polytope.dimension
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if rows and not rows[0][0].strip().lstrip("-").isdigit():
            rows = rows[1:]
        for r in rows:
            if len(r) != n + 2:
                raise ConfigError(f"weight table row {r} has {len(r)} columns, expected {n + 2}")
            k = int(r[0])
            alpha = tuple(int(c) for c in r[1:n + 1])
            table.setdefault(k, {})[alpha] = int(r[n + 1])
        pieces = base.pieces if base is not None else ()
        combinator = base.combinator if base is not None else "min"
        rounding = base.rounding if base is not None else "ceil"
        return cls(polytope, pieces=pieces, combinator=combinator, table=table,
                   label=str(path), rounding=rounding)

    @property
    def is_trivial(self):
        return not self.table and all(
            all(c == 0 for c in p.coefficients) and p.constant == 0 for p in self.pieces)

    def generator(self, y):
        """g(y) for a rational point y of P."""
        if not self.pieces:
            raise ConfigError("weight system has no generator")
        vals = [p(y) for p in self.pieces]
        return min(vals) if self.combinator == "min" else max(vals)

    def generator_max_abs(self):
        """max_P |g|; the extreme values of a PL function sit at vertices or kinks,
        so sample vertices plus a fine rational grid of P."""
        pts = list(self.polytope.vertices)
        for q in (lattice_points(self.polytope, 24)):
            pts.append(tuple(Fraction(c, 24) for c in q))
        return max(abs(self.generator(y)) for y in pts)

    def eta(self, alpha, k):
        if k in self.table:
            try:
                return self.table[k][tuple(alpha)]
            except KeyError:
                raise ConfigError(f"weight table has no entry for k={k}, alpha={tuple(alpha)}")
        # k g(alpha/k) = comb_i(<a_i, alpha> + k c_i), exact
        val = self.generator(tuple(Fraction(int(a), k) for a in alpha)) * k
        return math.ceil(val) if self.rounding == "ceil" else math.floor(val)


def weights(ws, k, index=None):
    """Integer weight vector eta^(k) aligned with the lattice order of kP."""
    index = index or lattice_points(ws.polytope, k)
    return np.array([ws.eta(a, k) for a in index], dtype=np.int64)


def trace(ws, k, index=None):
    """Tr B_k as an exact integer."""
    return int(sum(int(e) for e in weights(ws, k, index)))


def traceless_weights(ws, k, index=None):
    """lambda^(k) as Fractions; their sum is exactly zero."""
    eta = [int(e) for e in weights(ws, k, index)]
    mean = Fraction(sum(eta), len(eta))
    return [Fraction(e) - mean for e in eta]


def trace_ratio(ws, k, index=None):
    """Tr B_k / (k (N_k + 1)), exact."""
    index = index or lattice_points(ws.polytope, k)
    return Fraction(trace(ws, k, index), k * index.size)


@dataclass
class FutakiExpansion:
    F0: Fraction
    F1: Fraction
    residual: Fraction
    k_samples: tuple
    trace_coefficients: tuple = ()
    count_coefficients: tuple = ()
    per_k_residuals: dict = field(default_factory=dict)


def _solve_exact(matrix, rhs):
    n = len(matrix)
    m = [list(row) + [b] for row, b in zip(matrix, rhs)]
    for i in range(n):
        piv = next(r for r in range(i, n) if m[r][i] != 0)
        m[i], m[piv] = m[piv], m[i]
        for r in range(n):
            if r != i and m[r][i] != 0:
                f = m[r][i] / m[i][i]
                m[r] = [a - f * b for a, b in zip(m[r], m[i])]
    return [m[i][n] / m[i][i] for i in range(n)]


def _poly_fit(ks, values, degree):
    """Exact interpolation on the first degree+1 samples; residuals on all."""
    base = ks[:degree + 1]
    mat = [[Fraction(k) ** j for j in range(degree + 1)] for k in base]
    coeffs = _solve_exact(mat, [Fraction(v) for v in values[:degree + 1]])
    resid = {k: Fraction(v) - sum(c * Fraction(k) ** j for j, c in enumerate(coeffs))
             for k, v in zip(ks, values)}
    return coeffs, resid


def futaki(ws, polytope, k_samples):
    """Leading coefficients F0, F1 of Tr B_k / (k (N_k+1)) = F0 + F1/k + ...

    Tr B_k and k(N_k+1) are fitted exactly as degree n+1 polynomials in k, then
    divided as formal series in 1/k.
    """
    n = polytope.dimension
    ks = sorted(set(int(k) for k in k_samples))
    if len(ks) < n + 2:
        raise ConfigError(f"need at least {n + 2} distinct k samples, got {len(ks)}")
    traces, counts = [], []
    for k in ks:
        index = lattice_points(polytope, k)
        traces.append(trace(ws, k, index))
        counts.append(k * index.size)
    deg = n + 1
    b, rb = _poly_fit(ks, traces, deg)
    q, rq = _poly_fit(ks, counts, deg)
    per_k = {k: max(abs(rb[k]), abs(rq[k])) for k in ks}
    residual = max(per_k.values())
    if residual != 0:
        raise NumericalFailure(
            "trace data is not polynomial of degree n+1 over the samples: "
            + ", ".join(f"k={k}: {r}" for k, r in per_k.items() if r),
            achieved=float(residual))
    if q[deg] == 0:
        raise NumericalFailure("k(N_k+1) has vanishing leading coefficient")
    f0 = b[deg] / q[deg]
    f1 = (b[deg - 1] - f0 * q[deg - 1]) / q[deg]
    return FutakiExpansion(f0, f1, residual, tuple(ks), tuple(b), tuple(q), per_k)
