"""Toric varieties in log coordinates.

A polarized toric manifold (X, L) is encoded by its Delzant polytope P.  Sections
of L^k are the monomials z^alpha with alpha in kP, and a torus-invariant metric
h_0 is a convex potential f_0 of x = log|z|^2, so that

    |z^alpha|^2_{h_0^k} = exp(<alpha, x> - k f_0(x)).

The volume form omega_0^n is c * det D^2 f_0(x) dx after integrating out the
angles; the constant c is calibrated so that omega_0^n has total mass V.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import optimize, spatial
from scipy.special import logsumexp

from .errors import ConfigError, InvariantViolation, NumericalFailure
from .quadrature import integrate_box

logger = logging.getLogger(__name__)

TAIL_LOG = math.log(1e-14)
GRAM_TOL = 1e-10


def _frac(value):
    return value if isinstance(value, Fraction) else Fraction(str(value))


@dataclass(frozen=True)
class Polytope:
    dimension: int
    vertices: tuple
    label: str = ""

    def __post_init__(self):
        verts = tuple(tuple(_frac(c) for c in v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if self.dimension < 1:
            raise ConfigError("polytope dimension must be >= 1")
        if not verts:
            raise ConfigError("empty polytope: no vertices given")
        if any(len(v) != self.dimension for v in verts):
            raise ConfigError("vertex length does not match polytope dimension")
        arr = np.array(verts, dtype=float)
        spread = arr - arr[0]
        if np.linalg.matrix_rank(spread, tol=1e-12) < self.dimension:
            raise ConfigError(f"polytope {self.label!r} is not full-dimensional")

    @classmethod
    def segment(cls, a=0, b=1, label=None):
        return cls(1, ((a,), (b,)), label or f"[{a},{b}]")

    @classmethod
    def simplex(cls, n, label=None):
        verts = [tuple([0] * n)]
        for i in range(n):
            e = [0] * n
            e[i] = 1
            verts.append(tuple(e))
        return cls(n, tuple(verts), label or f"simplex{n}")

    @cached_property
    def vertex_array(self):
        return np.array(self.vertices, dtype=float)

    @cached_property
    def facets(self):
        """Exact inequalities ``(normal, offset)`` with ``<normal, y> <= offset`` on P."""
        if self.dimension == 1:
            lo = min(v[0] for v in self.vertices)
            hi = max(v[0] for v in self.vertices)
            return ((( Fraction(-1),), -lo), ((Fraction(1),), hi))
        hull = spatial.ConvexHull(self.vertex_array)
        out = set()
        for simplex in hull.simplices:
            pts = [self.vertices[i] for i in simplex]
            normal = _rational_normal(pts)
            offset = sum(a * b for a, b in zip(normal, pts[0]))
            # orient outward: every vertex must satisfy <normal, v> <= offset
            if any(sum(a * b for a, b in zip(normal, v)) > offset for v in self.vertices):
                normal = tuple(-a for a in normal)
                offset = -offset
            out.add((normal, offset))
        return tuple(sorted(out))

    def contains(self, point, scale=1):
        return all(sum(a * _frac(b) for a, b in zip(normal, point)) <= offset * scale
                   for normal, offset in self.facets)

    @cached_property
    def volume(self):
        """Exact Euclidean volume of P."""
        if self.dimension == 1:
            vals = [v[0] for v in self.vertices]
            return max(vals) - min(vals)
        tri = spatial.Delaunay(self.vertex_array)
        total = Fraction(0)
        for simplex in tri.simplices:
            base = self.vertices[simplex[0]]
            rows = [[self.vertices[i][j] - base[j] for j in range(self.dimension)]
                    for i in simplex[1:]]
            total += abs(_det(rows))
        return total / math.factorial(self.dimension)

    def support(self, x):
        """Support function max_{v in P} <v, x>, the recession function of toric potentials."""
        return np.max(np.asarray(x, dtype=float) @ self.vertex_array.T, axis=-1)

    def is_standard_simplex(self):
        return set(self.vertices) == set(Polytope.simplex(self.dimension).vertices)


def _det(rows):
    m = [list(r) for r in rows]
    n = len(m)
    det = Fraction(1)
    for i in range(n):
        piv = next((r for r in range(i, n) if m[r][i] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != i:
            m[i], m[piv] = m[piv], m[i]
            det = -det
        det *= m[i][i]
        for r in range(i + 1, n):
            f = m[r][i] / m[i][i]
            for c in range(i, n):
                m[r][c] -= f * m[i][c]
    return det


def _rational_normal(points):
    """Normal vector of the hyperplane through n points in Q^n (exact)."""
    n = len(points[0])
    rows = [[p[j] - points[0][j] for j in range(n)] for p in points[1:]]
    # cofactor expansion: normal_j = (-1)^j det(rows with column j removed)
    normal = []
    for j in range(n):
        minor = [[r[c] for c in range(n) if c != j] for r in rows]
        normal.append((-1) ** j * (_det(minor) if minor else Fraction(1)))
    g = 0
    for a in normal:
        g = math.gcd(g, a.numerator)
    lcm = 1
    for a in normal:
        lcm = lcm * a.denominator // math.gcd(lcm, a.denominator)
    scale = Fraction(lcm, g or 1)
    return tuple(a * scale for a in normal)


@dataclass(frozen=True)
class LatticeIndex:
    k: int
    points: np.ndarray  # (N_k + 1, n) integer array, lexicographic

    @property
    def size(self):
        return len(self.points)

    @cached_property
    def position(self):
        return {tuple(int(c) for c in p): i for i, p in enumerate(self.points)}

    def __iter__(self):
        return (tuple(int(c) for c in p) for p in self.points)


def lattice_points(polytope, k):
    """All integer points of kP in lexicographic order."""
    if k < 1:
        raise ConfigError(f"level k must be >= 1, got {k}")
    arr = polytope.vertex_array * k
    lo = np.floor(arr.min(axis=0) + 1e-9).astype(int)
    hi = np.ceil(arr.max(axis=0) - 1e-9).astype(int)
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    pts = [p for p in itertools.product(*ranges) if polytope.contains(p, scale=k)]
    if not pts:
        raise ConfigError(f"{k}P contains no lattice points")
    return LatticeIndex(k, np.array(sorted(pts), dtype=np.int64).reshape(-1, polytope.dimension))


@dataclass(frozen=True)
class ToricMetric:
    """Torus-invariant metric with potential f_0 = log sum_v e^{<v,x>} + bump.

    For the standard simplex this is the Fubini-Study potential
    log(1 + sum_i e^{x_i}).  ``bump_amplitude`` adds a Gaussian
    perturbation (must stay small enough to keep f_0 convex).
    ``angular_amplitude`` multiplies h_0 by exp(-eps * cos(theta_1) * bump),
    which breaks torus invariance; it only exists to exercise the Gram check.
    """

    polytope: Polytope
    volume: float = None
    bump_amplitude: float = 0.0
    bump_center: tuple = None
    bump_width: float = 1.0
    angular_amplitude: float = 0.0
    name: str = "fubini_study"

    def __post_init__(self):
        if self.volume is None:
            default = float(math.factorial(self.polytope.dimension) * self.polytope.volume)
            object.__setattr__(self, "volume", default)
        if self.volume <= 0:
            raise ConfigError("configured volume V must be positive")
        if self.bump_center is None:
            object.__setattr__(self, "bump_center", (0.0,) * self.polytope.dimension)
        if self.bump_width <= 0:
            raise ConfigError("bump width must be positive")

    @property
    def n(self):
        return self.polytope.dimension

    @property
    def invariant(self):
        return self.angular_amplitude == 0.0

    def _bump(self, x):
        c = np.asarray(self.bump_center, dtype=float)
        d = x - c
        return np.exp(-0.5 * np.sum(d * d, axis=-1) / self.bump_width ** 2), d

    def potential(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        f = logsumexp(x @ self.polytope.vertex_array.T, axis=-1)
        if self.bump_amplitude:
            f = f + self.bump_amplitude * self._bump(x)[0]
        return f

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        verts = self.polytope.vertex_array
        z = x @ verts.T
        p = np.exp(z - logsumexp(z, axis=-1, keepdims=True))
        g = p @ verts
        if self.bump_amplitude:
            b, d = self._bump(x)
            g = g - self.bump_amplitude * (b / self.bump_width ** 2)[:, None] * d
        return g

    def hessian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        verts = self.polytope.vertex_array
        z = x @ verts.T
        logp = z - logsumexp(z, axis=-1, keepdims=True)
        n = self.n
        h = np.zeros((len(x), n, n))
        # pairwise form of the softmax covariance; no cancellation in the tails
        for u, v in itertools.combinations(range(len(verts)), 2):
            d = verts[u] - verts[v]
            h += np.exp(logp[:, u] + logp[:, v])[:, None, None] * np.outer(d, d)
        if self.bump_amplitude:
            b, d = self._bump(x)
            s2 = self.bump_width ** 2
            h += self.bump_amplitude * b[:, None, None] * (
                d[:, :, None] * d[:, None, :] / s2 ** 2 - np.eye(n) / s2)
        return h

    def log_det_hessian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not self.bump_amplitude and self.polytope.is_standard_simplex():
            padded = np.column_stack([np.zeros(len(x)), x])
            return x.sum(axis=1) - (self.n + 1) * logsumexp(padded, axis=1)
        sign, logdet = np.linalg.slogdet(self.hessian(x))
        return np.where(sign > 0, logdet, -np.inf)

    def angular_log_factor(self, x, theta1, k):
        """log of the theta-dependent part of h_0^k at (x, theta_1)."""
        if self.invariant:
            return np.zeros((len(x), len(theta1)))
        b = self._bump(x)[0]
        return -k * self.angular_amplitude * b[:, None] * np.cos(theta1)[None, :]

    def min_hessian_eigenvalue(self, x):
        return float(np.linalg.eigvalsh(self.hessian(x)).min())

    @cached_property
    def calibration(self):
        """Constant c with c * int det D^2 f_0 dx = V (density of omega_0^n)."""
        box = _integration_box(self, np.zeros((1, self.n)), 0)
        val, _ = integrate_box(lambda x: np.exp(self.log_det_hessian(x))[:, None],
                               np.full(self.n, -box), np.full(self.n, box), rtol=1e-12)
        return self.volume / float(val[0])


def _integration_box(metric, exponents, k):
    """Half-width L so that every integrand exp(<a,x> - k f0 + logdet) on the
    faces of [-L, L]^n is below 1e-14 of its own peak."""
    n = metric.n
    exponents = np.atleast_2d(exponents)

    def log_int(x):
        return x @ exponents.T - k * metric.potential(x)[:, None] + metric.log_det_hessian(x)[:, None]

    half = 8.0
    for _ in range(12):
        ticks = np.linspace(-half, half, 161)
        grid = np.array(list(itertools.product(ticks, repeat=n))) if n <= 2 else \
            np.random.default_rng(0).uniform(-half, half, (20000, n))
        peak = log_int(grid).max(axis=0)
        face_pts = []
        for axis in range(n):
            for sign in (-1.0, 1.0):
                pts = grid[np.isclose(grid[:, axis], ticks[0])].copy() if n > 1 else np.zeros((1, 1))
                pts[:, axis] = sign * half
                face_pts.append(pts)
        face = log_int(np.vstack(face_pts)).max(axis=0)
        if np.all(face - peak < TAIL_LOG):
            return half
        half *= 1.5
    raise NumericalFailure("could not find a truncation box with negligible tails",
                           achieved=float(np.max(face - peak)))


def pairing_integrals(pairs, k, metric, rtol=1e-12):
    """L^2(h_0^k, omega_0^n / n!) inner products of monomials z^a, z^b.

    Returns an array of complex numbers, one per pair.  The angular integral is
    done with the trapezoid rule in theta, exact for the trigonometric modes
    that occur; the x-integral uses adaptive Gauss-Legendre.
    """
    pairs = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) for a, b in pairs]
    n = metric.n
    half_sum = np.array([(a + b) / 2 for a, b in pairs])
    diff = np.array([a - b for a, b in pairs])
    m_theta = int(np.abs(diff).max()) + 3 if len(diff) else 3
    if not metric.invariant:
        m_theta = max(m_theta, 64)
    theta = 2 * np.pi * np.arange(m_theta) / m_theta
    # Angular factors: modes in theta_2..theta_n are metric-independent.
    grid = np.array(list(itertools.product(theta, repeat=n)))
    phase = np.exp(1j * grid @ diff.T)  # (m_theta^n, pairs)

    box = _integration_box(metric, half_sum, k)
    # shift each integrand by (roughly) its peak exponent to stay in range
    ticks = np.linspace(-box, box, {1: 4001, 2: 301}.get(n, 41))
    probe = np.array(list(itertools.product(ticks, repeat=n)))
    shifts = (probe @ half_sum.T - k * metric.potential(probe)[:, None]
              + metric.log_det_hessian(probe)[:, None]).max(axis=0)
    dens = metric.calibration / math.factorial(n)
    lower, upper = -box * np.ones(n), box * np.ones(n)

    def radial(x):
        return np.exp(x @ half_sum.T - k * metric.potential(x)[:, None]
                      + metric.log_det_hessian(x)[:, None] - shifts[None, :])

    if metric.invariant:
        # the angular average is a per-pair constant (1 or 0 up to rounding)
        val, _ = integrate_box(radial, lower, upper, rtol=rtol)
        return val * phase.mean(axis=0) * np.exp(shifts) * dens

    def integrand(x):
        weight = np.exp(metric.angular_log_factor(x, grid[:, 0], k))  # (m, grid)
        val = radial(x) * (weight @ phase / len(grid))
        return np.hstack([val.real, val.imag])

    p = len(pairs)
    val, _ = adaptive_or_box(integrand, lower, upper, rtol)
    return (val[:p] + 1j * val[p:]) * np.exp(shifts) * dens


def adaptive_or_box(integrand, lower, upper, rtol):
    return integrate_box(integrand, lower, upper, rtol=rtol, atol=1e-16)


def section_norm(alpha, k, metric, polytope=None):
    """Squared L^2 norm r_alpha^2 of the monomial z^alpha at level k."""
    polytope = polytope or metric.polytope
    if not polytope.contains(alpha, scale=k):
        raise ConfigError(f"alpha={tuple(alpha)} is not in {k}P")
    return float(pairing_integrals([(alpha, alpha)], k, metric)[0].real)


def section_norms(index, metric, rtol=1e-12):
    vals = pairing_integrals([(a, a) for a in index.points], index.k, metric, rtol=rtol)
    norms = vals.real
    if np.any(norms <= 0):
        raise NumericalFailure("non-positive section norm from quadrature")
    return norms


@dataclass
class OrthonormalBasis:
    """Orthonormal monomial basis s_alpha = z^alpha / r_alpha at level k."""

    k: int
    index: LatticeIndex
    norms_sq: np.ndarray
    gram_residual: float
    sup_norm: float  # M
    volume: float  # V
    metric: ToricMetric = field(repr=False)

    @property
    def log_norms_sq(self):
        return np.log(self.norms_sq)

    def log_density_terms(self, x):
        """log |s_alpha(x)|^2_{h_0^k} for every alpha, shape (len(x), N_k + 1)."""
        x = np.atleast_2d(x)
        return (x @ self.index.points.T.astype(float)
                - self.k * self.metric.potential(x)[:, None] - self.log_norms_sq[None, :])

    def bergman_density(self, x):
        """sum_alpha |s_alpha|^2_{h_0^k}."""
        return np.exp(logsumexp(self.log_density_terms(x), axis=1))


def _gram_pairs(index, limit=40):
    pts = [tuple(p) for p in index.points]
    pairs = list(itertools.combinations(range(len(pts)), 2))
    if len(pairs) > limit:
        rng = np.random.default_rng(20091)
        pick = sorted(rng.choice(len(pairs), size=limit, replace=False))
        pairs = [pairs[i] for i in pick]
    return pairs


def sup_norm_level_one(polytope, metric, norms_sq=None):
    """M = sup_beta sup_x |s_beta^{(1)}|_{h_0}.

    The supremum of <beta,x> - f_0(x) is often approached only at infinity,
    so the search box is wide; the grid maximum is polished by L-BFGS-B.
    """
    index = lattice_points(polytope, 1)
    if norms_sq is None:
        norms_sq = section_norms(index, metric)
    n = metric.n
    lim = 60.0
    ticks = np.linspace(-lim, lim, 241 if n == 1 else 61)
    grid = np.array(list(itertools.product(ticks, repeat=n)))
    best = -np.inf
    for beta, r2 in zip(index.points.astype(float), norms_sq):
        obj = lambda x, beta=beta: -(float(x @ beta) - float(metric.potential(x[None, :])[0]))
        vals = grid @ beta - metric.potential(grid)
        x0 = grid[int(np.argmax(vals))]
        res = optimize.minimize(obj, x0, method="L-BFGS-B", bounds=[(-lim, lim)] * n)
        value = max(float(vals.max()), -float(res.fun)) - math.log(r2)
        best = max(best, value)
    return math.exp(0.5 * best)


def build_basis(polytope, k, metric, check_gram=True, gram_tol=GRAM_TOL, rtol=1e-12):
    index = lattice_points(polytope, k)
    norms_sq = section_norms(index, metric, rtol)
    residual = 0.0
    if check_gram and index.size > 1:
        pairs = _gram_pairs(index)
        vals = pairing_integrals([(index.points[i], index.points[j]) for i, j in pairs],
                                 k, metric, rtol=rtol)
        scale = np.array([math.sqrt(norms_sq[i] * norms_sq[j]) for i, j in pairs])
        residual = float(np.max(np.abs(vals) / scale))
        if residual > gram_tol:
            raise InvariantViolation(
                f"Gram residual {residual:.3e} exceeds {gram_tol:.1e}; metric is not torus-invariant",
                record={"k": k, "gram_residual": residual,
                        "pairs": [[index.points[i].tolist(), index.points[j].tolist()] for i, j in pairs]})
    level_one = norms_sq if k == 1 else None
    m_sup = sup_norm_level_one(polytope, metric, level_one)
    return OrthonormalBasis(k, index, norms_sq, residual, m_sup, metric.volume, metric)
