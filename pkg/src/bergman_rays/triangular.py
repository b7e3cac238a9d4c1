"""Expansion of k-th powers of level-one sections in the level-k basis.

    (s_beta^(1))^k = sum_alpha a_{beta alpha} s_alpha^(k),
    a_{beta alpha} = int <(s_beta^(1))^k, s_alpha^(k)>_{h_0^k} omega_0^n / n!

For torus-invariant data only alpha = k beta survives, but every coefficient
is computed by quadrature so that the support condition
eta_alpha^(k) <= k eta_beta^(1) and the bound |a| <= V^(1/2) M^k are tested
on genuinely computed numbers.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NumericalFailure
from .toric import pairing_integrals
from .weights import traceless_weights, weights

SUPPORT_TOL = 1e-8
RECONSTRUCTION_TOL = 1e-8


@dataclass
class TriangularExpansion:
    beta: tuple
    k: int
    alphas: np.ndarray
    coefficients: np.ndarray  # complex
    support: np.ndarray  # bool mask, |a| > SUPPORT_TOL
    bound: float  # V^(1/2) M^k
    reconstruction_residual: float = 0.0
    extra: dict = field(default_factory=dict)


def expand_power(beta, k, basis_one, basis_k, support_tol=SUPPORT_TOL,
                 residual_tol=RECONSTRUCTION_TOL):
    beta = tuple(int(b) for b in beta)
    pos = basis_one.index.position[beta]
    r_beta = math.sqrt(basis_one.norms_sq[pos])
    kb = tuple(k * b for b in beta)
    alphas = basis_k.index.points
    r_alpha = np.sqrt(basis_k.norms_sq)
    pair = pairing_integrals([(kb, a) for a in alphas], k, basis_k.metric)
    coeffs = pair / (r_beta ** k * r_alpha)
    support = np.abs(coeffs) > support_tol

    # || s_beta^k - sum a_alpha s_alpha ||^2 by quadrature of the full pairing
    # matrix on {k beta} union support; the other coefficients are below tol.
    keep = [kb] + [tuple(int(c) for c in alphas[i]) for i in np.flatnonzero(support)
                   if tuple(int(c) for c in alphas[i]) != kb]
    coef = np.zeros(len(keep), dtype=complex)
    coef[0] = r_beta ** (-k)
    for j, a in enumerate(keep):
        i = basis_k.index.position[a]
        coef[j] -= coeffs[i] / r_alpha[i]
    pairs = [(a, b) for a in keep for b in keep]
    gram = pairing_integrals(pairs, k, basis_k.metric).reshape(len(keep), len(keep))
    residual = float(np.real(coef @ gram @ np.conj(coef)))
    scale = float(np.real(gram[0, 0])) * r_beta ** (-2 * k)
    if abs(residual) > residual_tol * max(1.0, scale):
        raise NumericalFailure(f"reconstruction residual {residual:.3e} for beta={beta}, k={k}",
                               achieved=abs(residual))
    bound = math.sqrt(basis_one.volume) * basis_one.sup_norm ** k
    return TriangularExpansion(beta, k, alphas, coeffs, support, bound, abs(residual))


def verify_support(exp, ws, support_tol=SUPPORT_TOL):
    """eta_alpha^(k) <= k eta_beta^(1) on every coefficient above tolerance.

    Returns ``(ok, violations, diagnostics)``.  The traceless form
    lambda_alpha^(k) <= k lambda_beta^(1) is reported but not asserted.
    """
    k = exp.k
    eta_k = weights(ws, k)
    eta_1 = ws.eta(exp.beta, 1)
    lam_k = traceless_weights(ws, k)
    lam_1 = traceless_weights(ws, 1)
    from .toric import lattice_points
    lam_beta = lam_1[lattice_points(ws.polytope, 1).position[exp.beta]]
    violations, lam_fail = [], []
    for i in np.flatnonzero(np.abs(exp.coefficients) > support_tol):
        alpha = tuple(int(c) for c in exp.alphas[i])
        if eta_k[i] > k * eta_1:
            violations.append({"alpha": alpha, "eta_alpha": int(eta_k[i]),
                               "k_eta_beta": k * eta_1, "abs_a": float(abs(exp.coefficients[i]))})
        if lam_k[i] > k * lam_beta:
            lam_fail.append({"alpha": alpha, "lambda_alpha": str(lam_k[i]),
                             "k_lambda_beta": str(k * lam_beta)})
    return not violations, violations, {"traceless_form_failures": lam_fail}


def verify_bound(exp, basis_one=None):
    """max |a_{beta alpha}| <= V^(1/2) M^k; returns ``(ok, margin)``."""
    bound = exp.bound if basis_one is None else \
        math.sqrt(basis_one.volume) * basis_one.sup_norm ** exp.k
    margin = bound - float(np.max(np.abs(exp.coefficients)))
    return margin >= 0, margin


def expansion_rows(exp, ws):
    eta_k = weights(ws, exp.k)
    k_eta_beta = exp.k * ws.eta(exp.beta, 1)
    for i, alpha in enumerate(exp.alphas):
        yield ["|".join(map(str, exp.beta)), exp.k, "|".join(str(int(c)) for c in alpha),
               float(abs(exp.coefficients[i])), int(eta_k[i]), k_eta_beta, float(exp.bound)]
