import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_rays.errors import ConfigError, InvariantViolation
from bergman_rays.grid import GridFunction, make_grid
from bergman_rays.pipeline import closed_form_ray, closed_form_shift
from bergman_rays.ray import (boundary_decay, build_ray_bundle, convex_potential, decay_slope,
                              envelope, ladder, psi_lower_bound, phi_k, phi_sharp,
                              phi_sharp_identity, psh_margin, psi_k, t_derivative_check,
                              uniform_bound_check)


@pytest.fixture(scope="module")
def linear_bundle(bases, linear, grid256):
    return build_ray_bundle(bases, linear, *grid256, [1, 2, 4, 8, 16, 32], k_cut=4)


@pytest.fixture(scope="module")
def trivial_bundle(bases, trivial, grid64):
    return build_ray_bundle(bases, trivial, *grid64, [1, 2, 4, 8, 10, 16, 32], k_cut=4)


def test_trivial_phi_is_constant(trivial_bundle):
    phi = trivial_bundle.phi[10]
    np.testing.assert_allclose(phi.values, 0.1 * math.log(1.1), atol=1e-14)
    assert abs(0.1 * math.log(1.1) - 0.00953102) < 1e-8


def test_linear_phi_matches_closed_form(linear_bundle):
    X, T = linear_bundle.envelope.mesh()
    exact = closed_form_ray(X, T)
    for k in (1, 2, 4, 8, 16, 32):
        err = np.abs(linear_bundle.phi[k].values - exact - closed_form_shift(k)).max()
        assert err < 1e-9


def test_psi_closed_forms(linear_bundle, trivial_bundle):
    np.testing.assert_allclose(linear_bundle.psi[8].values,
                               math.log(9 / 8) / 8 - math.log(2), atol=1e-12)
    assert abs(math.log(9 / 8) / 8 - math.log(2) + 0.67843) < 1e-5
    assert not linear_bundle.psi[1].values.any()
    k = 16
    np.testing.assert_allclose(trivial_bundle.psi[k].values,
                               math.log(k + 1) / k - math.log(k) / k - math.log(2), atol=1e-12)


def test_psi_requires_same_grid(linear_bundle, bases, linear):
    small = phi_k(bases[1], linear, *make_grid(cells=16), 1)
    with pytest.raises(ConfigError):
        psi_k(linear_bundle.phi[2], small)


def test_phi_level_mismatch(bases, linear, grid64):
    with pytest.raises(ConfigError):
        phi_k(bases[2], linear, *grid64, 4)


def test_envelope_examples(linear_bundle, trivial_bundle):
    X, T = linear_bundle.envelope.mesh()
    err = np.abs(linear_bundle.envelope.values - closed_form_ray(X, T) - closed_form_shift(4))
    assert err.max() < 1e-9
    np.testing.assert_allclose(trivial_bundle.envelope.values, closed_form_shift(4), atol=1e-14)
    assert trivial_bundle.envelope.meta["levels"] == [4, 8, 10, 16, 32]


def test_envelope_of_monotone_shifts(grid64):
    x, t = grid64
    base = GridFunction.from_callable(lambda X, T: np.sin(X) * T, x, t)
    shifts = {k: 1.0 / k for k in (2, 4, 8, 16)}
    phis = [base.with_values(base.values + c, level=k) for k, c in shifts.items()]
    env = envelope(phis, 4)
    np.testing.assert_allclose(env.values, base.values + 0.25, atol=1e-15)
    with pytest.raises(ConfigError):
        envelope(phis, 8)


def test_envelope_filter_is_reported_and_shrinks(bases, linear):
    effects = []
    for cells in (64, 128, 256):
        b = build_ray_bundle(bases, linear, *make_grid(cells=cells), [1, 4, 8, 16], k_cut=4)
        effects.append(b.diagnostics["usc_filter_effect"])
        filtered = envelope([b.phi[k] for k in (4, 8, 16)], 4, apply_filter=True)
        assert np.all(filtered.values >= b.envelope.values)
    assert effects[0] > effects[1] > effects[2] > 0
    assert 1.8 < effects[0] / effects[1] < 2.2


@given(st.lists(st.floats(-1, 1), min_size=5, max_size=5), st.integers(1, 2))
@settings(max_examples=30, deadline=None)
def test_envelope_monotone_in_cut(coeffs, cut_index):
    x, t = make_grid(cells=8)
    X, T = np.meshgrid(x[0], t, indexing="ij")
    levels = [1, 2, 4, 8, 16]
    phis = [GridFunction(x, t, c * np.cos(k * X) + T / k, level=k)
            for k, c in zip(levels, coeffs)]
    lo = envelope(phis, levels[cut_index])
    hi = envelope(phis, levels[cut_index - 1])
    assert np.all(hi.values >= lo.values)


def test_ladder():
    assert ladder(4, 32) == [4, 8, 16, 32]
    assert ladder(3, 20) == [3, 6, 12]


def test_trace_identity(bases, linear, kinked, trivial, grid64):
    for ws in (linear, kinked, trivial):
        for k in (1, 4, 16):
            phi = phi_k(bases[k], ws, *grid64, k)
            assert phi_sharp_identity(phi, phi_sharp(bases[k], ws, *grid64, k), ws, k) < 1e-12


def test_trace_identity_detects_mismatch(bases, linear, grid64):
    phi = phi_k(bases[4], linear, *grid64, 4)
    wrong = phi.with_values(phi.values + 1e-9 * np.cos(phi.mesh()[0]))
    with pytest.raises(InvariantViolation):
        phi_sharp_identity(wrong, phi_sharp(bases[4], linear, *grid64, 4), linear, 4)


def test_boundary_decay_trivial_example(trivial_bundle):
    assert abs(boundary_decay(trivial_bundle.phi[10]) - 0.00953102) < 1e-8


def test_boundary_decay(linear_bundle):
    a = {k: boundary_decay(linear_bundle.phi[k]) for k in (4, 8, 16, 32)}
    for k, v in a.items():
        assert abs(v - math.log1p(1 / k) / k) < 1e-12
    slope = decay_slope(list(a), list(a.values()))
    assert -2.2 <= slope <= -1.8


def test_boundary_decay_needs_t_zero(bases, linear):
    x, _ = make_grid(cells=8)
    phi = phi_k(bases[1], linear, x, np.linspace(-2, -1, 9), 1)
    with pytest.raises(ConfigError):
        boundary_decay(phi)


def test_psi_lower_bound_example():
    bound = psi_lower_bound(8, 1, 1.0, math.sqrt(2), 9, 2)
    exact = -math.log(9) / 8 - math.log(2) - math.log(8) / 8 - math.log(2)
    assert abs(bound - exact) < 1e-15
    assert round(bound, 3) == -1.921
    assert bound <= math.log(9 / 8) / 8 - math.log(2)


def test_uniform_bound(linear_bundle, bases):
    rep = uniform_bound_check(linear_bundle.psi, bases, bases[1])
    assert not rep["violations"]
    assert rep["levels"][1]["min"] == 0.0
    assert math.isfinite(rep["sup_abs"])


def test_uniform_bound_violation(linear_bundle, bases):
    psis = dict(linear_bundle.psi)
    psis[4] = psis[4].with_values(psis[4].values - 5.0, level=4)
    with pytest.raises(InvariantViolation) as info:
        uniform_bound_check(psis, bases, bases[1])
    assert info.value.record["violations"][0]["k"] == 4


def test_t_derivative(linear_bundle, trivial_bundle, linear, trivial):
    for k in (1, 4, 32):
        rep = t_derivative_check(linear_bundle.phi[k], linear, k, psi=linear_bundle.psi[k])
        assert rep["bound"] == 2.0
        assert rep["sup_dt_phi"] <= 2.0
        assert rep["sup_dt_psi"] < 1e-9
        assert t_derivative_check(trivial_bundle.phi[k], trivial, k)["sup_dt_phi"] < 1e-12


def test_t_derivative_violation(linear_bundle, linear):
    phi = linear_bundle.phi[4]
    steep = phi.with_values(phi.values + 3.0 * phi.mesh()[1], level=4)
    with pytest.raises(InvariantViolation):
        t_derivative_check(steep, linear, 4)


def test_convex_potential_psh(bases, linear, kinked, grid64):
    for ws in (linear, kinked):
        for k in (1, 4, 16, 32):
            assert psh_margin(convex_potential(bases[k], ws, *grid64, k)) >= -1e-6


def test_bundle_diagnostics(linear_bundle):
    d = linear_bundle.diagnostics
    assert max(d["trace_identity_residual"].values()) < 1e-12
    assert set(d["boundary_decay"]) == {1, 2, 4, 8, 16, 32}
    # interior boundedness: |Phi_k| <= log(1 + e^{16}) + shift on the truncated grid
    assert d["interior_bound"] < 16.0 + math.log(2)
