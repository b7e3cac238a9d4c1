import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_rays.errors import ConfigError, InvariantViolation
from bergman_rays.grid import GridFunction, make_grid
from bergman_rays.pipeline import closed_form_ray
from bergman_rays.ray import build_ray_bundle
from bergman_rays.regularity import gradient, holder_estimate, moment_measure
from bergman_rays.weights import futaki


def sample(f, cells):
    return GridFunction.from_callable(f, *make_grid(cells=cells))


def test_gradient_of_constant_and_bilinear():
    g = gradient(sample(lambda X, T: 3.0 + 0 * X, 16))
    assert not g.any()
    F = sample(lambda X, T: X * T, 16)
    X, T = F.mesh()
    g = gradient(F)
    np.testing.assert_allclose(g[0], T, atol=1e-13)
    np.testing.assert_allclose(g[1], X, atol=1e-13)


def test_gradient_second_order_on_closed_form_ray():
    want = 2 * math.exp(-2) / (math.exp(-2) + 1)
    assert abs(want - 0.23840) < 1e-5
    errs = []
    for cells in (64, 128, 256):
        F = sample(closed_form_ray, cells)
        i = int(np.argmin(np.abs(F.x_axes[0])))
        j = int(np.argmin(np.abs(F.t + 1)))
        errs.append(abs(gradient(F)[1][i, j] - want))
    assert 3.6 < errs[0] / errs[1] < 4.4 and 3.6 < errs[1] / errs[2] < 4.4


def test_gradient_error_field_is_second_order():
    errs = []
    for cells in (64, 128, 256):
        F = sample(closed_form_ray, cells)
        X, T = F.mesh()
        exact_t = 2 * np.exp(2 * T) / (np.exp(2 * T) + np.exp(X))
        errs.append(np.abs(gradient(F)[1] - exact_t)[2:-2, 2:-2].max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_holder_quadratic_bounded():
    rep = holder_estimate([sample(lambda X, T: (X ** 2 + T ** 2) / 2, c) for c in (128, 256)],
                          alphas=(0.25, 0.5, 0.9, 0.99))
    assert set(rep.verdict.values()) == {"bounded"}


def test_holder_three_halves_power():
    f = lambda X, T: np.abs(X) ** 1.5
    rep = holder_estimate([sample(f, c) for c in (128, 256)], alphas=(0.5, 0.9))
    assert rep.verdict == {0.5: "bounded", 0.9: "diverging"}
    # Q(0.9, s) ~ s^{-0.4}: one more dyadic separation multiplies it by 2^{0.4}
    assert abs(rep.trend[0.9] - 2 ** 0.4) < 0.05


def test_holder_closed_form_ray_bounded_up_to_one():
    rep = holder_estimate([sample(closed_form_ray, c) for c in (128, 256)],
                          alphas=(0.5, 0.9, 0.99, 1.0))
    assert set(rep.verdict.values()) == {"bounded"}
    assert rep.to_json()["verdict"]["1.0"] == "bounded"


def test_holder_flat_function_is_bounded():
    rep = holder_estimate([sample(lambda X, T: 0.01 + 0 * X, c) for c in (64, 128)])
    assert set(rep.verdict.values()) == {"bounded"}


def test_holder_needs_two_resolutions():
    with pytest.raises(ConfigError):
        holder_estimate([sample(closed_form_ray, 32)])


@given(st.floats(0.05, 0.9), st.floats(0.05, 0.9))
@settings(max_examples=20, deadline=None)
def test_quotients_nondecreasing_in_alpha_at_small_s(a1, a2):
    lo, hi = sorted((a1, a2))
    rep = holder_estimate([sample(lambda X, T: np.abs(X) ** 1.5 + T ** 2, c) for c in (32, 64)],
                          alphas=(lo, hi))
    for q in rep.quotients:
        for s in q[lo]:
            if s < 1:
                assert q[hi][s] >= q[lo][s] * (1 - 1e-12)


def test_finite_envelope_crease_is_detected(bases, kinked):
    # with k_cut = 4 the envelope switches between Phi_4 and Phi_32 along a curve;
    # the gradient jump there is a truncation artifact of the finite sup
    envs = []
    for cells in (128, 256):
        b = build_ray_bundle(bases, kinked, *make_grid(cells=cells), [1, 4, 8, 16, 32], k_cut=4)
        envs.append(b.envelope)
    rep = holder_estimate(envs)
    assert rep.verdict[0.5] == "bounded"
    assert rep.verdict[0.99] == "diverging"
    assert rep.second_difference_max[1] > 1.5 * rep.second_difference_max[0]


@pytest.fixture(scope="module")
def closed_form_256():
    return sample(closed_form_ray, 256)


def test_moments_of_closed_form_ray(closed_form_256, fs):
    table = moment_measure(closed_form_256, fs)
    for t in (-0.5, -1.0, -2.0):
        assert abs(table.moments[t][1] - 1.0) < 1e-3
        assert abs(table.moments[t][2] - 4.0 / 3.0) < 1e-3
        assert abs(table.moments[t][3] - 2.0) < 1e-3
    assert max(table.variation.values()) < 1e-3
    assert table.mass_error < 5e-3


def test_first_moment_is_twice_futaki(closed_form_256, fs, linear, segment):
    fx = futaki(linear, segment, [1, 2, 3])
    table = moment_measure(closed_form_256, fs, t_samples=(-1.0,), orders=(1,))
    assert abs(table.moments[-1.0][1] - 2 * float(fx.F0)) < 1e-3


def test_trivial_measure_is_dirac(fs):
    phi = sample(lambda X, T: 0.1 + 0 * X, 128)
    table = moment_measure(phi, fs)
    for t in table.t_samples:
        assert abs(table.moments[t][0] - 1.0) < 5e-3
        assert all(table.moments[t][m] == 0.0 for m in (1, 2, 3))
    assert table.variation["m1"] == 0.0


def test_negative_density_is_a_violation(fs):
    phi = sample(lambda X, T: -1.5 * np.logaddexp(0, X) * (1 + 0 * T), 64)
    with pytest.raises(InvariantViolation):
        moment_measure(phi, fs)


def test_samples_must_be_interior_nodes(fs):
    phi = sample(closed_form_ray, 64)
    with pytest.raises(ConfigError):
        moment_measure(phi, fs, t_samples=(-0.3,))
    with pytest.raises(ConfigError):
        moment_measure(phi, fs, t_samples=(0.0,))


def test_moment_table_rows(closed_form_256, fs):
    table = moment_measure(closed_form_256, fs)
    rows = list(table.rows())
    assert len(rows) == 3 and len(rows[0]) == len(table.header())
