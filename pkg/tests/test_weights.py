import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_rays.errors import ConfigError, NumericalFailure
from bergman_rays.toric import Polytope, lattice_points
from bergman_rays.weights import (WeightSystem, futaki, trace, trace_ratio, traceless_weights,
                                  weights)


def test_trivial_weights_vanish(trivial):
    for k in (1, 5, 32):
        assert not weights(trivial, k).any()
    assert trivial.is_trivial


def test_linear_weights_example(linear):
    assert weights(linear, 2).tolist() == [2, 1, 0]
    assert traceless_weights(linear, 2) == [1, 0, -1]
    assert trace_ratio(linear, 4) == Fraction(1, 2)


def test_kinked_generator_warns_and_rounds_up(segment):
    with pytest.warns(UserWarning, match="convex"):
        ws = WeightSystem(segment, pieces=[((0,), 0), ((-1,), "1/2")], combinator="max")
    assert weights(ws, 1).tolist() == [1, 0]
    assert weights(ws, 4).tolist() == [2, 1, 0, 0, 0]
    assert weights(ws, 3).tolist() == [2, 1, 0, 0]


def test_floor_rounding_breaks_product_compatibility(segment):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ws = WeightSystem(segment, pieces=[((0,), 0), ((-1,), "1/2")], combinator="max",
                          rounding="floor")
    # g(0) = 1/2: floor gives eta_0^(2) = 1 > 2 * eta_0^(1) = 0
    assert ws.eta((0,), 2) == 1 and ws.eta((0,), 1) == 0


def test_bad_combinator_and_rounding(segment):
    with pytest.raises(ConfigError):
        WeightSystem(segment, pieces=[((1,), 0)], combinator="sum")
    with pytest.raises(ConfigError):
        WeightSystem(segment, pieces=[((1,), 0)], rounding="nearest")
    with pytest.raises(ConfigError):
        WeightSystem(segment, pieces=[((1, 2), 0)])


affine = st.tuples(st.integers(-3, 3), st.fractions(min_value=-3, max_value=3, max_denominator=4))


@given(st.lists(affine, min_size=1, max_size=3), st.sampled_from(["min", "max"]),
       st.sampled_from(["ceil", "floor"]), st.integers(1, 24))
@settings(max_examples=60, deadline=None)
def test_traceless_weights_sum_to_zero_exactly(pieces, comb, rounding, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ws = WeightSystem(Polytope.segment(), pieces=[((a,), c) for a, c in pieces],
                          combinator=comb, rounding=rounding)
    lam = traceless_weights(ws, k)
    assert sum(lam) == 0
    eta = weights(ws, k)
    assert eta.dtype.kind == "i"
    # weight growth: |eta| <= (max_P |g| + 1) k
    assert np.abs(eta).max() <= (ws.generator_max_abs() + 1) * k


@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=3),
       st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_product_compatibility_for_integral_generators(pieces, k):
    # integral affine data: eta_{k beta}^(k) = k eta_beta^(1) at every vertex
    ws = WeightSystem(Polytope.segment(), pieces=[((a,), c) for a, c in pieces])
    for beta in ((0,), (1,)):
        assert ws.eta(tuple(k * b for b in beta), k) == k * ws.eta(beta, 1)


def test_two_dimensional_weights():
    tri = Polytope.simplex(2)
    ws = WeightSystem(tri, pieces=[((-1, 0), 1)])
    idx = lattice_points(tri, 2)
    eta = weights(ws, 2, idx)
    assert eta.tolist() == [2 - a for a, _ in idx.points]
    assert sum(traceless_weights(ws, 2, idx)) == 0


def test_futaki_linear(linear, segment):
    fx = futaki(linear, segment, [1, 2, 3, 4])
    assert (fx.F0, fx.F1, fx.residual) == (Fraction(1, 2), 0, 0)
    # Tr B_k = k(k+1)/2 and k(N_k + 1) = k(k+1)
    assert fx.trace_coefficients == (0, Fraction(1, 2), Fraction(1, 2))
    assert fx.count_coefficients == (0, 1, 1)


def test_futaki_trivial(trivial, segment):
    fx = futaki(trivial, segment, [2, 4, 6, 8])
    assert (fx.F0, fx.F1, fx.residual) == (0, 0, 0)


def test_futaki_kinked_even_levels(kinked, segment):
    # on even k: Tr B_k = sum_{j <= k/2} j = k(k+2)/8, so F0 = F1 = 1/8
    for k in (2, 4, 6, 8, 10):
        assert trace(kinked, k) == k * (k + 2) // 8
    fx = futaki(kinked, segment, [2, 4, 6, 8])
    assert (fx.F0, fx.F1, fx.residual) == (Fraction(1, 8), Fraction(1, 8), 0)


def test_futaki_simplex():
    # CP^2, g = 1 - y_1: the mean of k - a over kP is 2k/3, so the ratio is exactly 2/3
    tri = Polytope.simplex(2)
    ws = WeightSystem(tri, pieces=[((-1, 0), 1)])
    fx = futaki(ws, tri, [1, 2, 3, 4, 5])
    assert fx.residual == 0
    assert fx.F0 == Fraction(2, 3) and fx.F1 == 0


def test_futaki_reports_nonpolynomial_data(kinked, segment):
    with pytest.raises(NumericalFailure, match="k="):
        futaki(kinked, segment, [1, 2, 3, 4, 5])


def test_futaki_needs_enough_samples(linear, segment):
    with pytest.raises(ConfigError):
        futaki(linear, segment, [2, 4])


def test_weight_table_roundtrip(tmp_path, segment, linear):
    path = tmp_path / "w.csv"
    path.write_text("k,alpha,eta\n2,0,5\n2,1,1\n2,2,0\n")
    ws = WeightSystem.from_csv(segment, path, base=linear)
    assert weights(ws, 2).tolist() == [5, 1, 0]
    assert weights(ws, 3).tolist() == [3, 2, 1, 0]
    bad = tmp_path / "bad.csv"
    bad.write_text("2,0\n")
    with pytest.raises(ConfigError):
        WeightSystem.from_csv(segment, bad)
    partial = tmp_path / "partial.csv"
    partial.write_text("2,0,1\n")
    with pytest.raises(ConfigError):
        weights(WeightSystem.from_csv(segment, partial), 2)
