import math
import warnings

import numpy as np
import pytest

from bergman_rays.errors import InvariantViolation
from bergman_rays.toric import Polytope, ToricMetric, build_basis
from bergman_rays.triangular import expand_power, expansion_rows, verify_bound, verify_support
from bergman_rays.weights import WeightSystem

from conftest import DATA


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16])
@pytest.mark.parametrize("beta", [(0,), (1,)])
def test_segment_closed_form(bases, linear, beta, k):
    exp = expand_power(beta, k, bases[1], bases[k])
    a = np.abs(exp.coefficients)
    assert exp.support.sum() == 1
    assert exp.alphas[np.argmax(a)][0] == k * beta[0]
    assert abs(a.max() - 2 ** (k / 2) / math.sqrt(k + 1)) < 1e-8
    assert exp.reconstruction_residual < 1e-10
    ok, violations, diag = verify_support(exp, linear)
    assert ok and not violations and not diag["traceless_form_failures"]
    ok, margin = verify_bound(exp, bases[1])
    assert ok and abs(margin - (math.sqrt(2) ** k - a.max())) < 1e-8


def test_floor_rounded_kinked_weights_violate_support(bases, segment):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ws = WeightSystem(segment, pieces=[((0,), 0), ((-1,), "1/2")], combinator="max",
                          rounding="floor")
    exp = expand_power((0,), 2, bases[1], bases[2])
    ok, violations, _ = verify_support(exp, ws)
    assert not ok
    assert violations[0]["alpha"] == (0,) and violations[0]["eta_alpha"] == 1


def test_ceil_rounded_kinked_weights_satisfy_support(bases, kinked):
    for k in (1, 2, 4, 8, 16):
        for beta in ((0,), (1,)):
            assert verify_support(expand_power(beta, k, bases[1], bases[k]), kinked)[0]


def test_corrupted_table_violates_support(bases, segment, linear):
    ws = WeightSystem.from_csv(segment, DATA / "corrupted_weights.csv", base=linear)
    exp = expand_power((1,), 16, bases[1], bases[16])
    ok, violations, _ = verify_support(exp, ws)
    assert not ok and violations[0]["k_eta_beta"] == 0


def test_simplex_expansion():
    tri = Polytope.simplex(2)
    metric = ToricMetric(tri)
    b1, b2 = build_basis(tri, 1, metric), build_basis(tri, 2, metric)
    ws = WeightSystem(tri, pieces=[((-1, 0), 1)])
    for beta in ((0, 0), (1, 0), (0, 1)):
        exp = expand_power(beta, 2, b1, b2)
        assert exp.support.sum() == 1
        # r_{2 beta}^2 / r_beta^4 with r^2 = alpha! (k - |alpha|)! / (k + 2)!
        r2b = math.prod(math.factorial(2 * c) for c in beta) * math.factorial(2 - 2 * sum(beta)) / 24
        assert abs(np.abs(exp.coefficients).max() - math.sqrt(r2b) * 6) < 1e-9
        assert verify_support(exp, ws)[0] and verify_bound(exp, b1)[0]


def test_rows(bases, linear):
    exp = expand_power((1,), 4, bases[1], bases[4])
    rows = list(expansion_rows(exp, linear))
    assert len(rows) == 5
    assert rows[4][:3] == ["1", 4, "4"] and rows[4][4] == 0 and rows[4][5] == 0
