import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpplab.quad_special import (
    AiryRangeError,
    QuadratureRule,
    ReferenceMeasure,
    airy_ai,
    airy_asymptotic,
    airy_field,
    airy_kernel,
    airy_kernel_matrix,
    airy_series,
    composite_gauss_legendre,
    discrete_sine_field,
    discrete_sine_kernel,
    gauss_legendre,
    sine_kernel,
    zero_field,
)

# Ai and Ai' from a 30-digit arbitrary-precision evaluation
AIRY_ORACLE = [
    (-10.5, -0.31192603505105060085, 0.090957487390681672879),
    (-7.3, 0.33577037051514727697, -0.18009580448329365985),
    (-2.2, 0.0961453780076688799, 0.6862448249090017474),
    (0.0, 0.35502805388781723926, -0.25881940379280679841),
    (1.5, 0.071749497008105409674, -0.097382012842301319218),
    (4.0, 0.00095156385120480187362, -0.0019586409502041789001),
    (6.0, 9.9476943602528895702e-6, -0.000024765200397034954754),
    (7.9, 6.2396400972839341797e-8, -1.7729958329430335231e-7),
    (8.1, 3.5224356235735714843e-8, -1.0130972032660844188e-7),
    (10.0, 1.1047532552898685934e-10, -3.5206336767389236366e-10),
    (12.0, 1.393184688875360839e-13, -4.854736554985308463e-13),
]

AIRY_KERNEL_ORACLE = [
    (0.5, -1.25, 0.085250029120353354165),
    (-3.0, 2.0, -0.0018249663790288177711),
    (1.0, 1.0, 0.0070238701595382203773),
    (-4.0, -4.0, 0.64484252467194333009),
]


class TestQuadrature:
    def test_gauss_legendre_exact_for_polynomials(self):
        rule = gauss_legendre(10, -1.0, 3.0)
        # degree 19 is integrated exactly
        assert rule.integrate(lambda x: x**19) == pytest.approx((3.0**20 - 1.0) / 20, rel=1e-13)

    def test_rejects_bad_intervals(self):
        with pytest.raises(ValueError):
            gauss_legendre(5, 1.0, 1.0)
        with pytest.raises(ValueError):
            gauss_legendre(5, 0.0, np.inf)

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.array([0.0, 1.0]), np.array([1.0, -1.0]), (0.0, 1.0))
        with pytest.raises(ValueError):
            QuadratureRule(np.array([1.0, 0.0]), np.array([1.0, 1.0]), (0.0, 1.0))

    def test_composite_breakpoints_are_not_nodes(self):
        rule = composite_gauss_legendre([-1.0, -0.5, 0.5, 1.0], order=7)
        assert rule.nodes.size == 21
        for p in (-0.5, 0.5):
            assert np.abs(rule.nodes - p).min() > 1e-3
        assert rule.integrate(np.exp) == pytest.approx(math.e - 1 / math.e, rel=1e-14)

    def test_composite_per_unit(self):
        rule = composite_gauss_legendre([0.0, 10.0], per_unit=20)
        assert rule.nodes.size >= 200
        assert rule.weights.sum() == pytest.approx(10.0, rel=1e-14)


class TestAiry:
    @pytest.mark.parametrize("x, ai, aip", AIRY_ORACLE)
    def test_matches_high_precision_values(self, x, ai, aip):
        v = airy_ai(x)
        assert v.ai == pytest.approx(ai, rel=1e-12, abs=1e-300)
        assert v.ai_prime == pytest.approx(aip, rel=1e-12, abs=1e-300)

    def test_series_and_asymptotic_agree_on_overlap(self):
        for x in np.linspace(5.5, 6.5, 21):
            s, sp = airy_series(x)
            a, ap = airy_asymptotic(x)
            assert abs(s - a) <= 1e-9 * abs(s)
            assert abs(sp - ap) <= 1e-9 * abs(sp)

    def test_range_errors(self):
        with pytest.raises(AiryRangeError):
            airy_ai(-2e3)
        with pytest.raises(AiryRangeError):
            airy_ai(float("nan"))

    def test_ode_by_finite_differences(self):
        # Ai'' = x Ai, checked through the derivative values
        for x in (-3.0, -0.7, 0.4, 2.5, 9.0):
            d = 1e-4
            second = (airy_ai(x + d).ai_prime - airy_ai(x - d).ai_prime) / (2 * d)
            assert second == pytest.approx(x * airy_ai(x).ai, rel=1e-6, abs=1e-12)


class TestKernels:
    @pytest.mark.parametrize("u, v, k", AIRY_KERNEL_ORACLE)
    def test_airy_kernel_values(self, u, v, k):
        assert airy_kernel(u, v) == pytest.approx(k, rel=1e-11)

    def test_airy_kernel_diagonal_limit(self):
        for u in (-5.0, -1.0, 0.0, 2.0):
            diag = airy_kernel(u, u)
            for d in (1e-6, 3e-6, 1e-4, 1e-3):
                assert abs(airy_kernel(u, u + d) - diag) < 1e-7 + abs(d) * 0.5

    def test_airy_matrix_matches_pointwise(self):
        u = np.array([-2.0, -0.3, 0.0, 1.7])
        M = airy_kernel_matrix(u)
        for i in range(4):
            for j in range(4):
                assert M[i, j] == pytest.approx(airy_kernel(u[i], u[j]), rel=1e-13, abs=1e-16)
        assert np.allclose(M, M.T, atol=1e-16)

    def test_sine_kernel(self):
        assert sine_kernel(0.3, 0.3) == 1.0
        assert sine_kernel(0.0, 1.0) == pytest.approx(0.0, abs=1e-16)
        assert sine_kernel(0.0, 0.5) == pytest.approx(2 / np.pi, rel=1e-15)

    def test_discrete_sine_parameters(self):
        assert discrete_sine_kernel(0.0, 0.0, 0.5, 1.0, 1.0) == 0.5
        with pytest.raises(ValueError):
            discrete_sine_kernel(0.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            discrete_sine_kernel(0.0, 0.0, 0.5, -1.0, 1.0)

    def test_fields_and_measures(self):
        f = discrete_sine_field(0.5, 1.0, 1.0, 0.5 * np.arange(-4, 5))
        assert f.measure.is_counting
        assert f.measure.nodes_in(-1.0, 1.0).size == 3
        assert zero_field().matrix(np.linspace(0, 1, 4)).sum() == 0.0
        assert airy_field()(0.0, 0.0) == pytest.approx(airy_kernel(0.0, 0.0))
        with pytest.raises(ValueError):
            ReferenceMeasure.counting([1.0, 0.0])
        with pytest.raises(ValueError):
            ReferenceMeasure("weird")


@settings(max_examples=40, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_airy_kernel_symmetric(u, v):
    assert airy_kernel(u, v) == pytest.approx(airy_kernel(v, u), rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_sine_kernel_bounded_and_symmetric(u, v):
    k = sine_kernel(u, v)
    assert abs(k) <= 1.0
    assert k == sine_kernel(v, u)
