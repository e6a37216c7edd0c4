import math

import numpy as np
import pytest

from dpplab.fredholm_deform import (
    ConditioningUndefinedError,
    CostGuardError,
    DegenerateOperatorError,
    Fermi,
    Indicator,
    OneMinusExpF,
    ThinnedIndicator,
    Zero,
    bump,
    bump_f,
    deformed_kernel,
    discretize,
    fredholm_det,
    fredholm_series,
    hadamard_tail,
    indicator_h,
    make_sigma_n,
    pgf_deformed,
    softened_indicator,
)
from dpplab.orthopoly import rescaled_bulk_kernel
from dpplab.quad_special import discrete_sine_field, gauss_legendre, sine_field

from .conftest import KAPPA0, quadratic_system

# det(I - K_sine) on (-s, s), from a 30-digit Nystrom evaluation
SINE_GAP = {0.1: 0.80042954962068282177, 0.5: 0.17021742137918523073}


class TestSymbols:
    def test_ranges_and_families(self):
        u = np.linspace(-5, 5, 101)
        for sym in (Zero(), Indicator(-1, 1), ThinnedIndicator(0.3, 0, np.inf), Fermi(2.0, 1.0),
                    Fermi(1.0, 0.0, "even"), OneMinusExpF(bump_f(2.0, -1, 1), (-1, 1))):
            v = sym(u)
            assert np.all((v >= 0) & (v <= 1))

    def test_fermi_profiles(self):
        assert Fermi(1.0, 0.0)(0.0) == pytest.approx(0.5)
        assert Fermi(1.0, 0.0)(40.0) == pytest.approx(1.0)
        assert Fermi(1.0, 0.0, "even")(40.0) == pytest.approx(0.0, abs=1e-17)
        lo, hi = Fermi(1.0, 0.0, "even").effective_support(1e-14)
        assert Fermi(1.0, 0.0, "even")(hi) == pytest.approx(1e-14, rel=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            ThinnedIndicator(1.5, 0, 1)
        with pytest.raises(ValueError):
            Indicator(1, 0)
        with pytest.raises(ValueError):
            Fermi(0.0)
        with pytest.raises(ValueError):
            OneMinusExpF(lambda u: -np.ones_like(u))
        with pytest.raises(ValueError):
            bump(1.0, -1, 1)
        with pytest.raises(ValueError):
            softened_indicator(0.5, -1, 1, 2.0)
        with pytest.raises(ValueError):
            make_sigma_n(Zero(), 10, -1.0)

    def test_indicator_h_flagged(self):
        assert indicator_h(0.5, -1, 1).outside_hypotheses
        assert not bump(0.5, -1, 1).outside_hypotheses

    def test_sub_microscopic_scaling(self):
        s = make_sigma_n(ThinnedIndicator(0.5, -1, 1), 100, 0.5)
        assert s(0.09) == 0.5 and s(0.11) == 0.0


class TestDeterminant:
    @pytest.mark.parametrize("s", [0.1, 0.5])
    def test_sine_gap_oracle(self, s):
        op = discretize(sine_field(), (-s, s), order=30)
        assert fredholm_det(op, 1.0) == pytest.approx(SINE_GAP[s], rel=1e-13)

    def test_zero_psi(self):
        op = discretize(sine_field(), (-1, 1))
        assert fredholm_det(op, 0.0) == 1.0

    def test_psi_range(self):
        op = discretize(sine_field(), (-1, 1))
        with pytest.raises(ValueError):
            fredholm_det(op, 1.5)

    def test_empty_lattice_window(self):
        with pytest.raises(DegenerateOperatorError):
            discretize(discrete_sine_field(0.5, 1.0, 1.0, np.arange(5.0)), (10.0, 11.0))
        with pytest.raises(DegenerateOperatorError):
            discretize(sine_field(), (1.0, 1.0))


class TestSeries:
    def test_series_agrees_with_det(self):
        s = 0.1
        res = fredholm_series(sine_field(), lambda u: np.ones_like(u), 4, gauss_legendre(12, -s, s))
        gap = abs(res.approximation - SINE_GAP[s])
        assert gap < 1e-10
        assert gap <= res.tail_bound

    def test_hadamard_tail_monotone(self):
        assert hadamard_tail(0.0, 3) == 0.0
        assert hadamard_tail(0.2, 4) > hadamard_tail(0.2, 5) > 0
        # first omitted term is a lower bound
        p, k = 0.3, 3
        first = (k + 1) ** ((k + 1) / 2) * p ** (k + 1) / math.factorial(k + 1)
        assert hadamard_tail(p, k) >= first

    def test_cost_guards(self):
        with pytest.raises(CostGuardError):
            fredholm_series(sine_field(), np.ones_like, 9, gauss_legendre(4, 0, 1))
        with pytest.raises(CostGuardError):
            fredholm_series(sine_field(), np.ones_like, 5, gauss_legendre(40, 0, 1))


class TestDeformedKernel:
    def setup_method(self):
        sys = quadratic_system(6)
        self.op = discretize(rescaled_bulk_kernel(sys, 0.0, KAPPA0), quad=None, window=(-6.0, 6.0),
                             per_unit=12)
        self.proj = discretize(rescaled_bulk_kernel(sys, 0.0, KAPPA0), (-40.0, 40.0), per_unit=10)

    def test_routes_agree(self):
        for sym in (ThinnedIndicator(0.5, -1, 1), Fermi(1.0, 0.0, "even")):
            r = pgf_deformed(self.op, sym, bump(0.9, -1, 1), "ratio").value
            d = pgf_deformed(self.op, sym, bump(0.9, -1, 1), "deformed-kernel").value
            assert abs(r - d) < 1e-10

    def test_zero_symbol_is_identity(self):
        assert deformed_kernel(self.op, Zero()) is self.op

    def test_projection_preserved(self):
        A = self.proj.matrix
        assert np.max(np.abs(A @ A - A)) < 1e-9
        Ks = deformed_kernel(self.proj, ThinnedIndicator(0.7, -1, 2)).matrix
        assert np.max(np.abs(Ks @ Ks - Ks)) < 1e-7

    def test_projection_route_matches_dense(self):
        assert self.proj.factor is not None
        for sym in (ThinnedIndicator(0.7, -1, 2), Fermi(1.0, 0.0, "even"), Indicator(-0.5, 0.5)):
            a = deformed_kernel(self.proj, sym)
            b = deformed_kernel(self.proj, sym, structured=False)
            assert np.max(np.abs(a.matrix - b.matrix)) < 1e-12

    def test_windowed_factor_uses_dense_route(self):
        # restricted to a window the CD factor is not orthonormal
        a = deformed_kernel(self.op, ThinnedIndicator(0.5, -1, 1))
        b = deformed_kernel(self.op, ThinnedIndicator(0.5, -1, 1), structured=False)
        assert np.array_equal(a.matrix, b.matrix)

    def test_constant_symbol_neutral(self):
        Ks = deformed_kernel(self.proj, lambda u: 0.4 * np.ones_like(u)).matrix
        assert np.max(np.abs(Ks - self.proj.matrix)) < 1e-9

    def test_full_exclusion_is_singular(self):
        with pytest.raises(ConditioningUndefinedError):
            deformed_kernel(self.proj, lambda u: np.ones_like(u))

    def test_unknown_route(self):
        with pytest.raises(ValueError):
            pgf_deformed(self.op, Zero(), bump(0.5, -1, 1), route="other")

    def test_counting_measure_is_exact(self):
        op = discretize(discrete_sine_field(0.5, 1.0, 1.0, np.arange(-10.0, 11.0)), (-5.5, 5.5))
        assert op.exact and op.flag == "finite-rank-exact"
        assert op.size == 11
