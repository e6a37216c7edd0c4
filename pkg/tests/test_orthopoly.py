import math
import warnings

import numpy as np
import pytest

from dpplab.orthopoly import (
    NotABulkPoint,
    Potential,
    build_system,
    cd_kernel,
    equilibrium_density,
    potential_from_name,
    quadratic_potential,
    quartic_potential,
    rescaled_bulk_kernel,
    rescaled_edge_kernel,
    soft_edge_scale,
    uniform_cells,
)
from dpplab.quad_special import airy_kernel_matrix, sine_kernel

from .conftest import KAPPA0, quadratic_system


class TestRecurrence:
    def test_hermite_coefficients(self):
        # w = exp(-n x^2): b_k^2 = k / (2n), a_k = 0
        n = 8
        sys = quadratic_system(n)
        k = np.arange(1, n + 1)
        assert np.allclose(sys.b**2, k / (2 * n), rtol=1e-13, atol=0)
        assert np.max(np.abs(sys.a)) < 1e-13

    @pytest.mark.parametrize("name", ["quadratic", "quartic"])
    def test_orthonormal_and_trace(self, name):
        sys = build_system(potential_from_name(name), 30)
        assert np.max(np.abs(sys.gram() - np.eye(30))) < 1e-8
        q = sys.quad
        assert q.integrate(sys.kernel_diagonal) == pytest.approx(30, abs=1e-8)

    def test_first_kernel_closed_form(self):
        # n = 1: k_1(x, x) w = exp(-x^2) / sqrt(pi)
        sys = quadratic_system(1)
        x = np.linspace(-2, 2, 7)
        assert np.allclose(sys.kernel_diagonal(x), np.exp(-(x**2)) / math.sqrt(math.pi), rtol=1e-13)

    def test_quartic_is_even(self):
        sys = build_system(quartic_potential(), 12)
        assert np.max(np.abs(sys.a)) < 1e-12


class TestChristoffelDarboux:
    def test_cd_matches_direct_sum(self):
        sys = quadratic_system(20)
        for x, y in [(0.1, -0.4), (0.3, 0.3), (1.0, 1.0 + 1e-8), (-1.2, 0.9)]:
            direct = float(sys.kernel_matrix([x], [y])[0, 0])
            cd = cd_kernel(sys, x, y)
            assert cd == pytest.approx(direct, rel=1e-9, abs=1e-12)

    def test_reproducing_property(self):
        sys = quadratic_system(10)
        q = sys.quad
        K = sys.kernel_matrix(q.nodes)
        KK = K @ (q.weights[:, None] * K)
        assert np.max(np.abs(KK - K)) < 1e-10


class TestScaling:
    def test_bulk_converges_to_sine(self):
        errs = []
        u = np.linspace(-2, 2, 21)
        for n in (10, 20, 40):
            f = rescaled_bulk_kernel(quadratic_system(n), 0.0, KAPPA0)
            errs.append(np.max(np.abs(f.matrix(u) - sine_kernel(u[:, None], u[None, :]))))
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] < 0.02

    def test_edge_converges_to_airy(self):
        V = quadratic_potential()
        c = soft_edge_scale(V.edge_constant)
        assert c == pytest.approx(math.sqrt(2), rel=1e-14)
        u = np.linspace(-2, 2, 17)
        errs = [np.max(np.abs(rescaled_edge_kernel(quadratic_system(n), math.sqrt(2), c).matrix(u)
                              - airy_kernel_matrix(u))) for n in (16, 32, 64)]
        assert errs[0] > errs[1] > errs[2]

    def test_bulk_point_guard(self):
        with pytest.raises(NotABulkPoint):
            rescaled_bulk_kernel(quadratic_system(10), 0.0, 0.0)


class TestPotential:
    def test_admissibility(self):
        assert quadratic_potential().is_admissible()
        assert not Potential(lambda x: 0.1 * np.log1p(x**2)).is_admissible()

    def test_custom_expression(self):
        V = potential_from_name("custom: x**2/2 + 0.1*x**4")
        assert V(2.0) == pytest.approx(2.0 + 1.6)
        with pytest.raises(ValueError):
            potential_from_name("nonsense")


class TestEquilibrium:
    def test_semicircle(self):
        V = quadratic_potential()
        x, _ = uniform_cells(-1.7, 1.7, 600)
        eq = equilibrium_density(V, x, use_analytic=False)
        inner = np.abs(eq.x) < 0.85 * math.sqrt(2)
        exact = V.density(eq.x[inner])
        assert np.max(np.abs(eq.density[inner] - exact)) < 1e-2
        assert eq.mass == pytest.approx(1.0, abs=1e-6)

    def test_nonconvex_warns(self):
        V = potential_from_name("custom: x**4/4 - x**2")
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            equilibrium_density(V, uniform_cells(-2.5, 2.5, 300)[0])
        assert rec
