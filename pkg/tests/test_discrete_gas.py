import numpy as np
import pytest

from dpplab.discrete_gas import (
    DegeneracyError,
    NodeDensity,
    classify,
    coulomb_ensemble,
    constrained_equilibrium,
    discrete_orthonormal,
    hahn_potential,
    krawtchouk_potential,
    log_potential,
    quantized_nodes,
    scaled_discrete_kernel,
    uniform_log_potential,
)
from dpplab.orthopoly import NotABulkPoint
from dpplab.quad_special import discrete_sine_kernel


def cos_density():
    return NodeDensity.from_function(lambda x: 1.0 + 0.5 * np.cos(2 * np.pi * x), "cos")


# int_0^1 log(1/|x - y|) rho(y) dy from a 30-digit evaluation
U_ORACLE = [
    (0.1, 1.451675524095241016),
    (0.25, 1.5089857541937103057),
    (0.5, 1.3984022444419034919),
    (0.9, 1.4516755240952409734),
]

# quantiles (2j + 1) / 16 of the same density
NODES_ORACLE = [
    0.041826602256686427266, 0.12962055762286946036, 0.23335721490831152491, 0.38479920736744465506,
    0.61520079263255534494, 0.76664278509168847509, 0.87037944237713053964, 0.95817339774331357273,
]


class TestDensityAndNodes:
    def test_density_validation(self):
        with pytest.raises(ValueError):
            NodeDensity.from_function(lambda x: 2.0 * x)
        with pytest.raises(ValueError):
            NodeDensity.from_function(lambda x: 1.0 + 0 * x + 0.1)

    def test_quantized_nodes_oracle(self):
        assert np.allclose(quantized_nodes(cos_density(), 8), NODES_ORACLE, rtol=0, atol=1e-12)

    def test_uniform_nodes(self):
        assert np.allclose(quantized_nodes(NodeDensity.uniform(), 4), [0.125, 0.375, 0.625, 0.875], atol=1e-15)


class TestLogPotential:
    @pytest.mark.parametrize("x, value", U_ORACLE)
    def test_matches_oracle(self, x, value):
        assert abs(float(log_potential(cos_density(), x)) - value) < 1e-10

    def test_uniform_closed_form(self):
        x = np.array([0.0, 0.2, 0.5, 0.77, 1.0])
        assert np.allclose(log_potential(NodeDensity.uniform(), x), uniform_log_potential(x), atol=1e-12)


class TestDiscreteEnsemble:
    def test_orthonormality_and_trace(self):
        ens = coulomb_ensemble(krawtchouk_potential(0.5), NodeDensity.uniform(), 0.5, 64)
        assert ens.n == 32
        assert np.max(np.abs(ens.gram() - np.eye(32))) < 1e-12
        assert ens.kernel_diagonal().sum() == pytest.approx(32, abs=1e-10)
        K = ens.kernel_matrix()
        assert np.max(np.abs(K @ K - K)) < 1e-12

    def test_degenerate_weight(self):
        lw = np.full(10, -1e4)
        lw[:3] = 0.0
        with pytest.raises(DegeneracyError):
            discrete_orthonormal(np.linspace(0, 1, 10), lw, 6)

    def test_hahn_requires_parameters(self):
        with pytest.raises(ValueError):
            hahn_potential(-1.0, 2.0)
        assert np.all(np.isfinite(hahn_potential(1.0, 2.0)(np.linspace(0, 1, 5))))

    def test_kernel_approaches_discrete_sine(self):
        rho = NodeDensity.uniform()
        errs = []
        for N in (64, 128, 256):
            ens = coulomb_ensemble(krawtchouk_potential(0.5), rho, 0.5, N)
            K, lat = scaled_discrete_kernel(ens, 0.5, 1.0, rho)
            u = lat.q[np.abs(lat.q) <= 3.0]
            limit = discrete_sine_kernel(u[:, None], u[None, :], 0.5, 1.0, 1.0)
            errs.append(np.max(np.abs(K.matrix(u) - limit)))
            lo, hi = lat.spacing_bounds(0.5, 1.0, rho)
            assert lo - 1e-12 <= np.diff(lat.q).min() and np.diff(lat.q).max() <= hi + 1e-12
        assert errs[0] > errs[1] > errs[2]

    def test_bulk_guard(self):
        ens = coulomb_ensemble(krawtchouk_potential(0.5), NodeDensity.uniform(), 0.5, 32)
        with pytest.raises(NotABulkPoint):
            scaled_discrete_kernel(ens, 0.5, 2.5, NodeDensity.uniform())


class TestConstrainedEquilibrium:
    def test_feasibility_and_mass(self):
        rho = NodeDensity.uniform()
        eq = constrained_equilibrium(krawtchouk_potential(0.5), rho, 0.5, m=600)
        assert np.all(eq.density <= rho(eq.x) / 0.5 + 1e-12)
        assert eq.mass == pytest.approx(1.0, abs=1e-6)

    def test_classify(self):
        labels = classify(np.array([0.0, 0.5, 2.0]), np.array([2.0, 2.0, 2.0]))
        assert list(labels) == ["void", "band", "saturated"]
