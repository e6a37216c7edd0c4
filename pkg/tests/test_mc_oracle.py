import numpy as np
import pytest

from dpplab.fredholm_deform import ThinnedIndicator
from dpplab.mc_oracle import (
    AcceptanceStarvationError,
    CostGuardError,
    InsufficientStatisticsError,
    McEstimate,
    acceptance_estimate,
    build_grid_density,
    dump_csv,
    estimate_pgf,
    grid_density_from_system,
    make_rng,
    mark_and_condition,
    sample,
)

from .conftest import quadratic_system


def small_density(n):
    x = np.linspace(-1.5, 1.5, 13)
    return build_grid_density(x, -x**2, np.full(13, 0.25), n)


class TestGridDensity:
    @pytest.mark.parametrize("n", [2, 3])
    def test_marginal_matches_joint_table(self, n):
        d = small_density(n)
        P = d.joint()
        marg = P.sum(axis=tuple(range(1, n)))
        assert np.allclose(d.marginal, marg, rtol=1e-12, atol=1e-16)

    @pytest.mark.parametrize("n", [2, 3])
    def test_one_point_function_is_kernel_diagonal(self, n):
        sys = quadratic_system(n)
        d = grid_density_from_system(sys)
        q = sys.quad
        # on the Stieltjes quadrature grid the discrete ensemble is exact
        assert np.allclose(d.marginal, sys.kernel_diagonal(q.nodes) * q.weights / n, rtol=1e-9, atol=1e-17)

    def test_cost_guard(self):
        with pytest.raises(CostGuardError):
            build_grid_density(np.arange(4.0), np.zeros(4), np.ones(4), 4)

    def test_sampler_frequencies(self):
        d = small_density(2)
        s = sample(d, 40_000, seed=3)
        assert s.shape == (40_000, 2)
        P = d.joint()
        idx = np.searchsorted(d.grid, s)
        emp = np.bincount(idx[:, 0] * 13 + idx[:, 1], minlength=169) / 40_000
        se = np.sqrt(P.ravel() * (1 - P.ravel()) / 40_000) + 1e-12
        assert np.max(np.abs(emp - P.ravel()) / se) < 5.0

    def test_reproducible_streams(self):
        d = small_density(3)
        a = sample(d, 500, seed=11)
        b = sample(d, 500, seed=11)
        c = sample(d, 500, seed=11, stream=2)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert make_rng(1, 0).random() != make_rng(1, 1).random()


class TestMarking:
    def test_acceptance_matches_determinant(self):
        d = small_density(2)
        sym = ThinnedIndicator(0.5, -0.6, 0.6)
        pos = sample(d, 50_000, seed=5)
        est = acceptance_estimate(mark_and_condition(pos, sym, seed=5))
        P = d.joint()
        keep = (1 - sym(d.grid))
        exact = float(np.einsum("ij,i,j->", P, keep, keep))
        assert abs(est.z_score(exact)) < 4

    def test_starvation_guard(self):
        pos = np.zeros((20_000, 2))
        with pytest.raises(AcceptanceStarvationError):
            mark_and_condition(pos, lambda u: np.ones_like(u), seed=0)

    def test_insufficient_statistics(self):
        with pytest.raises(InsufficientStatisticsError):
            estimate_pgf(np.zeros((10, 2)), lambda u: 0.5 * np.ones_like(u))

    def test_estimate_fields(self):
        est = estimate_pgf(np.zeros((200, 2)), lambda u: 0.5 * np.ones_like(u))
        assert est.mean == pytest.approx(0.25) and est.stderr == 0.0
        assert McEstimate(1.0, 0.0, 1).z_score(1.0) == 0.0

    def test_csv_dump(self, tmp_path):
        marked = mark_and_condition(np.array([[0.1, 0.2], [0.3, 0.4]]), lambda u: 0 * u, seed=1)
        path = tmp_path / "s.csv"
        dump_csv(path, marked)
        lines = path.read_text().splitlines()
        assert lines[0] == "replica,particle,position,mark"
        assert len(lines) == 5
