"""Monte Carlo oracle for small orthogonal polynomial ensembles.

The joint density ``prod_i lam_i * prod_{i<j} (x_i - x_j)^2`` on a grid with
cell masses ``lam`` is sampled exactly through its chain-rule conditionals.
Marks are then drawn independently with probability sigma, and configurations
carrying a mark are rejected.  Nothing here uses the correlation kernel.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

log = logging.getLogger(__name__)

MAX_PARTICLES = 3
MIN_ACCEPTED = 100
STARVATION_RATE = 1e-3
STARVATION_TRIALS = 10_000


class CostGuardError(ValueError):
    pass


class AcceptanceStarvationError(RuntimeError):
    """Too few configurations survive the conditioning."""


class InsufficientStatisticsError(RuntimeError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class GridDensity:
    """Exact n-point grid ensemble, n <= 3.

    ``lam`` are the cell masses (quadrature weight times w_n, normalized by
    their maximum); ``coords`` maps grid points to the coordinate in which
    symbols and test functions are evaluated (e.g. microscopic u).
    """

    n: int
    grid: NDArray
    lam: NDArray
    coords: NDArray
    marginal: NDArray  # P(x_1 = grid_i)
    log_z: float  # log of the unnormalized total mass (relative to lam)

    def conditional_second(self, i1: NDArray) -> NDArray:
        """Unnormalized P(x_2 = . | x_1 = grid[i1]) for a batch of indices, shape (batch, m)."""
        x = self.grid
        a = x[i1][:, None]
        nu = self.lam[None, :] * (x[None, :] - a) ** 2
        if self.n == 2:
            return nu
        # n = 3: sum over x_3 of nu(x_3) (x_2 - x_3)^2
        N0 = nu.sum(axis=1, keepdims=True)
        mu = (nu * x).sum(axis=1, keepdims=True) / N0
        var = (nu * (x[None, :] - mu) ** 2).sum(axis=1, keepdims=True)
        return nu * (N0 * (x[None, :] - mu) ** 2 + var)

    def conditional_third(self, i1: NDArray, i2: NDArray) -> NDArray:
        x = self.grid
        return self.lam[None, :] * (x[None, :] - x[i1][:, None]) ** 2 * (x[None, :] - x[i2][:, None]) ** 2

    def joint(self) -> NDArray:
        """Full normalized joint table (only for n <= 2, or small grids)."""
        x, lam = self.grid, self.lam
        if self.n == 1:
            P = lam.copy()
        elif self.n == 2:
            P = lam[:, None] * lam[None, :] * (x[:, None] - x[None, :]) ** 2
        else:
            d = x[:, None] - x[None, :]
            P = (lam[:, None, None] * lam[None, :, None] * lam[None, None, :]
                 * d[:, :, None] ** 2 * d[:, None, :] ** 2 * d[None, :, :] ** 2)
        return P / P.sum()


def build_grid_density(grid: ArrayLike, log_weight: ArrayLike, quad_weights: ArrayLike, n: int,
                       coords: Optional[ArrayLike] = None) -> GridDensity:
    """Tabulate the chain-rule factorization of the n-point grid ensemble."""
    if n > MAX_PARTICLES:
        raise CostGuardError(f"exact enumeration is limited to n <= {MAX_PARTICLES}, got n={n}")
    if n < 1:
        raise ValueError("n must be positive")
    x = np.asarray(grid, dtype=float)
    lw = np.asarray(log_weight, dtype=float)
    lam = np.asarray(quad_weights, dtype=float) * np.exp(lw - lw.max())
    lam = np.where(lam > 1e-300, lam, 0.0)
    if n == 1:
        marg = lam
    else:
        # marginal of x_1: lam(a) * sum over the other particles, by moments of nu = lam (x - a)^2
        nu = lam[None, :] * (x[None, :] - x[:, None]) ** 2
        if n == 2:
            marg = lam * nu.sum(axis=1)
        else:
            N0 = nu.sum(axis=1)
            mu = (nu @ x) / N0
            marg = lam * 2.0 * N0 * (nu * (x[None, :] - mu[:, None]) ** 2).sum(axis=1)
    total = float(marg.sum())
    c = x if coords is None else np.asarray(coords, dtype=float)
    return GridDensity(n, x, lam, c, marg / total, math.log(total) + n * float(lw.max()))


def grid_density_from_system(sys, coords: Optional[Callable[[NDArray], NDArray]] = None) -> GridDensity:
    """Grid ensemble on the quadrature nodes of an orthogonal polynomial system."""
    q = sys.quad
    c = None if coords is None else coords(q.nodes)
    return build_grid_density(q.nodes, sys.log_weight(q.nodes), q.weights, sys.n, c)


def grid_density_from_discrete(ens, coords: Optional[NDArray] = None) -> GridDensity:
    return build_grid_density(ens.nodes, ens.log_w, np.ones(ens.N), ens.n, coords)


def _inverse_cdf(rows: NDArray, u: NDArray) -> NDArray:
    cdf = np.cumsum(rows, axis=-1)
    target = u * cdf[..., -1]
    idx = (cdf < target[..., None]).sum(axis=-1)
    return np.minimum(idx, rows.shape[-1] - 1)


def sample(density: GridDensity, count: int, seed: int, stream: int = 0, chunk: int = 4_000) -> NDArray:
    """``count`` configurations, shape (count, n), in the density's coordinates."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = make_rng(seed, stream)
    out = np.empty((count, density.n), dtype=int)
    cdf1 = np.cumsum(density.marginal)
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        u = rng.random((stop - start, density.n))
        i1 = np.minimum(np.searchsorted(cdf1, u[:, 0] * cdf1[-1], side="right"), cdf1.size - 1)
        out[start:stop, 0] = i1
        if density.n >= 2:
            i2 = _inverse_cdf(density.conditional_second(i1), u[:, 1])
            out[start:stop, 1] = i2
        if density.n == 3:
            out[start:stop, 2] = _inverse_cdf(density.conditional_third(i1, i2), u[:, 2])
    # the chain rule samples an ordered tuple; symmetrize by a random permutation
    perm = np.argsort(rng.random(out.shape), axis=1)
    return density.coords[np.take_along_axis(out, perm, axis=1)]


@dataclass(frozen=True)
class MarkedSamples:
    positions: NDArray  # (count, n) in symbol coordinates
    marks: NDArray  # (count, n) booleans
    accepted: NDArray  # (count,) all marks zero

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean())

    def accepted_positions(self) -> NDArray:
        return self.positions[self.accepted]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    count: int
    acceptance_rate: float = 1.0

    def z_score(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.stderr


def mark_and_condition(positions: NDArray, sigma: Callable[[NDArray], NDArray], seed: int, stream: int = 1) -> MarkedSamples:
    """Independent Bernoulli(sigma(u_j)) marks; keep configurations with no mark."""
    pos = np.asarray(positions, dtype=float)
    rng = make_rng(seed, stream)
    probs = np.asarray(sigma(pos), dtype=float) * np.ones_like(pos)
    marks = rng.random(pos.shape) < probs
    accepted = ~marks.any(axis=1)
    head = min(pos.shape[0], STARVATION_TRIALS)
    if head >= STARVATION_TRIALS and accepted[:head].mean() < STARVATION_RATE:
        raise AcceptanceStarvationError(
            f"acceptance rate {accepted[:head].mean():.2e} after {head} trials; use a milder sigma")
    return MarkedSamples(pos, marks, accepted)


def acceptance_estimate(marked: MarkedSamples) -> McEstimate:
    a = marked.accepted.astype(float)
    return McEstimate(float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size)), a.size, float(a.mean()))


def estimate_pgf(positions: NDArray, h: Callable[[NDArray], NDArray], acceptance_rate: float = 1.0) -> McEstimate:
    """Mean of prod_k (1 - h(u_k)) with its standard error."""
    pos = np.asarray(positions, dtype=float)
    if pos.shape[0] < MIN_ACCEPTED:
        raise InsufficientStatisticsError(f"{pos.shape[0]} accepted samples, need at least {MIN_ACCEPTED}")
    vals = np.prod(1.0 - np.asarray(h(pos), dtype=float) * np.ones_like(pos), axis=1)
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return McEstimate(float(vals.mean()), se, int(vals.size), acceptance_rate)


def dump_csv(path, marked: MarkedSamples) -> None:
    """Columns: replica, particle, position, mark."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "particle", "position", "mark"])
        count, n = marked.positions.shape
        for r in range(count):
            for j in range(n):
                w.writerow([r, j, repr(float(marked.positions[r, j])), int(marked.marks[r, j])])
