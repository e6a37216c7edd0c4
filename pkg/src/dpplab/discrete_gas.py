"""Discrete Coulomb gases on quantized lattices in [0, 1].

Nodes solve ``int_0^{x_j} rho = (2j+1)/(2N)``.  The weight is
``w_N = exp(-N (V - U^rho + eta/N))`` and the orthonormal polynomials of the
discrete measure are generated by Lanczos with full reorthogonalization, with
the weights handled in log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .equilibrium import log_interaction_matrix, minimize_energy
from .orthopoly import EquilibriumDensity, NotABulkPoint, uniform_cells
from .quad_special import KernelField, ReferenceMeasure, gauss_legendre

U_RHO_ORDER = 30
BAND_THRESHOLD = 1e-3


class DegeneracyError(RuntimeError):
    """The discrete measure supports fewer than n orthonormal polynomials."""


def _validate_positive(x: float, name: str) -> None:
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be positive and finite, got {x}")


@dataclass(frozen=True)
class NodeDensity:
    """Positive density rho on [0, 1] with unit mass, and bounds m <= rho <= M."""

    rho: Callable[[NDArray], NDArray]
    m: float
    M: float
    name: str = "custom"

    @classmethod
    def from_function(cls, rho: Callable, name: str = "custom", samples: int = 2001) -> "NodeDensity":
        grid = np.linspace(0.0, 1.0, samples)
        vals = np.asarray(rho(grid), dtype=float) * np.ones_like(grid)
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            raise ValueError("node density must be strictly positive on [0, 1]")
        rule = gauss_legendre(60, 0.0, 1.0)
        mass = rule.integrate(lambda x: np.asarray(rho(x), dtype=float) * np.ones_like(x))
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"node density must integrate to 1, got {mass:.12g}")
        return cls(rho, float(vals.min()), float(vals.max()), name)

    @classmethod
    def uniform(cls) -> "NodeDensity":
        return cls(lambda x: np.ones_like(np.asarray(x, dtype=float)), 1.0, 1.0, "uniform")

    def __call__(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.rho(x), dtype=float) * np.ones_like(x)

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return gauss_legendre(40, 0.0, float(x)).integrate(self)


def quantized_nodes(rho: NodeDensity, N: int) -> NDArray:
    """Nodes with ``int_0^{x_j} rho = (2j+1)/(2N)``, j = 0..N-1."""
    if N < 1:
        raise ValueError("N must be at least 1")
    targets = (2.0 * np.arange(N) + 1.0) / (2.0 * N)
    if rho.name == "uniform":
        return targets
    nodes = np.empty(N)
    lo = 0.0
    for j, c in enumerate(targets):
        a, b = lo, 1.0
        if not (rho.cdf(a) <= c <= rho.cdf(b)):
            raise RuntimeError(f"quantization root {j} is not bracketed")
        # bisection to a safe bracket, then Newton (rho = cdf')
        for _ in range(20):
            mid = 0.5 * (a + b)
            if rho.cdf(mid) < c:
                a = mid
            else:
                b = mid
        x = 0.5 * (a + b)
        for _ in range(30):
            step = (rho.cdf(x) - c) / float(rho(x))
            x = min(max(x - step, a), b)
            if abs(step) < 1e-15:
                break
        if abs(rho.cdf(x) - c) > 1e-12:
            raise RuntimeError(f"quantization node {j} did not converge")
        nodes[j] = x
        lo = x
    return nodes


def log_potential(rho: NodeDensity, x: ArrayLike, order: int = U_RHO_ORDER) -> NDArray:
    """U^rho(x) = int_0^1 log(1/|x-t|) rho(t) dt for x in [0, 1].

    Each side of x is mapped by t = x -+ s^2; the part with rho frozen at x is
    integrated in closed form and the smooth remainder by Gauss-Legendre.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xs < 0) | (xs > 1)):
        raise ValueError("U^rho is evaluated on [0, 1] only")
    g, wg = np.polynomial.legendre.leggauss(order)
    out = np.empty(xs.shape)
    for i, xi in enumerate(xs):
        rx = float(rho(xi))
        total = 0.0
        for length, sign in ((xi, -1.0), (1.0 - xi, 1.0)):
            if length <= 0:
                continue
            # int_0^{length} -log(u) du, with u = s^2
            total += rx * length * (1.0 - math.log(length))
            a = math.sqrt(length)
            s = 0.5 * a * (g + 1.0)
            integrand = -4.0 * s * np.log(s) * (rho(xi + sign * s * s) - rx)
            total += 0.5 * a * float(wg @ integrand)
        out[i] = total
    return out if np.ndim(x) else out[0]


def uniform_log_potential(x: ArrayLike) -> NDArray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(x > 0, x * np.log(x), 0.0) - np.where(x < 1, (1 - x) * np.log1p(-x), 0.0) + 1.0


def coulomb_log_weight(
    V: Callable[[NDArray], NDArray],
    rho: NodeDensity,
    eta: Optional[Callable[[NDArray], NDArray]],
    N: int,
    nodes: Optional[NDArray] = None,
) -> NDArray:
    """log w_N = -N (V - U^rho) - eta on the quantized nodes."""
    x = quantized_nodes(rho, N) if nodes is None else np.asarray(nodes, dtype=float)
    Vx = np.asarray(V(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(Vx)):
        raise ValueError("V must be finite on (0, 1)")
    U = uniform_log_potential(x) if rho.name == "uniform" else log_potential(rho, x)
    out = -N * (Vx - U)
    if eta is not None:
        ex = np.asarray(eta(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite(ex)):
            raise ValueError("eta must be bounded on [0, 1]")
        out -= ex
    return out


def coulomb_weight(V, rho: NodeDensity, eta, N: int) -> NDArray:
    """w_N on the quantized nodes, normalized so that max w_N = 1."""
    lw = coulomb_log_weight(V, rho, eta, N)
    return np.exp(lw - lw.max())


def krawtchouk_potential(p: float = 0.5) -> Callable[[NDArray], NDArray]:
    """Continuum Krawtchouk field: V(x) = x log(q/p), q = 1 - p."""
    if not 0 < p < 1:
        raise ValueError("Krawtchouk parameter p must lie in (0, 1)")
    slope = math.log((1.0 - p) / p)
    return lambda x: slope * np.asarray(x, dtype=float)


def hahn_potential(a: float, b: float, c: float = 0.0, d: float = 0.0) -> Callable[[NDArray], NDArray]:
    """V(x) = -(a+x)log(a+x) - (b-x)log(b-x) + cx + d, with a > 0, b > 1."""
    if not (a > 0 and b > 1):
        raise ValueError("Hahn parameters need a > 0 and b > 1")

    def V(x):
        x = np.asarray(x, dtype=float)
        return -(a + x) * np.log(a + x) - (b - x) * np.log(b - x) + c * x + d

    return V


@dataclass(frozen=True)
class DiscreteEnsemble:
    """Discrete orthonormal polynomials on a node set.

    ``Q[:, k] = sqrt(w_N) p_k`` on the nodes, so ``Q`` has orthonormal columns.
    ``log_w`` keeps the weights in log-space, relative to their maximum.
    """

    N: int
    n: int
    nodes: NDArray
    log_w: NDArray
    Q: NDArray
    a: NDArray
    b: NDArray

    @property
    def beta(self) -> float:
        return self.n / self.N

    def p(self, k: int) -> NDArray:
        """Values of p_k^{(N)} on the nodes (normalized weight)."""
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return self.Q[:, k] * np.exp(-0.5 * self.log_w)

    def kernel_matrix(self) -> NDArray:
        """k_n(x_i, x_j) on all nodes."""
        return self.Q @ self.Q.T

    def kernel_diagonal(self) -> NDArray:
        return np.einsum("ik,ik->i", self.Q, self.Q)

    def gram(self) -> NDArray:
        return self.Q.T @ self.Q


def discrete_orthonormal(nodes: ArrayLike, log_w: ArrayLike, n: int) -> DiscreteEnsemble:
    """Lanczos on diag(nodes) started from sqrt(w), fully reorthogonalized."""
    x = np.asarray(nodes, dtype=float)
    lw = np.asarray(log_w, dtype=float)
    N = x.size
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    lw = lw - lw.max()
    sw = np.exp(0.5 * lw)
    Q = np.zeros((N, n))
    a = np.zeros(n)
    b = np.zeros(n)
    q = sw / np.linalg.norm(sw)
    scale = max(1.0, float(np.abs(x).max()))
    for k in range(n):
        Q[:, k] = q
        v = x * q
        a[k] = q @ v
        for _ in range(2):
            v -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ v)
        bk = float(np.linalg.norm(v))
        b[k] = bk
        if k + 1 < n:
            if bk < 1e-13 * scale:
                raise DegeneracyError(f"numerical rank {k + 1} < n = {n}")
            q = v / bk
    return DiscreteEnsemble(N, n, x, lw, Q, a, b)


def coulomb_ensemble(V, rho: NodeDensity, beta: float, N: int, eta=None) -> DiscreteEnsemble:
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    n = int(round(beta * N))
    nodes = quantized_nodes(rho, N)
    return discrete_orthonormal(nodes, coulomb_log_weight(V, rho, eta, N, nodes), n)


@dataclass(frozen=True)
class ScaledLattice:
    """Scaled nodes q_j = kappa n (x_j - x*) - shift, indexed so q_0 is the first site >= 0.

    The spacing tends to beta kappa / rho(x*), the lattice on which the
    discrete sine kernel is written.
    """

    q: NDArray
    index: NDArray  # j labels, with q[index == 0] the smallest non-negative site
    x_star: float
    scale: float
    shift: float
    limit_spacing: float

    def site(self, j: int) -> float:
        return float(self.q[np.nonzero(self.index == j)[0][0]])

    def spacing_bounds(self, beta: float, kappa: float, rho: NodeDensity) -> tuple[float, float]:
        return beta * kappa / rho.M, beta * kappa / rho.m

    def count_in(self, L: float) -> int:
        return int(np.count_nonzero(np.abs(self.q) <= L))


def scaled_lattice(nodes: NDArray, n: int, x_star: float, kappa: float, rho_star: float, beta: float,
                   recentre: bool = True) -> ScaledLattice:
    raw = kappa * n * (np.asarray(nodes, dtype=float) - x_star)
    j0 = int(np.searchsorted(raw, 0.0))
    if j0 >= raw.size:
        raise NotABulkPoint("x* lies beyond the last node")
    shift = float(raw[j0]) if recentre else 0.0
    return ScaledLattice(raw - shift, np.arange(raw.size) - j0, x_star, kappa * n, shift, beta * kappa / rho_star)


def scaled_discrete_kernel(ens: DiscreteEnsemble, x_star: float, kappa_star: float, rho: NodeDensity,
                           recentre: bool = True) -> tuple[KernelField, ScaledLattice]:
    """Kernel k_n on the scaled lattice, as a field on its counting measure.

    No 1/(kappa n) prefactor: the counting measure of the lattice is not
    rescaled.  Off-lattice arguments evaluate to zero.
    """
    beta = ens.beta
    rho_star = float(rho(x_star))
    if not 0 < kappa_star < rho_star / beta:
        raise NotABulkPoint(f"kappa={kappa_star} is outside (0, rho(x*)/beta={rho_star / beta})")
    lat = scaled_lattice(ens.nodes, ens.n, x_star, kappa_star, rho_star, beta, recentre)
    q = lat.q

    def locate(u):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(q, u), 0, q.size - 1)
        left = np.clip(idx - 1, 0, q.size - 1)
        idx = np.where(np.abs(q[left] - u) < np.abs(q[idx] - u), left, idx)
        hit = np.abs(q[idx] - u) <= 1e-9 * max(1.0, lat.limit_spacing)
        return idx, hit

    def pointwise(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        iu, hu = locate(u)
        iv, hv = locate(v)
        vals = np.einsum("...k,...k->...", ens.Q[iu], ens.Q[iv])
        return np.where(hu & hv, vals, 0.0)

    def factor(u):
        iu, hu = locate(u)
        if not np.all(hu):
            raise ValueError("discrete kernel matrix requested off the lattice")
        return ens.Q[iu]

    def on_nodes(u):
        B = factor(u)
        return B @ B.T

    measure = ReferenceMeasure.counting(q, x_star=x_star, c=kappa_star, gamma=1.0, n=ens.n, beta=beta)
    return KernelField(pointwise, measure, name="discrete-cd", on_nodes=on_nodes, rank=ens.n,
                       factor=factor), lat


def classify(density: NDArray, cap_density: NDArray, threshold: float = BAND_THRESHOLD) -> NDArray:
    """'void', 'band' or 'saturated' for each cell from the ratio density / cap."""
    ratio = density / cap_density
    return np.where(ratio <= threshold, "void", np.where(ratio >= 1.0 - threshold, "saturated", "band"))


def constrained_equilibrium(V, rho: NodeDensity, beta: float, m: int = 2000, **solver) -> EquilibriumDensity:
    """Minimize the log energy plus (1/beta) int (V - U^rho) under density <= rho/beta.

    Uses ``m`` equal cells on [0, 1].
    """
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    x, h = uniform_cells(0.0, 1.0, m)
    U = uniform_log_potential(x) if rho.name == "uniform" else log_potential(rho, x)
    field = (np.asarray(V(x), dtype=float) * np.ones_like(x) - U) / beta
    cap_density = rho(x) / beta
    sol = minimize_energy(log_interaction_matrix(m, h), field, upper=cap_density * h, **solver)
    dens = np.minimum(sol.masses / h, cap_density)
    labels = classify(dens, cap_density)
    on = np.nonzero(labels != "void")[0]
    support = (float(x[on[0]] - 0.5 * h), float(x[on[-1]] + 0.5 * h))
    return EquilibriumDensity(support, x, dens, float(sol.masses.sum()), sol.residual, sol.iterations, labels)
