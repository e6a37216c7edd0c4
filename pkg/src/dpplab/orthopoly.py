"""Orthogonal polynomial ensembles with varying weight ``exp(-n V)``.

The orthonormal polynomials are generated by the discretized Stieltjes
procedure on a Gauss-Legendre rule over a truncated support.  Truncation is
chosen adaptively: the interval is widened until the one-point function at
both endpoints is negligible compared with its maximum.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize_scalar

from .equilibrium import log_interaction_matrix, minimize_energy
from .quad_special import KernelField, QuadratureRule, ReferenceMeasure, composite_gauss_legendre
from .quad_special.quadrature import NODES_PER_UNIT

log = logging.getLogger(__name__)

TAIL_TOL = 1e-17
ORTHO_TOL = 1e-6


class RefinementError(RuntimeError):
    """The quadrature does not resolve the orthogonality measure."""


class NotABulkPoint(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """External field V with optional analytic equilibrium data.

    ``edge_constant`` is C in ``kappa_V(x) ~ C sqrt(x_plus - x)`` at the right
    soft edge.
    """

    V: Callable[[NDArray], NDArray]
    name: str = "custom"
    is_convex: bool = False
    is_even: bool = False
    support: Optional[tuple[float, float]] = None
    density: Optional[Callable[[NDArray], NDArray]] = None
    edge_constant: Optional[float] = None

    def __call__(self, x):
        return self.V(np.asarray(x, dtype=float))

    @property
    def has_analytic_data(self) -> bool:
        return self.support is not None and self.density is not None

    def growth_ratios(self) -> NDArray:
        """V(x)/log(1+x^2) at |x| = 1e2, 1e3, 1e4 on both sides."""
        xs = np.array([1e2, 1e3, 1e4])
        with np.errstate(over="ignore"):
            r_plus = self(xs) / np.log1p(xs**2)
            r_minus = self(-xs) / np.log1p(xs**2)
        return np.vstack([r_minus, r_plus])

    def is_admissible(self) -> bool:
        r = self.growth_ratios()
        return bool(np.all(np.diff(r, axis=1) > 0) and np.all(r[:, -1] > 1))


def quadratic_potential(center: float = 0.0) -> Potential:
    """V(x) = (x - center)^2: semicircle on [center - sqrt2, center + sqrt2]."""
    r = math.sqrt(2.0)

    def density(x):
        x = np.asarray(x, dtype=float) - center
        return np.sqrt(np.clip(2.0 - x * x, 0.0, None)) / np.pi

    return Potential(
        lambda x: (x - center) ** 2,
        name="quadratic" if center == 0 else f"quadratic@{center}",
        is_convex=True,
        is_even=center == 0,
        support=(center - r, center + r),
        density=density,
        edge_constant=2.0**0.75 / np.pi,
    )


def quartic_potential() -> Potential:
    return Potential(lambda x: x**4 / 4.0, name="quartic", is_convex=True, is_even=True)


def potential_from_name(spec: str) -> Potential:
    """``quadratic``, ``quartic``, ``quadratic-quartic`` or ``custom:<expr in x>``."""
    if spec == "quadratic":
        return quadratic_potential()
    if spec == "quartic":
        return quartic_potential()
    if spec == "quadratic-quartic":
        return Potential(lambda x: x**2 + x**4 / 20.0, name=spec, is_convex=True, is_even=True)
    if spec.startswith("custom:"):
        expr = spec.split(":", 1)[1].strip()
        namespace = {k: getattr(np, k) for k in ("exp", "log", "cosh", "sinh", "sqrt", "abs", "pi")}
        code = compile(expr, "<potential>", "eval")

        def V(x):
            return np.asarray(eval(code, {"__builtins__": {}}, {**namespace, "x": x}), dtype=float) + 0.0 * x

        V(np.linspace(-1, 1, 3))
        return Potential(V, name=spec)
    raise ValueError(f"unknown potential {spec!r}")


def soft_edge_scale(edge_constant: float) -> float:
    """Scale c with kappa_V ~ C sqrt(x+ - x) matched to the Airy one-point density."""
    return (math.pi * edge_constant) ** (2.0 / 3.0)


@dataclass(frozen=True)
class BiorthogonalSystem:
    """Orthonormal polynomials for ``w_n = exp(-n V)`` (the OPE case phi = psi).

    ``a`` holds a_0..a_n and ``b`` holds b_1..b_n of the three-term recurrence
    x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}.  Internally the weight is
    multiplied by ``exp(shift)`` to stay representable; kernels do not see this.
    """

    n: int
    potential: Potential
    a: NDArray
    b: NDArray
    mu0: float
    shift: float
    quad: QuadratureRule
    residual: float = field(default=0.0)

    def log_weight(self, x: ArrayLike) -> NDArray:
        """log w_n(x) = -n V(x)."""
        return -self.n * self.potential(x)

    def weight(self, x: ArrayLike) -> NDArray:
        return np.exp(self.log_weight(x))

    def basis(self, x: ArrayLike, count: int | None = None) -> NDArray:
        """Matrix of sqrt(w_n(x)) phi_k(x), k = 0..count-1 (default n)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        count = self.n if count is None else count
        out = np.empty((x.size, count))
        q_prev = np.zeros(x.size)
        q = np.exp(0.5 * (self.log_weight(x) + self.shift)) / math.sqrt(self.mu0)
        out[:, 0] = q
        for k in range(1, count):
            b_prev = self.b[k - 2] if k > 1 else 0.0
            q_next = ((x - self.a[k - 1]) * q - b_prev * q_prev) / self.b[k - 1]
            q_prev, q = q, q_next
            out[:, k] = q
        return out

    def phi(self, x: ArrayLike, count: int | None = None) -> NDArray:
        """Orthonormal polynomials phi_k(x) with respect to w_n itself."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        B = self.basis(x, count)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return B / np.exp(0.5 * self.log_weight(x))[:, None]

    def kernel_matrix(self, x: ArrayLike, y: ArrayLike | None = None) -> NDArray:
        Bx = self.basis(x)
        By = Bx if y is None else self.basis(y)
        return Bx @ By.T

    def kernel_diagonal(self, x: ArrayLike) -> NDArray:
        B = self.basis(x)
        return np.einsum("ik,ik->i", B, B)

    def gram(self) -> NDArray:
        """Quadrature Gram matrix of the phi_k against w_n."""
        B = self.basis(self.quad.nodes)
        return B.T @ (self.quad.weights[:, None] * B)


def _stieltjes(nodes: NDArray, lam: NDArray, n: int) -> tuple[NDArray, NDArray, float]:
    mu0 = float(lam.sum())
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    p_prev = np.zeros_like(nodes)
    p = np.full_like(nodes, 1.0 / math.sqrt(mu0))
    for k in range(n + 1):
        a[k] = float(np.dot(lam, nodes * p * p))
        if k == n:
            break
        v = (nodes - a[k]) * p - (b[k - 1] if k > 0 else 0.0) * p_prev
        b[k] = math.sqrt(float(np.dot(lam, v * v)))
        p_prev, p = p, v / b[k]
    # b[k] here is the coefficient linking p_k and p_{k+1}; keep b_1..b_n
    return a, b[:n], mu0


def stieltjes_recurrence(V: Potential, n: int, quad: QuadratureRule) -> BiorthogonalSystem:
    """Orthonormal polynomials of degree < n (plus degree n for Christoffel-Darboux)."""
    if n < 1:
        raise ValueError("n must be positive")
    logw = -n * V(quad.nodes)
    shift = -float(logw.max())
    lam = quad.weights * np.exp(logw + shift)
    a, b, mu0 = _stieltjes(quad.nodes, lam, n)
    sys = BiorthogonalSystem(n, V, a, b, mu0, shift, quad)
    G = sys.gram()
    residual = float(np.abs(G - np.eye(n)).max())
    if not residual < ORTHO_TOL:
        raise RefinementError(f"orthonormality residual {residual:.2e}; increase the quadrature order")
    return BiorthogonalSystem(n, V, a, b, mu0, shift, quad, residual)


def _initial_bracket(V: Potential, n: int) -> tuple[float, float]:
    if V.support is not None:
        return V.support
    res = minimize_scalar(lambda x: float(V(x)), bracket=(-1.0, 1.0))
    x0, v0 = float(res.x), float(res.fun)

    def reach(direction):
        step = 0.5
        x = x0
        while float(V(x + direction * step)) - v0 < 1.0 and step < 1e3:
            x += direction * step
            step *= 1.5
        return x + direction * step

    return reach(-1.0), reach(1.0)


def build_system(V: Potential, n: int, per_unit: float = NODES_PER_UNIT, tail_tol: float = TAIL_TOL,
                 max_rounds: int = 40) -> BiorthogonalSystem:
    """Stieltjes system on an adaptively truncated support of ``exp(-n V)``."""
    lo, hi = _initial_bracket(V, n)
    width = hi - lo
    lo -= 0.1 * width
    hi += 0.1 * width
    for _ in range(max_rounds):
        quad = composite_gauss_legendre([lo, hi], per_unit=per_unit)
        sys = stieltjes_recurrence(V, n, quad)
        diag = sys.kernel_diagonal(quad.nodes)
        ends = sys.kernel_diagonal([lo, hi])
        peak = diag.max()
        grow_lo = ends[0] > tail_tol * peak
        grow_hi = ends[1] > tail_tol * peak
        if not (grow_lo or grow_hi):
            return sys
        step = 0.15 * (hi - lo)
        lo -= step if grow_lo else 0.0
        hi += step if grow_hi else 0.0
    raise RefinementError("could not find a truncation interval with negligible tails")


def cd_kernel(sys: BiorthogonalSystem, x: float, y: float) -> float:
    """k_n(x, y) by the Christoffel-Darboux formula.

    Near the diagonal the two-term quotient cancels; there the kernel is summed
    term by term instead.
    """
    x = float(x)
    y = float(y)
    if abs(x - y) < 1e-6 * (1.0 + abs(x)):
        return float(sys.kernel_matrix([x], [y])[0, 0])
    B = sys.basis([x, y], sys.n + 1)
    bn = sys.b[sys.n - 1]
    n = sys.n
    return float(bn * (B[0, n] * B[1, n - 1] - B[0, n - 1] * B[1, n]) / (x - y))


def _rescaled_field(sys: BiorthogonalSystem, center: float, scale: float, name: str, **meta) -> KernelField:
    def to_x(u):
        return center + np.asarray(u, dtype=float) / scale

    def pointwise(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        Bu = sys.basis(to_x(u.ravel()))
        Bv = sys.basis(to_x(v.ravel()))
        return (np.einsum("ik,ik->i", Bu, Bv) / scale).reshape(u.shape)

    def on_nodes(u):
        B = sys.basis(to_x(u))
        return (B @ B.T) / scale

    def factor(u):
        return sys.basis(to_x(u)) / math.sqrt(scale)

    measure = ReferenceMeasure.lebesgue(x_star=center, scale=scale, n=sys.n, **meta)
    return KernelField(pointwise, measure, name=name, on_nodes=on_nodes, rank=sys.n, factor=factor)


def rescaled_bulk_kernel(sys: BiorthogonalSystem, x_star: float, kappa_star: float) -> KernelField:
    """K_n(u, v) = k_n(x* + u/(kappa n), x* + v/(kappa n)) / (kappa n)."""
    if not kappa_star > 0:
        raise NotABulkPoint(f"kappa_V(x*) = {kappa_star} is not positive")
    return _rescaled_field(sys, x_star, kappa_star * sys.n, "bulk-cd", c=kappa_star, gamma=1.0)


def rescaled_edge_kernel(sys: BiorthogonalSystem, x_plus: float, c: float) -> KernelField:
    """K_n(u, v) = k_n(x+ + u/(c n^{2/3}), ...) / (c n^{2/3})."""
    if not c > 0:
        raise ValueError(f"edge scale c must be positive, got {c}")
    return _rescaled_field(sys, x_plus, c * sys.n ** (2.0 / 3.0), "edge-cd", c=c, gamma=2.0 / 3.0)


@dataclass(frozen=True)
class EquilibriumDensity:
    support: tuple[float, float]
    x: NDArray
    density: NDArray
    mass: float
    residual: float = 0.0
    iterations: int = 0
    labels: Optional[NDArray] = None  # band / void / saturated, constrained case only

    def __call__(self, x):
        return np.interp(x, self.x, self.density, left=0.0, right=0.0)


def uniform_cells(lo: float, hi: float, m: int) -> tuple[NDArray, float]:
    """Centres of m equal cells covering [lo, hi], and the cell width."""
    h = (hi - lo) / m
    return lo + h * (np.arange(m) + 0.5), h


def _support_from_density(x: NDArray, dens: NDArray, h: float, frac: float = 1e-8) -> tuple[float, float]:
    on = np.nonzero(dens > frac * dens.max())[0]
    return float(x[on[0]] - 0.5 * h), float(x[on[-1]] + 0.5 * h)


def equilibrium_density(V: Potential, grid: ArrayLike, use_analytic: bool = True, **solver) -> EquilibriumDensity:
    """Equilibrium measure of V on a uniform grid of cell centres.

    With analytic data on the potential it is returned directly; otherwise the
    discretized logarithmic energy is minimized.
    """
    x = np.asarray(grid, dtype=float)
    h = float(x[1] - x[0])
    if np.any(np.abs(np.diff(x) - h) > 1e-9 * max(1.0, abs(h))):
        raise ValueError("equilibrium grid must be uniform")
    if use_analytic and V.has_analytic_data:
        dens = V.density(x)
        return EquilibriumDensity(V.support, x, dens, float(dens.sum() * h))
    if not V.is_convex:
        warnings.warn("numerical equilibrium for a non-convex V: the support may split into several bands",
                      stacklevel=2)
    sol = minimize_energy(log_interaction_matrix(x.size, h), V(x), **solver)
    dens = sol.masses / h
    return EquilibriumDensity(_support_from_density(x, dens, h), x, dens, float(sol.masses.sum()),
                              sol.residual, sol.iterations)


def one_point_sup(field: KernelField, u: ArrayLike) -> float:
    """sup of the rescaled one-point function over ``u``."""
    return float(np.max(np.abs(field.diagonal(u))))
