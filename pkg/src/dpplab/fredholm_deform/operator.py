"""Nyström discretization, Fredholm determinants and the deformed kernel."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lapack, lu_factor, lu_solve, qr

from ..quad_special import KernelField, QuadratureRule, composite_gauss_legendre
from .symbols import fused_symbol

log = logging.getLogger(__name__)

SINGULAR_CONDITION = 1e12
# factors with max |I - F^T F| below this are treated as exact projections
PROJECTION_TOL = 1e-12
SERIES_KMAX = 8
SERIES_MAX_EVALS = 5_000_000


class DegenerateOperatorError(ValueError):
    """The discretization window contains no nodes."""


class ConditioningUndefinedError(RuntimeError):
    """I - sigma K is (numerically) singular: the conditioning event has probability zero."""


class IllPosedDeformationError(RuntimeError):
    """G[sigma] = det(I - sigma K) is not positive."""


class CostGuardError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizedOperator:
    """A = sqrt(w_i) K(u_i, u_j) sqrt(w_j) on a grid.

    ``exact`` is True for counting measures, where the matrix is the operator
    itself rather than a Nyström approximation.  ``factor``, when known, is an
    (m, rank) matrix F with ``matrix = F F^T``.
    """

    nodes: NDArray
    weights: NDArray
    matrix: NDArray
    exact: bool
    name: str = "K"
    condition: Optional[float] = None
    factor: Optional[NDArray] = None

    def __post_init__(self):
        m = self.nodes.size
        if self.matrix.shape != (m, m) or self.weights.shape != (m,):
            raise ValueError("operator matrix, nodes and weights have inconsistent sizes")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def flag(self) -> str:
        return "finite-rank-exact" if self.exact else "nystrom-approximate"

    def values(self, fn: Callable[[NDArray], NDArray] | NDArray | float) -> NDArray:
        """Evaluate a symbol or test function on the grid (arrays pass through)."""
        if callable(fn):
            return np.asarray(fn(self.nodes), dtype=float) * np.ones(self.size)
        return np.asarray(fn, dtype=float) * np.ones(self.size)

    def kernel_values(self) -> NDArray:
        """K(u_i, u_j) with the quadrature weights removed."""
        s = np.sqrt(self.weights)
        return self.matrix / s[:, None] / s[None, :]


def window_breakpoints(window: tuple[float, float], extra: Sequence[float] = ()) -> list[float]:
    a, b = window
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DegenerateOperatorError(f"window must be a bounded non-empty interval, got {window}")
    inner = sorted(set(float(p) for p in extra if a < p < b and math.isfinite(p)))
    return [a, *inner, b]


def discretize(
    K: KernelField,
    window: tuple[float, float],
    order: int | Sequence[int] | None = None,
    per_unit: float | None = None,
    breakpoints: Sequence[float] = (),
    quad: QuadratureRule | None = None,
) -> DiscretizedOperator:
    """Nyström matrix of K on ``window``.

    Continuous measures use composite Gauss-Legendre with panels split at
    ``breakpoints`` (jumps of sigma or h), so no node sits on a discontinuity.
    Counting measures take the nodes inside the window with unit weights.
    """
    if K.measure.is_counting:
        a, b = window
        nodes = K.measure.nodes_in(a, b)
        if nodes.size == 0:
            raise DegenerateOperatorError(f"no lattice sites in {window}")
        F = None if K.factor is None else K.factor(nodes)
        A = K.matrix(nodes) if F is None else F @ F.T
        return DiscretizedOperator(nodes, np.ones(nodes.size), A, True, K.name, factor=F)
    if quad is None:
        pts = window_breakpoints(window, breakpoints)
        if order is None and per_unit is None:
            per_unit = 16.0
        quad = composite_gauss_legendre(pts, order=order, per_unit=per_unit)
    s = np.sqrt(quad.weights)
    if K.factor is not None:
        F = s[:, None] * K.factor(quad.nodes)
        return DiscretizedOperator(quad.nodes, quad.weights, F @ F.T, False, K.name, factor=F)
    A = s[:, None] * K.matrix(quad.nodes) * s[None, :]
    return DiscretizedOperator(quad.nodes, quad.weights, A, False, K.name)


def _lu_det(M: NDArray) -> tuple[float, float]:
    """(sign, log|det|) via partial-pivot LU."""
    lu, piv = lu_factor(M, check_finite=False)
    d = np.diag(lu)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    sign = (-1.0) ** swaps * np.prod(np.sign(d))
    with np.errstate(divide="ignore"):
        return float(sign), float(np.sum(np.log(np.abs(d))))


def fredholm_det(op: DiscretizedOperator, psi) -> float:
    """det(I - sqrt(psi) A sqrt(psi)) with psi in [0, 1] on the grid."""
    p = op.values(psi)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("psi must take values in [0, 1]")
    if not np.any(p):
        return 1.0
    r = np.sqrt(p)
    M = np.eye(op.size) - r[:, None] * op.matrix * r[None, :]
    sign, logabs = _lu_det(M)
    return sign * math.exp(logabs)


@dataclass(frozen=True)
class SeriesResult:
    partial_sums: NDArray  # S_0 .. S_kmax
    terms: NDArray  # S_k / k!
    approximation: float  # sum (-1)^k S_k / k!
    tail_bound: float
    dominator_product: float


def hadamard_tail(product: float, k_max: int, tol: float = 1e-30) -> float:
    """sum_{k > k_max} k^{k/2} product^k / k!."""
    if product <= 0:
        return 0.0
    total = 0.0
    for k in range(k_max + 1, 100_000):
        term = math.exp(0.5 * k * math.log(k) + k * math.log(product) - math.lgamma(k + 1))
        total += term
        # successive ratios behave like product * sqrt(e / k)
        if product * math.sqrt(math.e / k) < 0.5 and term < tol * total:
            return total
    return math.inf


def fredholm_series(
    K: KernelField,
    psi: Callable[[NDArray], NDArray],
    k_max: int,
    quad: QuadratureRule,
    phi_norm: float | None = None,
    psi_norm: float | None = None,
) -> SeriesResult:
    """Fredholm series terms S_k = int det[K(u_i, u_j)] prod psi(u_i) by tensor quadrature.

    The tail bound uses dominators with ``|sqrt(psi(u)) K(u,v) sqrt(psi(v))| <= Phi(u) Psi(v)``;
    their L2 norms default to ``sqrt(int psi K(u,u))`` (valid for positive kernels).
    """
    if k_max > SERIES_KMAX:
        raise CostGuardError(f"k_max={k_max} exceeds {SERIES_KMAX}")
    m = quad.nodes.size
    if k_max >= 1 and m**k_max > SERIES_MAX_EVALS:
        raise CostGuardError(f"{m}^{k_max} tensor evaluations exceed the budget of {SERIES_MAX_EVALS}")
    pv = np.asarray(psi(quad.nodes), dtype=float) * np.ones(m)
    Kmat = K.matrix(quad.nodes)
    lam = quad.weights * pv
    S = np.zeros(k_max + 1)
    S[0] = 1.0
    for k in range(1, k_max + 1):
        total = 0.0
        chunk = max(1, 200_000 // max(1, m ** (k - 1)))
        for head in range(0, m, chunk):
            idx = np.array(list(itertools.product(range(head, min(m, head + chunk)), *[range(m)] * (k - 1))))
            sub = Kmat[idx[:, :, None], idx[:, None, :]]
            dets = np.linalg.det(sub) if k > 1 else sub[:, 0, 0]
            total += float(np.sum(dets * np.prod(lam[idx], axis=1)))
        S[k] = total
    fact = np.array([math.factorial(k) for k in range(k_max + 1)], dtype=float)
    terms = S / fact
    approx = float(np.sum(terms * (-1.0) ** np.arange(k_max + 1)))
    if phi_norm is None or psi_norm is None:
        trace = float(np.sum(lam * np.abs(np.diag(Kmat))))
        phi_norm = psi_norm = math.sqrt(trace)
    prod = phi_norm * psi_norm
    return SeriesResult(S, terms, approx, hadamard_tail(prod, k_max), prod)


def _condition_1norm(M: NDArray, lu: NDArray) -> float:
    anorm = float(np.abs(M).sum(axis=0).max())
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    return math.inf if rcond == 0 else 1.0 / rcond


def _is_projection_factor(F: NDArray) -> bool:
    return bool(np.abs(np.eye(F.shape[1]) - F.T @ F).max() <= PROJECTION_TOL)


def _deformed_projection(op: DiscretizedOperator, s: NDArray) -> DiscretizedOperator:
    """K^sigma for a projection A = F F^T with orthonormal F.

    Push-through gives K^sigma = B (B^T B)^{-1} B^T with B = sqrt(1-sigma) F,
    the orthogonal projection onto range(B).  From B = QR it is Q Q^T, with
    accuracy governed by cond(B) rather than cond(I - sigma K) = cond(B)^2.
    """
    B = np.sqrt(1.0 - s)[:, None] * op.factor
    Q, R = qr(B, mode="economic", check_finite=False)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = math.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if not cond < SINGULAR_CONDITION:
        raise ConditioningUndefinedError(f"I - sigma K is numerically singular (condition {cond:.2e})")
    return DiscretizedOperator(op.nodes, op.weights, Q @ Q.T, op.exact, f"{op.name}^sigma", cond)


def deformed_kernel(op: DiscretizedOperator, sigma, structured: bool = True) -> DiscretizedOperator:
    """Matrix of K^sigma = sqrt(1-sigma) K (I - sigma K)^{-1} sqrt(1-sigma).

    Projections carrying an orthonormal factor use the rank-sized QR form (set
    ``structured=False`` to force the dense route).  Otherwise X (I - diag(sigma) A) = A
    is solved for X, with one step of iterative refinement, then sandwiched
    with sqrt(1 - sigma).
    """
    s = op.values(sigma)
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("sigma must take values in [0, 1]")
    if not np.any(s):
        return op
    if structured and op.factor is not None and _is_projection_factor(op.factor):
        return _deformed_projection(op, s)
    A = op.matrix
    M = np.eye(op.size) - s[:, None] * A
    # X M = A  <=>  M^T X^T = A^T
    Mt = np.ascontiguousarray(M.T)
    lu, piv = lu_factor(Mt, check_finite=False)
    cond = _condition_1norm(Mt, lu)
    if not cond < SINGULAR_CONDITION:
        raise ConditioningUndefinedError(f"I - sigma K is numerically singular (condition {cond:.2e})")
    Xt = lu_solve((lu, piv), A.T, check_finite=False)
    Xt += lu_solve((lu, piv), A.T - Mt @ Xt, check_finite=False)
    r = np.sqrt(1.0 - s)
    Ks = r[:, None] * Xt.T * r[None, :]
    return DiscretizedOperator(op.nodes, op.weights, Ks, op.exact, f"{op.name}^sigma", cond)


@dataclass(frozen=True)
class GeneratingFunctionalValue:
    value: float
    route: str
    diagnostics: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value


def pgf_deformed(op: DiscretizedOperator, sigma, h, route: str = "ratio") -> GeneratingFunctionalValue:
    """G^sigma[h] from the determinant ratio or from the deformed kernel."""
    s = op.values(sigma)
    hv = op.values(h)
    if np.any(hv < 0) or np.any(hv > 1):
        raise ValueError("h must take values in [0, 1]")
    g_sigma = fredholm_det(op, s)
    if not g_sigma > 0:
        raise IllPosedDeformationError(f"det(I - sigma K) = {g_sigma:.3e} is not positive")
    diag = {"g_sigma": g_sigma}
    if route == "ratio":
        value = fredholm_det(op, fused_symbol(s, hv)) / g_sigma
    elif route == "deformed-kernel":
        ks = deformed_kernel(op, s)
        value = fredholm_det(ks, hv)
        diag["condition"] = ks.condition
    else:
        raise ValueError(f"unknown route {route!r}")
    return GeneratingFunctionalValue(float(value), route, diag)
