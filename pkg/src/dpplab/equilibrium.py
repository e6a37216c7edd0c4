"""Discretized logarithmic-energy minimization on a uniform cell grid.

Measures are represented by cell masses ``p_i`` on cells of width ``h``
centred at the grid points.  The interaction between cells uses the exact
cell-averaged logarithmic kernel, so the self-interaction term is finite and
the discrete problem is a strictly convex QP over the simplex (optionally with
upper bounds).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import toeplitz

log = logging.getLogger(__name__)


class EquilibriumError(RuntimeError):
    """The energy minimization did not converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (KKT residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class QPSolution:
    masses: NDArray
    energy: float
    residual: float
    iterations: int
    multiplier: float


def _second_antiderivative_log(t: NDArray) -> NDArray:
    # G'' = log|t|, G(0) = 0
    t = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, 0.5 * t * t * np.log(t) - 0.75 * t * t, 0.0)
    return out


def log_interaction_matrix(m: int, h: float) -> NDArray:
    """Cell-averaged ``log 1/|x-y|`` between cells of width ``h``."""
    d = h * np.arange(m)
    G = _second_antiderivative_log
    row = -(G(d + h) - 2.0 * G(d) + G(d - h)) / (h * h)
    return toeplitz(row)


def project_capped_simplex(y: NDArray, upper: NDArray | None = None) -> NDArray:
    """Euclidean projection onto {p : sum p = 1, 0 <= p <= upper}."""
    cap = np.full_like(y, np.inf) if upper is None else upper
    if cap.sum() < 1.0:
        raise ValueError("upper bounds admit no probability vector")

    if upper is None:
        srt = np.sort(y)[::-1]
        css = np.cumsum(srt) - 1.0
        k = np.nonzero(srt - css / np.arange(1, y.size + 1) > 0)[0][-1]
        return np.maximum(y - css[k] / (k + 1), 0.0)

    def mass(lam):
        return np.clip(y - lam, 0.0, cap).sum()

    hi = float(y.max())
    lo = float(y.min()) - 1.0
    while mass(lo) < 1.0:
        lo -= 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, abs(lo)):
            break
    lam = 0.5 * (lo + hi)
    # exact multiplier for the active pattern found by bisection
    free = (y - lam > 0) & (y - lam < cap)
    if np.any(free):
        capped = y - lam >= cap
        lam = (y[free].sum() + cap[capped].sum() - 1.0) / np.count_nonzero(free)
    return np.clip(y - lam, 0.0, cap)


def kkt_residual(p: NDArray, grad: NDArray, upper: NDArray | None = None, tol: float = 1e-14) -> tuple[float, float]:
    """Max violation of the variational inequality, and the multiplier."""
    cap = np.full_like(p, np.inf) if upper is None else upper
    tol = tol * p.max()
    free = (p > tol) & (p < cap - tol)
    if np.any(free):
        lam = float(np.median(grad[free]))
        res_free = np.abs(grad[free] - lam).max()
    else:
        lam = float(grad[p > tol].max())
        res_free = 0.0
    zero = p <= tol
    full = p >= cap - tol
    res_zero = np.maximum(lam - grad[zero], 0.0).max(initial=0.0)
    res_full = np.maximum(grad[full] - lam, 0.0).max(initial=0.0)
    return float(max(res_free, res_zero, res_full)), lam


def minimize_energy(
    interaction: NDArray,
    external: NDArray,
    upper: NDArray | None = None,
    p0: NDArray | None = None,
    rtol: float = 1e-10,
    max_iter: int = 100_000,
    kkt_tol: float = 1e-6,
) -> QPSolution:
    """Minimize ``p^T A p + f^T p`` over the (capped) probability simplex.

    Accelerated projected gradient with Armijo backtracking on the step size;
    momentum restarts whenever the energy increases.
    """
    m = external.size
    if upper is not None and upper.sum() < 1.0:
        raise ValueError("upper bounds admit no probability vector")

    # A @ iterate is carried along so each trial step costs one product
    p = project_capped_simplex(np.full(m, 1.0 / m) if p0 is None else p0, upper)
    Ap = interaction @ p
    e = float(p @ Ap + external @ p)
    step = 1.0 / (2.0 * np.abs(interaction).sum(axis=1).max())
    y, Ay, t = p, Ap, 1.0
    for it in range(1, max_iter + 1):
        gy = 2.0 * Ay + external
        ey = float(y @ Ay + external @ y)
        while True:
            cand = project_capped_simplex(y - step * gy, upper)
            Ac = interaction @ cand
            diff = cand - y
            ec = float(cand @ Ac + external @ cand)
            if ec <= ey + gy @ diff + 0.5 / step * (diff @ diff) + 1e-15 * abs(ey):
                break
            step *= 0.5
        if ec > e:  # restart momentum
            y, Ay, t = p, Ap, 1.0
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        y = cand + mom * (cand - p)
        Ay = Ac + mom * (Ac - Ap)
        change = abs(e - ec) / max(abs(ec), 1e-300)
        p, Ap, e, t = cand, Ac, ec, t_next
        step *= 1.05
        if change < rtol and it > 10:
            res, lam = kkt_residual(p, 2.0 * Ap + external, upper)
            if res < kkt_tol:
                log.debug("energy QP converged in %d iterations, residual %.2e", it, res)
                return QPSolution(p, e, res, it, lam)
    res, lam = kkt_residual(p, 2.0 * Ap + external, upper)
    if res < kkt_tol:
        return QPSolution(p, e, res, max_iter, lam)
    raise EquilibriumError(f"no convergence after {max_iter} iterations", res)
