"""Gauss-Legendre rules and composite rules on piecewise intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

# default density of nodes per unit length for truncated supports
NODES_PER_UNIT = 200


def _frozen(a) -> NDArray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights approximating ``int_a^b f(x) dx``."""

    nodes: NDArray
    weights: NDArray
    interval: tuple[float, float]

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, f) -> float:
        """Apply the rule to a vectorized callable or to values on the nodes."""
        values = f(self.nodes) if callable(f) else np.asarray(f)
        return float(np.dot(self.weights, values))


def gauss_legendre(order: int, a: float, b: float) -> QuadratureRule:
    """Gauss-Legendre rule with ``order`` nodes on ``[a, b]``.

    Exact for polynomials of degree ``2*order - 1``.
    """
    if int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("gauss_legendre needs finite endpoints; truncate or map the interval first")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    t, w = np.polynomial.legendre.leggauss(int(order))
    half = 0.5 * (b - a)
    return QuadratureRule(a + half * (t + 1.0), half * w, (a, b))


def composite_gauss_legendre(
    breakpoints: Sequence[float],
    order: int | Sequence[int] | None = None,
    per_unit: float | None = None,
    min_order: int = 8,
) -> QuadratureRule:
    """Concatenate Gauss-Legendre rules over consecutive breakpoint pieces.

    Discontinuities of the integrand should sit on breakpoints; no node then
    lands on a jump.  Either give a fixed ``order`` (scalar or one per piece) or
    a node density ``per_unit`` scaled by piece length.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    pieces = list(zip(pts[:-1], pts[1:]))
    if order is None:
        density = NODES_PER_UNIT if per_unit is None else per_unit
        orders = [max(min_order, int(math.ceil(density * (b - a)))) for a, b in pieces]
    elif np.ndim(order) == 0:
        orders = [int(order)] * len(pieces)
    else:
        orders = [int(m) for m in order]
        if len(orders) != len(pieces):
            raise ValueError("one order per piece required")
    rules = [gauss_legendre(m, a, b) for m, (a, b) in zip(orders, pieces)]
    return QuadratureRule(
        np.concatenate([r.nodes for r in rules]),
        np.concatenate([r.weights for r in rules]),
        (pts[0], pts[-1]),
    )
