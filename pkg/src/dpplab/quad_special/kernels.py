"""Reference measures, kernel fields and the universal limit kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .airy import airy_ai, airy_arrays

# pairs closer than this use the Taylor form of the Airy kernel
_AIRY_TAYLOR_GAP = 1e-5


@dataclass(frozen=True)
class ReferenceMeasure:
    """Lebesgue-type density on an interval, or counting measure on nodes.

    ``scale`` optionally records the microscopic map x(u) = x_star + u/(c n^gamma)
    as a dict with keys ``x_star``, ``c``, ``gamma``, ``n``.
    """

    kind: str
    support: tuple[float, float] = (-np.inf, np.inf)
    density: Optional[Callable[[NDArray], NDArray]] = None
    nodes: Optional[NDArray] = None
    scale: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("continuous", "counting"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "counting":
            nodes = np.array(self.nodes, dtype=float)
            if nodes.ndim != 1 or nodes.size == 0:
                raise ValueError("counting measure needs a non-empty node list")
            if np.any(np.diff(nodes) <= 0):
                raise ValueError("counting-measure nodes must be strictly increasing")
            nodes.setflags(write=False)
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "support", (float(nodes[0]), float(nodes[-1])))

    @classmethod
    def lebesgue(cls, support=(-np.inf, np.inf), **scale) -> "ReferenceMeasure":
        return cls("continuous", tuple(support), None, None, dict(scale))

    @classmethod
    def counting(cls, nodes: ArrayLike, **scale) -> "ReferenceMeasure":
        return cls("counting", nodes=np.asarray(nodes, dtype=float), scale=dict(scale))

    @property
    def is_counting(self) -> bool:
        return self.kind == "counting"

    def density_at(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        if self.density is None:
            inside = (x >= self.support[0]) & (x <= self.support[1])
            return inside.astype(float)
        return np.asarray(self.density(x), dtype=float)

    def nodes_in(self, a: float, b: float) -> NDArray:
        """Counting-measure nodes inside the open window (a, b)."""
        if not self.is_counting:
            raise TypeError("nodes_in is only defined for counting measures")
        sel = (self.nodes > a) & (self.nodes < b)
        return self.nodes[sel]


@dataclass(frozen=True)
class KernelField:
    """A two-point kernel K(u, v) together with its reference measure.

    ``pointwise`` must broadcast over array arguments.  ``on_nodes`` optionally
    builds the full matrix K(u_i, u_j) faster than broadcasting.  ``factor``,
    for finite-rank kernels, returns F(u) of shape (len(u), rank) with
    K(u, v) = F(u) F(v)^T.
    """

    pointwise: Callable[[NDArray, NDArray], NDArray]
    measure: ReferenceMeasure
    name: str = "kernel"
    on_nodes: Optional[Callable[[NDArray], NDArray]] = None
    rank: Optional[int] = None
    symmetric: bool = True
    factor: Optional[Callable[[NDArray], NDArray]] = None

    def __call__(self, u, v):
        out = self.pointwise(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def matrix(self, nodes: ArrayLike) -> NDArray:
        nodes = np.asarray(nodes, dtype=float)
        if self.on_nodes is not None:
            return self.on_nodes(nodes)
        return np.asarray(self.pointwise(nodes[:, None], nodes[None, :]), dtype=float)

    def diagonal(self, nodes: ArrayLike) -> NDArray:
        nodes = np.asarray(nodes, dtype=float)
        return np.asarray(self.pointwise(nodes, nodes), dtype=float)


def sine_kernel(u, v):
    """sin(pi(u-v)) / (pi(u-v)), equal to 1 on the diagonal."""
    return np.sinc(np.subtract(u, v))


def _airy_kernel_from_values(u, v, au, apu, av, apv):
    d = u - v
    near = np.abs(d) < _AIRY_TAYLOR_GAP
    safe = np.where(near, 1.0, d)
    quotient = (au * apv - av * apu) / safe
    # expansion about u in powers of delta = v - u, using Ai'' = x Ai
    delta = -d
    taylor = (apu**2 - u * au**2 - 0.5 * delta * au**2
              - delta**2 / 6.0 * (au * apu + u**2 * au**2 - u * apu**2))
    return np.where(near, taylor, quotient)


def airy_kernel(u: float, v: float) -> float:
    """(Ai(u)Ai'(v) - Ai(v)Ai'(u)) / (u - v); Ai'(u)^2 - u Ai(u)^2 on the diagonal."""
    a = airy_ai(u)
    b = a if v == u else airy_ai(v)
    return float(_airy_kernel_from_values(float(u), float(v), a.ai, a.ai_prime, b.ai, b.ai_prime))


def airy_kernel_matrix(nodes: ArrayLike) -> NDArray:
    x = np.asarray(nodes, dtype=float)
    ai, aip = airy_arrays(x)
    return _airy_kernel_from_values(x[:, None], x[None, :], ai[:, None], aip[:, None], ai[None, :], aip[None, :])


def _airy_pointwise(u, v):
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    au, apu = airy_arrays(u)
    av, apv = airy_arrays(v)
    return _airy_kernel_from_values(u, v, au, apu, av, apv)


def discrete_sine_kernel(u, v, beta: float, kappa: float, rho_star: float):
    """(beta kappa / rho_star) * sine_kernel(u, v)."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if kappa <= 0 or rho_star <= 0:
        raise ValueError("kappa and rho_star must be positive")
    return beta * kappa / rho_star * sine_kernel(u, v)


def sine_field() -> KernelField:
    return KernelField(sine_kernel, ReferenceMeasure.lebesgue(), name="sine")


def airy_field() -> KernelField:
    return KernelField(_airy_pointwise, ReferenceMeasure.lebesgue(), name="airy", on_nodes=airy_kernel_matrix)


def discrete_sine_field(beta: float, kappa: float, rho_star: float, lattice: ArrayLike) -> KernelField:
    """Discrete sine kernel acting on the counting measure of ``lattice``."""
    discrete_sine_kernel(0.0, 0.0, beta, kappa, rho_star)  # parameter validation

    def pointwise(u, v):
        return discrete_sine_kernel(u, v, beta, kappa, rho_star)

    measure = ReferenceMeasure.counting(lattice, beta=beta, kappa=kappa, rho_star=rho_star)
    return KernelField(pointwise, measure, name="discrete-sine")


def zero_field(measure: ReferenceMeasure | None = None) -> KernelField:
    def pointwise(u, v):
        return np.zeros(np.broadcast(u, v).shape)

    return KernelField(pointwise, measure or ReferenceMeasure.lebesgue(), name="zero", rank=0)
