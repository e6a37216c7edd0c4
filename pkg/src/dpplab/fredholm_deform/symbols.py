"""Deformation symbols sigma: R -> [0, 1] and test functions h."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

_INF = math.inf


def _interval(a: float, b: float) -> tuple[float, float]:
    if not a < b:
        raise ValueError(f"empty interval ({a}, {b})")
    return float(a), float(b)


class DeformationSymbol:
    """Base class. Subclasses implement ``_eval`` returning values in [0, 1]."""

    family = "abstract"
    jumps: tuple[float, ...] = ()
    kinks: tuple[float, ...] = ()

    def __call__(self, u: ArrayLike) -> NDArray:
        u = np.asarray(u, dtype=float)
        out = np.clip(np.asarray(self._eval(u), dtype=float) * np.ones_like(u), 0.0, 1.0)
        return out

    def _eval(self, u: NDArray) -> NDArray:
        raise NotImplementedError

    def effective_support(self, tol: float = 1e-17) -> tuple[float, float]:
        """Smallest interval outside which sigma < tol (may be infinite)."""
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(p for p in self.jumps + self.kinks if math.isfinite(p))))

    def as_f(self, u: ArrayLike) -> NDArray:
        """f = -log(1 - sigma), +inf where sigma = 1."""
        with np.errstate(divide="ignore"):
            return -np.log1p(-self(u))


@dataclass(frozen=True)
class Zero(DeformationSymbol):
    family = "zero"

    def _eval(self, u):
        return np.zeros_like(u)

    def effective_support(self, tol=1e-17):
        return (0.0, 0.0)


@dataclass(frozen=True)
class ThinnedIndicator(DeformationSymbol):
    """gamma * 1_{(a, b)}; a may be -inf and b may be +inf."""

    gamma: float
    a: float
    b: float
    family = "thinned"

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        _interval(self.a, self.b)

    @property
    def jumps(self):
        return (self.a, self.b)

    def _eval(self, u):
        return self.gamma * ((u > self.a) & (u < self.b))

    def effective_support(self, tol=1e-17):
        return (self.a, self.b) if self.gamma >= tol else (0.0, 0.0)


def Indicator(a: float, b: float) -> ThinnedIndicator:
    """Hard exclusion 1_{(a, b)}."""
    sym = ThinnedIndicator(1.0, a, b)
    object.__setattr__(sym, "family", "indicator")
    return sym


@dataclass(frozen=True)
class Fermi(DeformationSymbol):
    """Fermi factor.

    ``profile="one-sided"``: 1/(1 + exp(-t u - s)), tending to 1 as u -> +inf.
    ``profile="even"``: 1/(1 + exp(t|u| - s)), decaying on both sides.
    """

    t: float
    s: float = 0.0
    profile: str = "one-sided"
    family = "fermi"

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"Fermi steepness t must be positive, got {self.t}")
        if self.profile not in ("one-sided", "even"):
            raise ValueError(f"unknown Fermi profile {self.profile!r}")

    @property
    def kinks(self):
        return (0.0,) if self.profile == "even" else ()

    def _eval(self, u):
        arg = -self.t * u - self.s if self.profile == "one-sided" else self.t * np.abs(u) - self.s
        return 0.5 * (1.0 - np.tanh(0.5 * arg))

    def effective_support(self, tol=1e-17):
        reach = (self.s - math.log(tol)) / self.t
        if self.profile == "even":
            return (-reach, reach)
        return ((math.log(tol) - self.s) / self.t, _INF)


@dataclass(frozen=True)
class OneMinusExpF(DeformationSymbol):
    """1 - exp(-f(u)) for a nonnegative f.

    ``support`` declares where f may be nonzero (None for unbounded).
    """

    f: Callable[[NDArray], NDArray]
    support: Optional[tuple[float, float]] = None
    name: str = "f"
    jumps: tuple[float, ...] = ()
    kinks: tuple[float, ...] = ()
    family = "one-minus-exp"

    def __post_init__(self):
        lo, hi = self.support if self.support is not None else (-50.0, 50.0)
        lo, hi = max(lo, -1e3), min(hi, 1e3)
        probe = np.asarray(self.f(np.linspace(lo, hi, 1001)), dtype=float)
        if np.any(probe < 0):
            raise ValueError("f must be nonnegative")

    def _eval(self, u):
        vals = np.asarray(self.f(u), dtype=float) * np.ones_like(u)
        if self.support is not None:
            vals = np.where((u >= self.support[0]) & (u <= self.support[1]), vals, 0.0)
        return -np.expm1(-vals)

    def effective_support(self, tol=1e-17):
        return self.support if self.support is not None else (-_INF, _INF)


@dataclass(frozen=True)
class ScaledSymbol(DeformationSymbol):
    """sigma_n(u) = sigma(factor * u)."""

    base: DeformationSymbol
    factor: float
    family = "scaled"

    def _eval(self, u):
        return self.base(self.factor * u)

    @property
    def jumps(self):
        return tuple(p / self.factor for p in self.base.jumps)

    @property
    def kinks(self):
        return tuple(p / self.factor for p in self.base.kinks)

    def effective_support(self, tol=1e-17):
        lo, hi = self.base.effective_support(tol)
        return (lo / self.factor, hi / self.factor)


def bump_f(height: float, a: float, b: float) -> Callable[[NDArray], NDArray]:
    """C^2 bump ``height * (1 - y^2)^3`` on (a, b), y the affine coordinate in [-1, 1]."""

    def f(u):
        y = (2.0 * np.asarray(u, dtype=float) - a - b) / (b - a)
        return np.where(np.abs(y) < 1, height * (1.0 - y * y) ** 3, 0.0)

    return f


def make_sigma_n(symbol: DeformationSymbol, n: int, t: float) -> DeformationSymbol:
    """sigma_n(u) = sigma(n^t u), i.e. 1 - exp(-f(n^t u)) with f = -log(1 - sigma)."""
    if t < 0:
        raise ValueError(f"sub-microscopic exponent t must be >= 0, got {t}")
    if isinstance(symbol, OneMinusExpF):
        symbol.__post_init__()
    if t == 0 or isinstance(symbol, Zero):
        return symbol
    return ScaledSymbol(symbol, float(n) ** t)


def fused_symbol(sigma: NDArray, h: NDArray) -> NDArray:
    """sigma + h - sigma h, evaluated as 1 - (1 - sigma)(1 - h) so it stays in [0, 1]."""
    return 1.0 - (1.0 - np.asarray(sigma)) * (1.0 - np.asarray(h))


@dataclass(frozen=True)
class TestFunction:
    """h: R -> [0, 1) with bounded support.

    ``outside_hypotheses`` marks discontinuous choices (plain indicators).
    """

    h: Callable[[NDArray], NDArray]
    support: tuple[float, float]
    name: str = "h"
    breakpoints: tuple[float, ...] = field(default=())
    outside_hypotheses: bool = False

    __test__ = False  # not a pytest class

    def __call__(self, u: ArrayLike) -> NDArray:
        u = np.asarray(u, dtype=float)
        vals = np.asarray(self.h(u), dtype=float) * np.ones_like(u)
        return np.where((u >= self.support[0]) & (u <= self.support[1]), vals, 0.0)

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(lambda u: self.h(np.asarray(u) * factor), (self.support[0] / factor, self.support[1] / factor),
                            f"{self.name}@{factor:g}", tuple(p / factor for p in self.breakpoints), self.outside_hypotheses)


def bump(height: float, a: float, b: float) -> TestFunction:
    if not 0 <= height < 1:
        raise ValueError("test functions need 0 <= sup h < 1")
    _interval(a, b)
    return TestFunction(bump_f(height, a, b), (a, b), f"bump({height:g},{a:g},{b:g})", (a, b))


def softened_indicator(height: float, a: float, b: float, width: float) -> TestFunction:
    """height on [a + width, b - width], linear ramps to zero at a and b."""
    if not 0 <= height < 1:
        raise ValueError("test functions need 0 <= sup h < 1")
    _interval(a, b)
    if not 0 < width <= 0.5 * (b - a):
        raise ValueError("ramp width must lie in (0, (b - a)/2]")

    def h(u):
        ramp = np.minimum((u - a) / width, (b - u) / width)
        return height * np.clip(ramp, 0.0, 1.0)

    return TestFunction(h, (a, b), f"soft({height:g},{a:g},{b:g})", (a, a + width, b - width, b))


def indicator_h(height: float, a: float, b: float) -> TestFunction:
    """Plain (discontinuous) scaled indicator; outside the continuity hypothesis."""
    if not 0 <= height < 1:
        raise ValueError("test functions need 0 <= sup h < 1")
    _interval(a, b)
    return TestFunction(lambda u: height * ((u > a) & (u < b)), (a, b), f"ind({height:g},{a:g},{b:g})", (a, b), True)


def zero_h() -> TestFunction:
    return TestFunction(lambda u: np.zeros_like(np.asarray(u, dtype=float)), (0.0, 0.0), "zero")
