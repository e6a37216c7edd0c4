"""Airy function Ai and its derivative.

Small arguments use the Maclaurin series summed in extended-precision decimal
arithmetic (the two series cancel catastrophically for |x| of a few units, so
double precision is not enough).  Large arguments use the standard asymptotic
expansions, optimally truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Ai(0) and -Ai'(0) to 50 digits
_AI0 = Decimal("0.35502805388781723926006318600418317639797917419918")
_MAIP0 = Decimal("0.25881940379280679840518356018920396347909113835493")

SERIES_CUTOFF = 8.0
MIN_ARGUMENT = -1.0e3


class AiryRangeError(ValueError):
    """Argument lies outside the validated evaluation range."""


@dataclass(frozen=True)
class AiryValue:
    ai: float
    ai_prime: float
    argument: float


def airy_series(x: float) -> tuple[float, float]:
    """(Ai(x), Ai'(x)) from the Maclaurin series, any moderate x."""
    digits = 34 + int(math.ceil(0.58 * abs(x) ** 1.5))
    with localcontext() as ctx:
        ctx.prec = digits
        X = Decimal(float(x))
        x3 = X * X * X
        eps = Decimal(10) ** (-digits)
        f = t = Decimal(1)  # 1 + x^3/3! + 1*4 x^6/6! + ...
        g = s = X  # x + 2 x^4/4! + ...
        fp = Decimal(0)
        tp = X * X / 2  # derivative terms of f, starting at k=1
        gp = sp = Decimal(1)
        k = 1
        while True:
            t = t * x3 / ((3 * k) * (3 * k - 1))
            s = s * x3 / ((3 * k) * (3 * k + 1))
            if k > 1:
                tp = tp * x3 / ((3 * k - 3) * (3 * k - 1))
            sp = sp * x3 / ((3 * k) * (3 * k - 2))
            f += t
            g += s
            fp += tp
            gp += sp
            scale = abs(f) + abs(g) + abs(fp) + abs(gp)
            if max(abs(t), abs(s), abs(tp), abs(sp)) < eps * scale and k > 2:
                break
            k += 1
        ai = _AI0 * f - _MAIP0 * g
        aip = _AI0 * fp - _MAIP0 * gp
        return float(ai), float(aip)


def _asymptotic_coefficients(zeta: float, kmax: int = 400) -> tuple[list[float], list[float]]:
    """u_k and v_k coefficients, truncated once u_k/zeta^k starts growing."""
    u = [1.0]
    v = [1.0]
    mag = 1.0
    for k in range(1, kmax):
        uk = u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        term = mag * uk / (u[-1] * zeta)
        if term > mag or term < 1e-18:
            break
        mag = term
        u.append(uk)
        v.append(-(6 * k + 1) / (6 * k - 1) * uk)
    return u, v


def airy_asymptotic(x: float) -> tuple[float, float]:
    """(Ai(x), Ai'(x)) from the large-|x| expansions."""
    if x == 0:
        raise AiryRangeError("asymptotic expansion undefined at 0")
    y = abs(x)
    zeta = 2.0 / 3.0 * y**1.5
    u, v = _asymptotic_coefficients(zeta)
    if x > 0:
        m = len(u)
        su = sum((-1) ** k * u[k] / zeta**k for k in range(m))
        sv = sum((-1) ** k * v[k] / zeta**k for k in range(m))
        # half of the first omitted term (alternating series terminant)
        uk = u[-1] * (6 * m - 5) * (6 * m - 3) * (6 * m - 1) / ((2 * m - 1) * 216 * m)
        vk = -(6 * m + 1) / (6 * m - 1) * uk
        su += 0.5 * (-1) ** m * uk / zeta**m
        sv += 0.5 * (-1) ** m * vk / zeta**m
        pref = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
        return pref * su / y**0.25, -pref * y**0.25 * sv
    m = len(u)
    pe = sum((-1) ** (k // 2) * u[k] / zeta**k for k in range(0, m, 2))
    po = sum((-1) ** (k // 2) * u[k] / zeta**k for k in range(1, m, 2))
    qe = sum((-1) ** (k // 2) * v[k] / zeta**k for k in range(0, m, 2))
    qo = sum((-1) ** (k // 2) * v[k] / zeta**k for k in range(1, m, 2))
    c = math.cos(zeta - math.pi / 4)
    s = math.sin(zeta - math.pi / 4)
    ai = (c * pe + s * po) / (math.sqrt(math.pi) * y**0.25)
    aip = y**0.25 * (s * qe - c * qo) / math.sqrt(math.pi)
    return ai, aip


def airy_ai(x: float) -> AiryValue:
    """Ai(x) and Ai'(x).

    Relative error is below 1e-12 on |x| <= 12 (away from the zeros of Ai on
    the negative axis, where the error is relative to the oscillation
    envelope).
    """
    x = float(x)
    if not math.isfinite(x):
        raise AiryRangeError(f"non-finite argument {x}")
    if x < MIN_ARGUMENT:
        raise AiryRangeError(f"x={x} is below the validated range [{MIN_ARGUMENT}, inf)")
    if abs(x) <= SERIES_CUTOFF:
        ai, aip = airy_series(x)
    else:
        ai, aip = airy_asymptotic(x)
    return AiryValue(ai, aip, x)


def airy_arrays(x: ArrayLike) -> tuple[NDArray, NDArray]:
    """Vectorized (Ai, Ai') over an array of arguments."""
    xs = np.asarray(x, dtype=float)
    ai = np.empty(xs.shape)
    aip = np.empty(xs.shape)
    for idx, val in np.ndenumerate(xs):
        a = airy_ai(val)
        ai[idx] = a.ai
        aip[idx] = a.ai_prime
    return ai, aip
