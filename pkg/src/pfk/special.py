"""Gamma function and Bessel-function zeros."""
from __future__ import annotations

import math
from decimal import Decimal, localcontext

from .errors import InvalidInputError

__all__ = ["gamma_fn", "bessel_j", "bessel_zero"]

# Lanczos approximation, g = 7, nine coefficients
_G = 7
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x):
    """Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise InvalidInputError(f"gamma_fn is defined here for x > 0 only, got {x!r}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    if x == int(x) and x <= 23:
        return float(math.factorial(int(x) - 1))
    z = x - 1.0
    s = _LANCZOS[0]
    for k in range(1, len(_LANCZOS)):
        s += _LANCZOS[k] / (z + k)
    t = z + _G + 0.5
    # split the power to postpone overflow
    half = t ** (0.5 * (z + 0.5))
    return math.sqrt(2 * math.pi) * half * (half * math.exp(-t)) * s


def _series_core(nu, x, digits=60):
    """``sum_m (-x^2/4)^m / (m! (nu+1)_m)``, the sign-carrying factor of J_nu."""
    with localcontext() as ctx:
        ctx.prec = digits
        q = Decimal(repr(x)) ** 2 / 4
        a = Decimal(repr(float(nu))) + 1
        term = Decimal(1)
        total = Decimal(1)
        m = 0
        eps = Decimal(10) ** (-(digits - 5))
        while True:
            m += 1
            term = -term * q / (m * (a + m - 1))
            total += term
            if m > x and abs(term) <= eps * max(abs(total), eps):
                break
        return float(total)


def bessel_j(nu, x):
    """J_nu(x) for ``nu >= 0`` and ``x >= 0`` from the ascending series."""
    if nu < 0 or x < 0:
        raise InvalidInputError("bessel_j needs nu >= 0 and x >= 0")
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    return (0.5 * x) ** nu / gamma_fn(nu + 1.0) * _series_core(nu, x)


def bessel_zero(nu, k, tol=1e-12):
    """k-th positive zero of J_nu by sign bracketing and bisection."""
    if nu < 0:
        raise InvalidInputError(f"order must be nonnegative, got {nu!r}")
    if int(k) != k or k < 1:
        raise InvalidInputError(f"zero index must be a positive integer, got {k!r}")
    k = int(k)
    # consecutive zeros are more than 2 apart for nu >= 0
    step = 0.5
    lo = max(nu, 1e-3)
    flo = _series_core(nu, lo)
    found = 0
    while True:
        hi = lo + step
        fhi = _series_core(nu, hi)
        if flo == 0.0:
            found += 1
            if found == k:
                return lo
        elif (flo < 0) != (fhi < 0) and fhi != 0.0:
            found += 1
            if found == k:
                break
        lo, flo = hi, fhi
    a, b, fa = lo, hi, flo
    while b - a > tol * max(1.0, a):
        mid = 0.5 * (a + b)
        fm = _series_core(nu, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)
