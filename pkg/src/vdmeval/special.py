"""Special functions: error function, regularized incomplete gamma, normal tail.

The regularized upper incomplete gamma function follows the classic
series / Lentz continued-fraction split (Numerical Recipes, ch. 6).
"""
import math
import sys

import numpy as np
from scipy import special as _sp

_EPS = 1e-16
_TINY = sys.float_info.min / sys.float_info.epsilon
_MAX_ITER = 10_000


def erf(x):
    """Error function, vectorized, with exact odd symmetry.

    Accepts a scalar or array; returns the same shape. Absolute error is at
    the level of double rounding (well under 1e-12) on the whole real line.
    """
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * _sp.erf(np.abs(x))
    return float(out) if out.ndim == 0 else out


def _gamma_series(a, x):
    # lower regularized P(a, x) by its power series; valid for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    # upper regularized Q(a, x) by modified Lentz; valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if not a > 0:
        raise ValueError(f"gammaincc requires a > 0, got {a}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"gammaincc requires x >= 0, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_series(a, x)))
    return min(1.0, max(0.0, _gamma_cfrac(a, x)))


def normal_sf(z: float) -> float:
    """Upper tail of the standard normal distribution."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))
