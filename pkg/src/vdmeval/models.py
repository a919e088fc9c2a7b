"""The eight vulnerability discovery models (VDMs).

Each model is a parametric curve Omega(t) giving the cumulative number of
vulnerabilities ``t`` months after a release:

======  ==========================================================
AML     B / (B C exp(-A B t) + 1)
AT      s ln(t) + C            (s is the k/gamma ratio)
JW      gamma (1 - exp(-(t / beta)^alpha))
LN      A t + B
LP      beta0 ln(1 + beta1 t)
RE      N (1 - exp(-lambda t))
RQ      A t^2 / 2 + B t
YF      gamma/2 [erf((t - tau)/(sigma sqrt2)) + erf((t + tau)/(sigma sqrt2))]
======  ==========================================================
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import erf as _erf

from .errors import ConstraintError, DomainError, SampleTooShortError
from .special import erf

__all__ = [
    "ModelId",
    "ParamVector",
    "PARAM_NAMES",
    "POSITIVE",
    "evaluate",
    "gradient",
    "initial_guess",
    "erf",
    "MIN_POINTS",
]

MIN_POINTS = 5
_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)


class ModelId(str, Enum):
    AML = "AML"
    AT = "AT"
    JW = "JW"
    LN = "LN"
    LP = "LP"
    RE = "RE"
    RQ = "RQ"
    YF = "YF"

    def __str__(self):
        return self.value

    @property
    def arity(self) -> int:
        return len(PARAM_NAMES[self])

    @property
    def s_shaped(self) -> bool:
        return self in (ModelId.AML, ModelId.JW, ModelId.YF)


PARAM_NAMES: dict[ModelId, tuple[str, ...]] = {
    ModelId.AML: ("A", "B", "C"),
    ModelId.AT: ("slope", "C"),
    ModelId.JW: ("gamma", "beta", "alpha"),
    ModelId.LN: ("A", "B"),
    ModelId.LP: ("beta0", "beta1"),
    ModelId.RE: ("N", "lambda"),
    ModelId.RQ: ("A", "B"),
    ModelId.YF: ("gamma", "tau", "sigma"),
}

# per-parameter constraint: True = strictly positive, None = >= 0, False = free
POSITIVE: dict[ModelId, tuple] = {
    ModelId.AML: (True, True, True),
    ModelId.AT: (False, False),
    ModelId.JW: (True, True, True),
    ModelId.LN: (False, False),
    ModelId.LP: (True, True),
    ModelId.RE: (True, True),
    ModelId.RQ: (False, False),
    ModelId.YF: (True, None, True),
}


@dataclass(frozen=True)
class ParamVector:
    """Parameter values of one model, validated at construction."""

    model: ModelId
    values: tuple[float, ...]

    def __post_init__(self):
        model = ModelId(self.model)
        object.__setattr__(self, "model", model)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) != model.arity:
            raise ConstraintError(
                f"{model} takes {model.arity} parameters, got {len(values)}")
        for name, v, rule in zip(PARAM_NAMES[model], values, POSITIVE[model]):
            if not math.isfinite(v):
                raise ConstraintError(f"{model}.{name} is not finite: {v}")
            if rule is True and not v > 0:
                raise ConstraintError(f"{model}.{name} must be > 0, got {v}")
            if rule is None and v < 0:
                raise ConstraintError(f"{model}.{name} must be >= 0, got {v}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES[self.model], self.values))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


# Raw kernels: no validation, used directly by the fitter.

def _omega(model: ModelId, p, t):
    if model is ModelId.AML:
        a, b, c = p
        return b / (b * c * np.exp(-a * b * t) + 1.0)
    if model is ModelId.AT:
        s, c = p
        return s * np.log(t) + c
    if model is ModelId.JW:
        g, beta, alpha = p
        return g * -np.expm1(-((t / beta) ** alpha))
    if model is ModelId.LN:
        a, b = p
        return a * t + b
    if model is ModelId.LP:
        b0, b1 = p
        return b0 * np.log1p(b1 * t)
    if model is ModelId.RE:
        n, lam = p
        return n * -np.expm1(-lam * t)
    if model is ModelId.RQ:
        a, b = p
        return 0.5 * a * t * t + b * t
    if model is ModelId.YF:
        g, tau, sigma = p
        scale = sigma * _SQRT2
        return 0.5 * g * (_erf((t - tau) / scale) + _erf((t + tau) / scale))
    raise ValueError(f"unknown model {model!r}")


def _jacobian(model: ModelId, p, t):
    """d Omega / d param, shape (len(t), arity)."""
    t = np.asarray(t, dtype=float)
    if model is ModelId.AML:
        a, b, c = p
        e = np.exp(-a * b * t)
        d = b * c * e + 1.0
        d2 = d * d
        return np.stack([
            b ** 3 * c * t * e / d2,
            1.0 / d - b * c * e * (1.0 - a * b * t) / d2,
            -(b * b) * e / d2,
        ], axis=-1)
    if model is ModelId.AT:
        return np.stack([np.log(t), np.ones_like(t)], axis=-1)
    if model is ModelId.JW:
        g, beta, alpha = p
        ratio = t / beta
        u = ratio ** alpha
        eu = np.exp(-u)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where(ratio > 0, np.log(np.where(ratio > 0, ratio, 1.0)), 0.0)
        return np.stack([
            -np.expm1(-u),
            -g * eu * u * alpha / beta,
            g * eu * u * lr,
        ], axis=-1)
    if model is ModelId.LN:
        return np.stack([t, np.ones_like(t)], axis=-1)
    if model is ModelId.LP:
        b0, b1 = p
        return np.stack([np.log1p(b1 * t), b0 * t / (1.0 + b1 * t)], axis=-1)
    if model is ModelId.RE:
        n, lam = p
        e = np.exp(-lam * t)
        return np.stack([-np.expm1(-lam * t), n * t * e], axis=-1)
    if model is ModelId.RQ:
        return np.stack([0.5 * t * t, t], axis=-1)
    if model is ModelId.YF:
        g, tau, sigma = p
        scale = sigma * _SQRT2
        zm = (t - tau) / scale
        zp = (t + tau) / scale
        gm = np.exp(-zm * zm)
        gp = np.exp(-zp * zp)
        k = 0.5 * g * _TWO_OVER_SQRTPI
        return np.stack([
            0.5 * (_erf(zm) + _erf(zp)),
            k * (gp - gm) / scale,
            -k * (gm * zm + gp * zp) / sigma,
        ], axis=-1)
    raise ValueError(f"unknown model {model!r}")


def _check_t(model: ModelId, t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("t must be finite")
    if np.any(arr < 0):
        raise DomainError(f"t must be >= 0 for {model}")
    if model is ModelId.AT and np.any(arr <= 0):
        raise DomainError("AT is undefined at t <= 0 (ln t)")
    return arr


def _coerce(params) -> ParamVector:
    if not isinstance(params, ParamVector):
        raise ConstraintError(f"expected ParamVector, got {type(params).__name__}")
    return params


def evaluate(params: ParamVector, t):
    """Expected cumulative vulnerabilities at month(s) ``t``."""
    params = _coerce(params)
    arr = _check_t(params.model, t)
    out = _omega(params.model, params.values, arr)
    return float(out) if np.ndim(out) == 0 else out


def gradient(params: ParamVector, t):
    """Analytic partial derivatives of Omega with respect to each parameter.

    Scalar ``t`` gives a vector of length arity; array ``t`` gives an
    array of shape ``(len(t), arity)``.
    """
    params = _coerce(params)
    arr = _check_t(params.model, t)
    jac = _jacobian(params.model, params.values, np.atleast_1d(arr))
    return jac[0] if arr.ndim == 0 else jac


def _counts_of(sample) -> np.ndarray:
    counts = getattr(sample, "counts", sample)
    return np.asarray(counts, dtype=float)


def initial_guess(model: ModelId, sample) -> ParamVector:
    """Heuristic starting point for the fitter.

    ``sample`` is an ObservedSample or a plain sequence of cumulative counts
    for months 1..n.
    """
    model = ModelId(model)
    y = _counts_of(sample)
    n = len(y)
    if n < MIN_POINTS:
        raise SampleTooShortError(
            f"need at least {MIN_POINTS} data points, got {n}")
    t = np.arange(1, n + 1, dtype=float)
    first, last = float(y[0]), float(y[-1])
    top = max(last, 1.0)
    # rate used wherever the first month carries no information
    rate = max(top / n, 1e-3)

    if model is ModelId.LN:
        a = (last - first) / (n - 1)
        return ParamVector(model, (a, first - a))
    if model is ModelId.AT:
        s = (last - first) / math.log(n)
        return ParamVector(model, (s, first))
    if model is ModelId.RQ:
        b = first
        a = 2.0 * (last - b * n) / (n * n)
        return ParamVector(model, (a, b))
    if model is ModelId.RE:
        big_n = top * 1.1
        y1 = first if first > 0 else rate
        lam = -math.log1p(-min(y1, 0.99 * big_n) / big_n)
        return ParamVector(model, (big_n, lam))
    if model is ModelId.AML:
        return _aml_guess(y, top)
    if model is ModelId.JW:
        return _jw_guess(y, t, top)
    if model is ModelId.LP:
        return _lp_guess(y, t)
    if model is ModelId.YF:
        g = 1.1 * top
        half = int(np.searchsorted(y, 0.5 * last)) + 1
        tau = max(half - 1.0, 0.0) / 2.0
        sigma = max(half / 2.0, 1.0)
        return ParamVector(model, (g, tau, sigma))
    raise ValueError(f"unknown model {model!r}")


def _aml_guess(y: np.ndarray, top: float) -> ParamVector:
    n = len(y)
    b = 1.1 * top
    mid = (n + 1) // 2
    y1 = min(max(float(y[0]), 0.5), 0.95 * b)
    ym = min(max(float(y[mid - 1]), y1), 0.99 * b)
    # logistic inversion: ln(B/Omega - 1) = ln(BC) - AB t
    l1 = math.log(b / y1 - 1.0)
    lm = math.log(b / ym - 1.0)
    ab = (l1 - lm) / (mid - 1) if mid > 1 else 0.0
    if not ab > 0:
        ab = 1.0 / n
    bc = math.exp(l1 + ab)
    return ParamVector(ModelId.AML, (ab / b, b, bc / b))


def _jw_guess(y: np.ndarray, t: np.ndarray, top: float) -> ParamVector:
    g = 1.1 * top
    mask = (y > 0) & (y < g)
    alpha, beta = 1.0, float(len(y))
    if mask.sum() >= 2:
        xs = np.log(t[mask])
        zs = np.log(-np.log1p(-y[mask] / g))
        slope, icept = np.polyfit(xs, zs, 1)
        if slope > 0 and np.isfinite(icept):
            alpha = float(slope)
            beta = float(math.exp(-icept / slope))
    if not (math.isfinite(beta) and beta > 0):
        beta = float(len(y))
    return ParamVector(ModelId.JW, (g, beta, alpha))


def _lp_guess(y: np.ndarray, t: np.ndarray) -> ParamVector:
    best = None
    for b1 in np.logspace(-3, 2, 26):
        basis = np.log1p(b1 * t)
        b0 = float(basis @ y / (basis @ basis))
        if b0 <= 0:
            continue
        rss = float(np.sum((y - b0 * basis) ** 2))
        if best is None or rss < best[0]:
            best = (rss, b0, float(b1))
    if best is None:
        return ParamVector(ModelId.LP, (1.0, 0.1))
    return ParamVector(ModelId.LP, (best[1], best[2]))


def is_admissible(model: ModelId, values: Sequence[float]) -> bool:
    try:
        ParamVector(model, tuple(values))
    except ConstraintError:
        return False
    return True
