"""Pearson chi-square goodness of fit for fitted curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import ObservedSample, SampleKey
from .errors import DomainError, UntestableError
from .fitting import FittedCurve
from .models import _omega
from .special import gammaincc

GOOD_FIT_P = 0.80
NOT_FIT_P = 0.05
MIN_EXPECTED = 5.0


class FitClass(str, Enum):
    GOOD = "GoodFit"
    INCONCLUSIVE = "InconclusiveFit"
    NOT = "NotFit"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EvaluatedSample:
    """A sample, the curve tested against it, and the test outcome.

    ``untestable`` marks samples where no month reaches E_t >= 5; such
    samples carry ``fit_class=NotFit`` and no statistic.
    """

    sample_key: SampleKey
    curve: FittedCurve
    chi_square: float | None
    dof: int | None
    p_value: float | None
    fit_class: FitClass
    binning_start: int | None
    untestable: bool = False

    @property
    def horizon(self) -> int:
        return self.sample_key.horizon


def chi_square_statistic(observed, expected) -> tuple[float, int, int]:
    """Chi-square over months from the first with E_t >= 5.

    Returns ``(chi2, dof, start)`` where ``start`` is 1-based and
    ``dof`` is the number of included months minus one. Leading months
    with E_t < 5 are dropped. A non-positive expectation inside the
    included window makes the statistic infinite.
    """
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    if obs.shape != exp.shape:
        raise ValueError("observed and expected differ in length")
    ok = np.flatnonzero(exp >= MIN_EXPECTED)
    if ok.size == 0:
        raise UntestableError("no month has an expected count >= 5")
    start = int(ok[0])
    o, e = obs[start:], exp[start:]
    dof = len(o) - 1
    if dof < 1:
        raise UntestableError("fewer than two months left after binning")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        return math.inf, dof, start + 1
    return float(np.sum((o - e) ** 2 / e)), dof, start + 1


def chi_square_stat(curve: FittedCurve, sample: ObservedSample) -> tuple[float, int, int]:
    t = np.arange(1, sample.horizon + 1, dtype=float)
    with np.errstate(all="ignore"):
        expected = _omega(curve.model, curve.params.values, t)
    return chi_square_statistic(sample.counts, expected)


def chi_square_pvalue(chi2: float, dof: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if dof < 1:
        raise DomainError(f"dof must be >= 1, got {dof}")
    if chi2 < 0 or math.isnan(chi2):
        raise DomainError(f"chi2 must be >= 0, got {chi2}")
    return gammaincc(dof / 2.0, chi2 / 2.0)


def classify(p: float) -> FitClass:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p-value must lie in [0, 1], got {p}")
    if p >= GOOD_FIT_P:
        return FitClass.GOOD
    if p < NOT_FIT_P:
        return FitClass.NOT
    return FitClass.INCONCLUSIVE


def evaluate_sample(curve: FittedCurve, sample: ObservedSample) -> EvaluatedSample:
    try:
        chi2, dof, start = chi_square_stat(curve, sample)
    except UntestableError:
        return EvaluatedSample(sample.key, curve, None, None, None,
                               FitClass.NOT, None, untestable=True)
    p = chi_square_pvalue(chi2, dof)
    return EvaluatedSample(sample.key, curve, chi2, dof, p, classify(p), start)
