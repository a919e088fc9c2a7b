"""Overall and temporal goodness-of-fit quality, smoothing, period verdicts."""
from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInputError, InsufficientDataError
from .gof import FitClass
from .models import ModelId

DEFAULT_OMEGA = 0.5
DEFAULT_WINDOW = 5
BASE_LINE = 0.5


def quality_ratio(good: int, inconclusive: int, total: int, omega: float) -> float:
    """(good + omega * inconclusive) / total."""
    if total <= 0:
        raise EmptyInputError("quality of an empty set is undefined")
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega}")
    return (good + omega * inconclusive) / total


def _tally(evaluated: Iterable, include_untestable: bool = True):
    good = inconclusive = total = 0
    for ev in evaluated:
        if not include_untestable and getattr(ev, "untestable", False):
            continue
        total += 1
        cls = ev.fit_class
        if cls is FitClass.GOOD:
            good += 1
        elif cls is FitClass.INCONCLUSIVE:
            inconclusive += 1
    return good, inconclusive, total


def overall_quality(evaluated: Iterable, omega: float = DEFAULT_OMEGA,
                    include_untestable: bool = True) -> float:
    """Weighted share of Good and Inconclusive fits among all evaluated samples.

    Untestable samples count as Not Fit unless ``include_untestable`` is
    False, in which case they leave the denominator too.
    """
    return quality_ratio(*_tally(evaluated, include_untestable), omega)


def temporal_quality(evaluated: Iterable, horizon: int, omega: float = DEFAULT_OMEGA,
                     include_untestable: bool = True) -> float:
    at = [ev for ev in evaluated if ev.horizon == horizon]
    if not at:
        raise EmptyInputError(f"no evaluated samples at horizon {horizon}")
    return overall_quality(at, omega, include_untestable)


@dataclass(frozen=True)
class QualitySeries:
    model: ModelId | None
    omega: float
    points: tuple
    window: int | None = None

    def __post_init__(self):
        pts = tuple((int(t), float(q)) for t, q in self.points)
        object.__setattr__(self, "points", pts)
        taus = [t for t, _ in pts]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("horizons must be strictly increasing")
        if any(not 0.0 <= q <= 1.0 for _, q in pts):
            raise ValueError("quality values must lie in [0, 1]")

    @property
    def horizons(self) -> list[int]:
        return [t for t, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [q for _, q in self.points]

    def as_dict(self) -> dict[int, float]:
        return dict(self.points)

    def __len__(self):
        return len(self.points)


def temporal_quality_series(evaluated: Iterable, omega: float = DEFAULT_OMEGA,
                            model: ModelId | None = None,
                            include_untestable: bool = True) -> QualitySeries:
    by_tau = defaultdict(list)
    for ev in evaluated:
        if model is not None and ev.curve.model != model:
            continue
        by_tau[ev.horizon].append(ev)
    pts = [(tau, overall_quality(by_tau[tau], omega, include_untestable))
           for tau in sorted(by_tau)]
    return QualitySeries(model, omega, tuple(pts))


def moving_average(series: QualitySeries, k: int = DEFAULT_WINDOW) -> QualitySeries:
    """Trailing k-month mean; defined where all k trailing horizons exist."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {k}")
    if len(series) < k:
        raise InsufficientDataError(
            f"series has {len(series)} points, window needs {k}")
    q = series.as_dict()
    pts = []
    for tau in series.horizons:
        window = [q.get(tau - i + 1) for i in range(1, k + 1)]
        if None in window:
            continue
        pts.append((tau, sum(window) / k))
    return QualitySeries(series.model, series.omega, tuple(pts), window=k)


class Period(Enum):
    YOUNG = ("young", 6, 12)
    MIDDLE = ("middle", 13, 36)
    OLD = ("old", 37, 72)

    def __init__(self, label, first, last):
        self.label = label
        self.first = first
        self.last = last

    def __contains__(self, tau):
        return self.first <= tau <= self.last


@dataclass(frozen=True)
class PeriodSummary:
    period: Period
    horizons: tuple
    values: tuple
    median: float
    verdict: str  # "above", "below" or "indistinguishable"
    p_above: float
    p_below: float


def signed_rank_test_one_sided(diffs: Sequence[float]) -> float:
    """Exact Wilcoxon signed-rank p-value for H1: diffs shifted above zero.

    Zero differences are dropped; ties among |diffs| get midranks and the
    null distribution is enumerated over all 2^n sign assignments.
    """
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    if d.size == 0:
        return 1.0
    doubled = np.rint(2 * rankdata(np.abs(d))).astype(np.int64)
    observed = int(doubled[d > 0].sum())
    total = int(doubled.sum())
    ways = np.zeros(total + 1)
    ways[0] = 1.0
    for r in doubled:
        ways[r:] = ways[r:] + ways[:total + 1 - r].copy()
    return float(ways[observed:].sum() / ways.sum())


def baseline_verdict(values: Sequence[float], base_line: float = BASE_LINE,
                     alpha: float = 0.05) -> tuple[str, float, float]:
    """One-sided Wilcoxon signed-rank tests of the values against a base line."""
    diffs = np.asarray(values, dtype=float) - base_line
    p_above = signed_rank_test_one_sided(diffs)
    p_below = signed_rank_test_one_sided(-diffs)
    if p_above < alpha:
        return "above", p_above, p_below
    if p_below < alpha:
        return "below", p_above, p_below
    return "indistinguishable", p_above, p_below


def quality_by_period(evaluated: Iterable, omega: float = DEFAULT_OMEGA,
                      period: Period = Period.YOUNG, alpha: float = 0.05,
                      include_untestable: bool = True) -> PeriodSummary:
    chosen = [ev for ev in evaluated if ev.horizon in period]
    if not chosen:
        raise EmptyInputError(f"no evaluated samples in the {period.label} period")
    series = temporal_quality_series(chosen, omega, include_untestable=include_untestable)
    return summarize_period(series, period, alpha)


def summarize_period(series: QualitySeries, period: Period,
                     alpha: float = 0.05) -> PeriodSummary:
    pts = [(t, q) for t, q in series.points if t in period]
    if not pts:
        raise EmptyInputError(f"no horizons in the {period.label} period")
    taus, vals = zip(*pts)
    verdict, p_above, p_below = baseline_verdict(vals, alpha=alpha)
    return PeriodSummary(period, taus, vals, statistics.median(vals),
                         verdict, p_above, p_below)
