"""Prediction quality of frozen curves and the predictability metric."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .data import ObservedSample, SampleKey
from .errors import EmptyInputError, InsufficientDataError
from .fitting import FittedCurve
from .gof import FitClass, evaluate_sample
from .models import ModelId
from .quality import DEFAULT_OMEGA, QualitySeries, _tally, quality_ratio


@dataclass(frozen=True)
class Scenario:
    name: str
    obs_first: int
    obs_last: int
    span: int

    @property
    def horizons(self) -> range:
        return range(self.obs_first, self.obs_last + 1)


SCENARIOS = {
    "short-term": Scenario("short-term", 6, 24, 3),
    "long-term": Scenario("long-term", 6, 24, 12),
    "upgrade-or-keep": Scenario("upgrade-or-keep", 6, 12, 6),
    "historic": Scenario("historic", 24, 36, 12),
}


@dataclass(frozen=True)
class PredictionRecord:
    """A curve fitted at horizon tau, tested on the sample at tau + delta."""

    model: ModelId
    sample_key: SampleKey
    delta: int
    p_value: float | None
    fit_class: FitClass
    curve: FittedCurve
    untestable: bool = False

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


def _index_samples(samples) -> Mapping[SampleKey, ObservedSample]:
    if isinstance(samples, Mapping):
        return samples
    return {s.key: s for s in samples}


def predict(curve: FittedCurve, samples: Mapping[SampleKey, ObservedSample],
            delta: int) -> PredictionRecord | None:
    """Evaluate ``curve`` unchanged on the sample ``delta`` months later."""
    key = curve.sample_key
    future = samples.get(SampleKey(key.release, key.dataset, key.horizon + delta))
    if future is None:
        return None
    ev = evaluate_sample(curve, future)
    return PredictionRecord(curve.model, key, delta, ev.p_value, ev.fit_class,
                            curve, ev.untestable)


def prediction_records(curves: Iterable[FittedCurve], samples, delta: int):
    """Returns (records, excluded) where ``excluded`` lacks a future sample."""
    index = _index_samples(samples)
    records, excluded = [], []
    for curve in curves:
        rec = predict(curve, index, delta)
        if rec is None:
            excluded.append(curve.sample_key)
        else:
            records.append(rec)
    return records, excluded


def prediction_quality(curves: Iterable[FittedCurve], samples, delta: int,
                       omega: float = DEFAULT_OMEGA,
                       include_untestable: bool = True) -> float:
    records, _ = prediction_records(curves, samples, delta)
    if not records:
        raise EmptyInputError(f"no curve has a sample {delta} months later")
    return quality_ratio(*_tally(records, include_untestable), omega)


def geometric_mean(factors: Sequence[float]) -> float:
    """(n)-th root of the product; any zero factor gives exactly 0."""
    factors = list(factors)
    if not factors:
        raise EmptyInputError("geometric mean of nothing")
    if any(f < 0 for f in factors):
        raise ValueError("factors must be nonnegative")
    if any(f == 0 for f in factors):
        return 0.0
    return math.exp(math.fsum(math.log(f) for f in factors) / len(factors))


class PredictabilityAnalysis:
    """Caches prediction tallies for a fixed set of curves and samples."""

    def __init__(self, curves: Iterable[FittedCurve], samples,
                 omega: float = DEFAULT_OMEGA, include_untestable: bool = True):
        self.samples = _index_samples(samples)
        self.omega = omega
        self.include_untestable = include_untestable
        self._curves = defaultdict(list)
        for c in curves:
            self._curves[(ModelId(c.model), c.sample_key.horizon)].append(c)
        self._tallies = {}
        self.excluded = {}

    def models(self) -> list[ModelId]:
        return sorted({m for m, _ in self._curves})

    def horizons(self, model: ModelId) -> list[int]:
        return sorted(t for m, t in self._curves if m == model)

    def records(self, model: ModelId, tau: int, delta: int) -> list[PredictionRecord]:
        recs, excluded = prediction_records(self._curves.get((model, tau), []),
                                            self.samples, delta)
        self.excluded[(model, tau, delta)] = len(excluded)
        return recs

    def _tally(self, model, tau, delta):
        key = (ModelId(model), tau, delta)
        if key not in self._tallies:
            self._tallies[key] = _tally(self.records(*key), self.include_untestable)
        return self._tallies[key]

    def prediction_quality(self, model: ModelId, tau: int, delta: int) -> float:
        good, inc, total = self._tally(model, tau, delta)
        if total == 0:
            raise EmptyInputError(
                f"no {model} curves at horizon {tau} with a sample at {tau + delta}")
        return quality_ratio(good, inc, total, self.omega)

    def temporal_quality(self, model: ModelId, tau: int) -> float:
        return self.prediction_quality(model, tau, 0)

    def predictability(self, model: ModelId, tau: int, span: int) -> float:
        factors = []
        for delta in range(span + 1):
            try:
                factors.append(self.prediction_quality(model, tau, delta))
            except EmptyInputError as exc:
                raise InsufficientDataError(str(exc)) from None
        return geometric_mean(factors)

    def series(self, model: ModelId, span: int,
               horizons: Iterable[int] | None = None) -> QualitySeries:
        """Predictability per horizon; horizons lacking any factor are skipped."""
        model = ModelId(model)
        taus = self.horizons(model) if horizons is None else horizons
        pts = []
        for tau in taus:
            if (model, tau) not in self._curves:
                continue
            try:
                pts.append((tau, self.predictability(model, tau, span)))
            except InsufficientDataError:
                continue
        return QualitySeries(model, self.omega, tuple(pts))

    def quality_series(self, model: ModelId,
                       horizons: Iterable[int] | None = None) -> QualitySeries:
        return self.series(model, 0, horizons)


def predictability_series(curves, samples, model: ModelId, span: int,
                          omega: float = DEFAULT_OMEGA,
                          horizons: Iterable[int] | None = None) -> QualitySeries:
    return PredictabilityAnalysis(curves, samples, omega).series(model, span, horizons)
