"""Synthetic discovery series with a known ground truth, for sanity checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TAU_MIN, DataSetId, ObservedSample


@dataclass(frozen=True)
class LogisticTruth:
    total: float       # eventual number of vulnerabilities
    midpoint: float    # month of fastest discovery
    rate: float        # logistic growth rate per month

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.total / (1.0 + np.exp(-self.rate * (t - self.midpoint)))


def poisson_counts(truth: LogisticTruth, months: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Cumulative counts for months 1..months with Poisson monthly increments."""
    expected = np.diff(truth(np.arange(0, months + 1)))
    return np.cumsum(rng.poisson(expected))


def synthetic_samples(truths, months: int, seed: int = 0,
                      dataset: DataSetId = DataSetId.NVD,
                      tau_min: int = TAU_MIN) -> list[ObservedSample]:
    """One release per ground truth, sampled at every horizon tau_min..months."""
    rng = np.random.default_rng(seed)
    out = []
    for i, truth in enumerate(truths, 1):
        counts = tuple(int(c) for c in poisson_counts(truth, months, rng))
        out += [ObservedSample(f"synthetic-{i}", dataset, tau, counts[:tau])
                for tau in range(tau_min, months + 1)]
    return out
