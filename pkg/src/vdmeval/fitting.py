"""Damped nonlinear least squares for the VDM curves.

Positivity-constrained parameters are optimized in log space; YF's tau is
fitted unconstrained and folded to |tau| afterwards, which leaves the curve
unchanged because the folded form is symmetric in tau.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import DataSetId, ObservedSample, SampleKey
from .errors import ConstraintError, FitError, SampleTooShortError
from .models import (MIN_POINTS, POSITIVE, ModelId, ParamVector, _jacobian,
                     _omega, initial_guess)

PERTURB_FACTORS = (1.0, 2.0, 0.5, 5.0, 0.2, 10.0, 0.1)


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 200
    step_tolerance: float = 1e-10
    residual_tolerance: float = 1e-10
    damping_init: float = 1e-3
    multistart_count: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("max_iterations", "step_tolerance", "residual_tolerance",
                     "damping_init", "multistart_count"):
            if not getattr(self, name) > 0:
                raise ValueError(f"FitConfig.{name} must be positive")


@dataclass(frozen=True)
class FittedCurve:
    model: ModelId
    params: ParamVector
    sample_key: SampleKey
    residual_sum_squares: float
    converged: bool
    iterations: int

    def __call__(self, t):
        return _omega(self.model, self.params.values, np.asarray(t, dtype=float))


@dataclass(frozen=True)
class FitFailure:
    model: ModelId
    sample_key: SampleKey
    error: str


def _log_mask(model: ModelId) -> np.ndarray:
    return np.array([rule is True for rule in POSITIVE[model]])


def _to_theta(model, values, mask):
    v = np.asarray(values, dtype=float)
    return np.where(mask, np.log(np.where(mask, v, 1.0)), v)


def _from_theta(theta, mask):
    with np.errstate(over="ignore"):
        return np.where(mask, np.exp(np.where(mask, theta, 0.0)), theta)


def _finalize(model: ModelId, p: np.ndarray) -> ParamVector:
    if model is ModelId.YF:
        p = p.copy()
        p[1] = abs(p[1])
    return ParamVector(model, tuple(float(v) for v in p))


def _levenberg_marquardt(model, theta, mask, t, y, cfg: FitConfig):
    """Returns (theta, rss, converged, iterations)."""
    def residual(th):
        with np.errstate(all="ignore"):
            r = y - _omega(model, _from_theta(th, mask), t)
            return r, float(r @ r)

    r, f = residual(theta)
    if not math.isfinite(f):
        return theta, f, False, 0
    lam = cfg.damping_init
    for it in range(1, cfg.max_iterations + 1):
        p = _from_theta(theta, mask)
        with np.errstate(all="ignore"):
            jac = _jacobian(model, p, t) * np.where(mask, p, 1.0)
        if not np.all(np.isfinite(jac)):
            return theta, f, False, it
        g = jac.T @ r
        h = jac.T @ jac
        diag = np.diag(h).copy()
        floor = 1e-12 * max(float(diag.max()), 1e-300)
        diag = np.maximum(diag, floor)
        if f == 0.0 or float(np.max(np.abs(g))) <= 1e-14 * (1.0 + f):
            return theta, f, True, it
        while True:
            try:
                step = np.linalg.solve(h + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                cand = theta + step
                rc, fc = residual(cand)
                # f - fc as a difference of squares keeps precision near the optimum
                with np.errstate(all="ignore"):
                    gain = float((r - rc) @ (r + rc))
                if math.isfinite(fc) and fc < f:
                    break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left at machine precision
                return theta, f, True, it
        # stopping tests only once steps are nearly Gauss-Newton; heavy
        # damping makes both the step and the gain look small prematurely.
        # A small gain alone is not enough on large-residual problems, where
        # the RSS is flat well before the parameters settle.
        near_gn = lam <= 1e-6
        rel_step = float(np.linalg.norm(step)) / (float(np.linalg.norm(theta)) + cfg.step_tolerance)
        small_step = near_gn and rel_step <= cfg.step_tolerance
        small_gain = (near_gn and gain <= cfg.residual_tolerance * f
                      and rel_step <= math.sqrt(cfg.step_tolerance))
        theta, r, f = cand, rc, fc
        lam = max(lam / 10.0, 1e-15)
        if small_step or small_gain:
            return theta, f, True, it
    return theta, f, False, cfg.max_iterations


def _polish(model, theta, mask, t, y, steps: int = 5):
    """Gauss-Newton refinement judged by the gradient norm.

    Near the optimum of a large-residual problem the RSS changes below its
    own rounding error, while the gradient is still resolved; a few
    undamped steps accepted on a shrinking gradient settle the parameters.
    """
    def state(th):
        with np.errstate(all="ignore"):
            p = _from_theta(th, mask)
            r = y - _omega(model, p, t)
            jac = _jacobian(model, p, t) * np.where(mask, p, 1.0)
            return r, jac, float(r @ r), jac.T @ r

    r, jac, f, g = state(theta)
    for _ in range(steps):
        if not (np.all(np.isfinite(jac)) and math.isfinite(f)):
            break
        try:
            step = np.linalg.lstsq(jac, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        cand = theta + step
        rc, jc, fc, gc = state(cand)
        if not (math.isfinite(fc) and fc <= f * (1 + 1e-12)
                and np.linalg.norm(gc) < np.linalg.norm(g)):
            break
        theta, r, jac, f, g = cand, rc, jc, fc, gc
    return theta, f


def starting_points(model: ModelId, sample, cfg: FitConfig) -> list[ParamVector]:
    """The heuristic guess followed by seeded multiplicative perturbations."""
    base = initial_guess(model, sample)
    starts = [base]
    rng = np.random.default_rng(cfg.seed)
    vals = np.asarray(base.values)
    for _ in range(cfg.multistart_count - 1):
        factors = rng.choice(PERTURB_FACTORS, size=len(vals))
        cand = vals * factors
        # free parameters at zero are shifted rather than scaled
        cand = np.where(vals == 0, factors - 1.0, cand)
        try:
            pv = ParamVector(model, tuple(cand))
        except ConstraintError:
            continue
        if pv not in starts:
            starts.append(pv)
    return starts


def _key_of(sample) -> SampleKey:
    if isinstance(sample, ObservedSample):
        return sample.key
    return SampleKey("", DataSetId.NVD, len(sample))


def fit(model: ModelId, sample, config: FitConfig | None = None) -> FittedCurve:
    """Least-squares fit of ``model`` to a sample over months 1..tau.

    Returns the lowest-RSS result over all multistart runs. Runs that stop
    at the iteration cap are still returned, flagged ``converged=False``.
    """
    cfg = config or FitConfig()
    model = ModelId(model)
    counts = getattr(sample, "counts", sample)
    y = np.asarray(counts, dtype=float)
    if len(y) < MIN_POINTS:
        raise SampleTooShortError(f"need at least {MIN_POINTS} points, got {len(y)}")
    t = np.arange(1, len(y) + 1, dtype=float)
    mask = _log_mask(model)

    best = None
    for start in starting_points(model, y, cfg):
        theta0 = _to_theta(model, start.values, mask)
        theta, rss, ok, its = _levenberg_marquardt(model, theta0, mask, t, y, cfg)
        if not math.isfinite(rss):
            continue
        try:
            params = _finalize(model, _from_theta(theta, mask))
        except ConstraintError:
            continue
        # RSS differences at rounding level are ties; the earlier start wins
        if best is None or rss < best[0] - 1e-12 * best[0]:
            best = (rss, params, ok, its, theta)
    if best is None:
        raise FitError(f"all starts diverged for {model} on {_key_of(sample)}")
    rss, params, ok, its, theta = best
    if ok:
        polished, prss = _polish(model, theta, mask, t, y)
        try:
            params, rss = _finalize(model, _from_theta(polished, mask)), prss
        except ConstraintError:
            pass
    return FittedCurve(model, params, _key_of(sample), rss, ok, its)


def _fit_task(args):
    model, sample, cfg = args
    try:
        return fit(model, sample, cfg)
    except (FitError, SampleTooShortError) as exc:
        return FitFailure(ModelId(model), _key_of(sample), str(exc))


def fit_all(samples: Iterable[ObservedSample], models: Sequence[ModelId],
            config: FitConfig | None = None, workers: int = 1):
    """Fit every (sample, model) pair; failures are recorded, never raised.

    Results come back in input order: samples outer, models inner.
    """
    cfg = config or FitConfig()
    tasks = [(ModelId(m), s, cfg) for s in samples for m in models]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fit_task, tasks, chunksize=8))
    return [_fit_task(task) for task in tasks]
