import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdmeval.data import DataSetId, ObservedSample
from vdmeval.errors import SampleTooShortError
from vdmeval.fitting import FitConfig, FitFailure, fit, fit_all, starting_points
from vdmeval.models import ModelId, ParamVector, evaluate, initial_guess

TRUTH = {
    ModelId.AML: (0.001, 183.0, 0.078),
    ModelId.AT: (20.0, 3.0),
    ModelId.JW: (150.0, 18.0, 1.8),
    ModelId.LN: (3.0, 2.0),
    ModelId.LP: (40.0, 0.3),
    ModelId.RE: (150.0, 0.04),
    ModelId.RQ: (0.1, 2.0),
    ModelId.YF: (120.0, 15.0, 6.0),
}


def _sample(counts, release="R", dataset=DataSetId.NVD):
    return ObservedSample(release, dataset, len(counts), tuple(int(c) for c in counts))


def _rss(model, values, y):
    t = np.arange(1, len(y) + 1)
    return float(np.sum((np.asarray(y) - evaluate(ParamVector(model, values), t)) ** 2))


def test_config_rejects_nonpositive():
    with pytest.raises(ValueError):
        FitConfig(max_iterations=0)
    with pytest.raises(ValueError):
        FitConfig(damping_init=-1)


def test_exact_line():
    curve = fit(ModelId.LN, _sample((3, 5, 7, 9, 11, 13)))
    assert curve.params.values == pytest.approx((2.0, 1.0), abs=1e-8)
    assert curve.converged


@given(st.lists(st.integers(0, 400), min_size=6, max_size=40).map(sorted))
@settings(max_examples=60, deadline=None)
def test_line_matches_ordinary_least_squares(counts):
    t = np.arange(1, len(counts) + 1)
    slope, icept = np.polyfit(t, counts, 1)
    curve = fit(ModelId.LN, _sample(counts))
    assert curve.params.values == pytest.approx((slope, icept), abs=1e-8)


def test_logistic_parameters_recovered_from_rounded_curve():
    truth = TRUTH[ModelId.AML]
    y = np.round(evaluate(ParamVector(ModelId.AML, truth), np.arange(1, 31)))
    curve = fit(ModelId.AML, _sample(y))
    assert curve.params.values == pytest.approx(truth, rel=0.01)


def test_quadratic_on_constant_sample_matches_closed_form():
    y = np.full(6, 5.0)
    t = np.arange(1, 7, dtype=float)
    design = np.column_stack([t ** 2 / 2, t])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    best = float(np.sum((design @ coef - y) ** 2))
    curve = fit(ModelId.RQ, _sample(y))
    assert coef[0] <= 0
    assert curve.params.values[0] <= 0
    assert curve.residual_sum_squares == pytest.approx(best, rel=1e-8)


@pytest.mark.parametrize("model", list(ModelId))
def test_noise_free_samples_fit_exactly(model):
    y = evaluate(ParamVector(model, TRUTH[model]), np.arange(1, 37))
    curve = fit(model, y)
    assert curve.residual_sum_squares <= 1e-6


@pytest.mark.parametrize("model", list(ModelId))
def test_fit_never_worse_than_initial_guess(model):
    rng = np.random.default_rng(7)
    y = np.cumsum(rng.poisson(3, size=24))
    curve = fit(model, _sample(y))
    assert curve.residual_sum_squares <= _rss(model, initial_guess(model, y).values, y) + 1e-9
    assert curve.sample_key == ("R", DataSetId.NVD, 24)


def test_deterministic_given_seed():
    y = np.cumsum(np.random.default_rng(3).poisson(2, size=20))
    a = fit(ModelId.YF, _sample(y), FitConfig(seed=5))
    b = fit(ModelId.YF, _sample(y), FitConfig(seed=5))
    assert a == b


def test_starting_points_are_admissible_and_distinct():
    y = np.arange(1, 13) * 2
    for model in ModelId:
        starts = starting_points(model, y, FitConfig(multistart_count=8))
        assert 1 <= len(starts) <= 8
        assert len(set(starts)) == len(starts)
        assert starts[0] == initial_guess(model, y)


def test_short_sample_raises():
    with pytest.raises(SampleTooShortError):
        fit(ModelId.LN, (1, 2, 3))


def test_fit_all_cardinality_and_order():
    assert fit_all([], list(ModelId)) == []
    samples = [_sample(np.arange(1, 9) * 3, release="R1"),
               _sample(np.arange(1, 11) ** 2 // 4, release="R2")]
    out = fit_all(samples, list(ModelId))
    assert len(out) == 16
    assert [(c.sample_key.release, c.model) for c in out] == \
        [(s.release, m) for s in samples for m in ModelId]


def test_fit_all_records_failures():
    out = fit_all([(1, 2, 3)], [ModelId.LN])
    assert isinstance(out[0], FitFailure)
    assert "at least" in out[0].error


def test_fit_all_parallel_matches_serial():
    samples = [_sample(np.cumsum(np.random.default_rng(i).poisson(2, size=12)), f"R{i}")
               for i in range(3)]
    models = [ModelId.LN, ModelId.AML]
    assert fit_all(samples, models, workers=2) == fit_all(samples, models)
