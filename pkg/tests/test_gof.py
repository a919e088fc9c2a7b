import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from vdmeval.data import DataSetId, ObservedSample, SampleKey
from vdmeval.errors import DomainError, UntestableError
from vdmeval.fitting import FittedCurve
from vdmeval.gof import (FitClass, chi_square_pvalue, chi_square_stat,
                         chi_square_statistic, classify, evaluate_sample)
from vdmeval.models import ModelId, ParamVector, evaluate
from vdmeval.special import gammaincc


def chi2_tail_by_quadrature(x, k):
    """Oracle: integrate the chi-square density over [x, inf)."""
    log_norm = (k / 2) * math.log(2) + math.lgamma(k / 2)

    def density(u):
        if u <= 0:
            return 0.0
        return math.exp((k / 2 - 1) * math.log(u) - u / 2 - log_norm)

    mode = max(k - 2, 0)
    if x < mode:
        lower, _ = quad(density, 0, x, epsabs=1e-13, limit=200)
        return 1.0 - lower
    upper, _ = quad(density, x, np.inf, epsabs=1e-13, limit=200)
    return upper


def _curve(model, values, horizon, dataset=DataSetId.NVD):
    return FittedCurve(model, ParamVector(model, values),
                       SampleKey("R", dataset, horizon), 0.0, True, 0)


# ---------------------------------------------------------------- statistic

def test_perfect_fit_is_zero():
    assert chi_square_statistic((6, 8), (6, 8)) == (0.0, 1, 1)
    e = np.arange(5, 20, dtype=float)
    chi2, dof, start = chi_square_statistic(e, e)
    assert (chi2, dof, start) == (0.0, len(e) - 1, 1)


def test_binning_drops_leading_small_expectations():
    chi2, dof, start = chi_square_statistic((1, 1, 7, 9, 10, 13), (2, 4, 6, 8, 10, 12))
    assert (start, dof) == (3, 3)
    assert chi2 == pytest.approx(1 / 6 + 1 / 8 + 0 + 1 / 12)


def test_untestable_cases():
    with pytest.raises(UntestableError):
        chi_square_statistic((1, 2, 3), (1, 2, 4.9))
    with pytest.raises(UntestableError):
        chi_square_statistic((1, 2, 3), (1, 2, 6))


def test_prefix_exclusion_is_well_defined():
    o = np.array([7, 9, 12, 14, 18.0])
    e = np.array([6, 8, 10, 12, 14.0])
    base = chi_square_statistic(o, e)
    padded = chi_square_statistic(np.r_[0, 1, 3, o], np.r_[0.5, 2, 4.5, e])
    assert padded[0] == base[0]
    assert padded[1] == base[1]
    assert padded[2] == base[2] + 3


@given(st.lists(st.floats(5, 500), min_size=2, max_size=30),
       st.floats(1, 10), st.randoms(use_true_random=False))
def test_joint_scaling_scales_statistic(expected, c, rnd):
    e = np.array(expected)
    o = np.array([x * rnd.uniform(0.5, 1.5) for x in expected])
    chi2, _, _ = chi_square_statistic(o, e)
    scaled, _, _ = chi_square_statistic(c * o, c * e)
    assert scaled == pytest.approx(c * chi2, rel=1e-9, abs=1e-12)


def test_nonpositive_expectation_inside_window_is_infinite():
    chi2, dof, _ = chi_square_statistic((6, 7, 8), (6, 7, -1))
    assert math.isinf(chi2) and dof == 2
    assert chi_square_pvalue(chi2, dof) == 0.0


# ---------------------------------------------------------------- p-value

def test_pvalue_examples():
    for d in range(1, 40):
        assert chi_square_pvalue(0.0, d) == 1.0
        assert classify(chi_square_pvalue(0.0, d)) is FitClass.GOOD
    assert chi_square_pvalue(3.841, 1) == pytest.approx(0.05, abs=5e-4)
    assert chi_square_pvalue(4.351, 10) == pytest.approx(0.930, abs=5e-3)


@pytest.mark.parametrize("chi2,dof", [(0.5, 1), (3.841, 1), (12.0, 3), (4.351, 10),
                                      (29.0, 29), (70.0, 35), (0.01, 7), (150.0, 71)])
def test_pvalue_against_quadrature(chi2, dof):
    assert chi_square_pvalue(chi2, dof) == pytest.approx(
        chi2_tail_by_quadrature(chi2, dof), abs=1e-10)


@given(st.floats(0.01, 200), st.floats(0, 400))
def test_incomplete_gamma_against_scipy(a, x):
    from scipy.special import gammaincc as reference
    assert gammaincc(a, x) == pytest.approx(reference(a, x), abs=1e-10)


@given(st.integers(1, 80), st.lists(st.floats(0, 300), min_size=2, max_size=20))
def test_pvalue_decreasing_in_statistic(dof, grid):
    grid = sorted(grid)
    ps = [chi_square_pvalue(x, dof) for x in grid]
    assert all(b <= a for a, b in zip(ps, ps[1:]))


def test_pvalue_domain_errors():
    with pytest.raises(DomainError):
        chi_square_pvalue(1.0, 0)
    with pytest.raises(DomainError):
        chi_square_pvalue(-1.0, 3)


# ---------------------------------------------------------------- classes

@pytest.mark.parametrize("p,cls", [
    (0.993, FitClass.GOOD), (0.417, FitClass.INCONCLUSIVE), (0.0001, FitClass.NOT),
    (0.80, FitClass.GOOD), (0.05, FitClass.INCONCLUSIVE),
    (np.nextafter(0.80, 0), FitClass.INCONCLUSIVE), (np.nextafter(0.05, 0), FitClass.NOT),
    (1.0, FitClass.GOOD), (0.0, FitClass.NOT),
])
def test_classify(p, cls):
    assert classify(p) is cls


@pytest.mark.parametrize("p", [-0.01, 1.01, float("nan")])
def test_classify_rejects_out_of_range(p):
    with pytest.raises(DomainError):
        classify(p)


# ---------------------------------------------------------------- evaluated samples

def test_perfect_fit_sample_is_good():
    curve = _curve(ModelId.LN, (2, 5), 8)
    sample = ObservedSample("R", DataSetId.NVD, 8, tuple(2 * t + 5 for t in range(1, 9)))
    ev = evaluate_sample(curve, sample)
    assert ev.fit_class is FitClass.GOOD and ev.p_value == 1.0
    assert ev.chi_square == 0.0 and ev.dof == 7 and ev.binning_start == 1


def test_small_expectations_are_untestable():
    curve = _curve(ModelId.LN, (0.1, 0), 10)
    sample = ObservedSample("R", DataSetId.NVD, 10, (0,) * 10)
    ev = evaluate_sample(curve, sample)
    assert ev.untestable and ev.fit_class is FitClass.NOT
    assert ev.p_value is None and ev.chi_square is None


def test_regenerated_aml_sample_is_good():
    params = (0.001, 183.0, 0.078)
    t = np.arange(1, 31)
    counts = np.round(evaluate(ParamVector(ModelId.AML, params), t)).astype(int)
    sample = ObservedSample("FF3.0", DataSetId.NVD, 30, tuple(counts))
    ev = evaluate_sample(_curve(ModelId.AML, params, 30), sample)
    assert ev.fit_class is FitClass.GOOD
    chi2, dof, start = chi_square_stat(ev.curve, sample)
    assert ev.dof == dof == 30 - start
