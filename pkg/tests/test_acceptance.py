"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""
import contextlib
import json
import math
import random
import sys
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

sys.path.insert(0, str(Path(__file__).parent))
from factories import evaluated_set, samples_from_curve  # noqa: E402

from vdmeval.cli import main as cli_main  # noqa: E402
from vdmeval.comparison import (Direction, bonferroni_alpha,  # noqa: E402
                                compare_models, rank_sum_test_one_sided)
from vdmeval.data import DataSetId, build_dataset, load_records  # noqa: E402
from vdmeval.fitting import FitConfig, fit, fit_all  # noqa: E402
from vdmeval.gof import (FitClass, chi_square_pvalue, classify,  # noqa: E402
                         evaluate_sample)
from vdmeval.models import ModelId  # noqa: E402
from vdmeval.predictability import (PredictabilityAnalysis, Scenario,  # noqa: E402
                                    geometric_mean)
from vdmeval.quality import overall_quality  # noqa: E402
from vdmeval.synthetic import LogisticTruth, synthetic_samples  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def gate(capsys):
    @contextlib.contextmanager
    def run(number, title, limit):
        start = time.perf_counter()
        status, detail = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            if elapsed >= limit:
                detail = f" exceeded {limit:g}s"
                raise AssertionError(f"criterion {number} took {elapsed:.2f}s (limit {limit}s)")
            status = "PASS"
        except BaseException as exc:
            detail = detail or f" {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            raise
        finally:
            elapsed = time.perf_counter() - start
            with capsys.disabled():
                print(f"\n[acceptance] criterion {number:>2} {status}  {elapsed:7.2f}s  {title}{detail}")
    return run


# ---------------------------------------------------------------- 1

def test_criterion_01_quality_arithmetic(gate):
    with gate(1, "overall quality of the published fit counts", 1.0):
        evs = evaluated_set(1526, 1463, 3895 - 1526 - 1463)
        got = {w: round(overall_quality(evs, w), 2) for w in (0.0, 1.0, 0.5)}
        assert got == {0.0: 0.39, 1.0: 0.77, 0.5: 0.58}, got


# ---------------------------------------------------------------- 2

def test_criterion_02_fit_class_boundaries(gate):
    with gate(2, "fit classification and interval boundaries", 1.0):
        cases = {0.993: FitClass.GOOD, 0.417: FitClass.INCONCLUSIVE, 0.0001: FitClass.NOT,
                 0.80: FitClass.GOOD, 0.05: FitClass.INCONCLUSIVE}
        for p, cls in cases.items():
            assert classify(p) is cls, (p, classify(p))


# ---------------------------------------------------------------- 3

def test_criterion_03_bonferroni(gate):
    with gate(3, "Bonferroni-corrected levels for 8 and 6 models", 1.0):
        assert abs(bonferroni_alpha(8, 0.05) - 0.0071428) <= 1e-6
        assert abs(bonferroni_alpha(6, 0.05) - 0.01) <= 1e-12


# ---------------------------------------------------------------- 4

RECOVERY_PARAMS = {
    ModelId.AML: (0.001, 183.0, 0.078),
    ModelId.AT: (20.0, 3.0),
    ModelId.JW: (150.0, 18.0, 1.8),
    ModelId.LN: (3.0, 2.0),
    ModelId.LP: (40.0, 0.3),
    ModelId.RE: (150.0, 0.04),
    ModelId.RQ: (0.1, 2.0),
    ModelId.YF: (120.0, 15.0, 6.0),
}


def test_criterion_04_synthetic_recovery(gate):
    tau = 36
    with gate(4, "noise-free rounded samples refit to GoodFit for all 8 models", 30.0):
        failures = []
        for model, params in RECOVERY_PARAMS.items():
            sample = samples_from_curve(model, params, "synthetic", tau)[-1]
            assert sample.horizon == tau
            curve = fit(model, sample)
            ev = evaluate_sample(curve, sample)
            if curve.residual_sum_squares > tau * 0.25 or ev.fit_class is not FitClass.GOOD:
                failures.append((str(model), curve.residual_sum_squares, ev.p_value))
        assert not failures, failures


# ---------------------------------------------------------------- 5

def _chi2_tail_quadrature(x, k):
    log_norm = (k / 2) * math.log(2) + math.lgamma(k / 2)

    def density(u):
        return 0.0 if u <= 0 else math.exp((k / 2 - 1) * math.log(u) - u / 2 - log_norm)

    if x < max(k - 2, 0):
        return 1.0 - quad(density, 0, x, epsabs=1e-13, limit=200)[0]
    return quad(density, x, np.inf, epsabs=1e-13, limit=200)[0]


CHI2_PAIRS = [(0.1, 1), (1.0, 1), (3.841, 1), (10.0, 1), (0.5, 2), (5.991, 2), (2.0, 3),
              (7.815, 3), (4.351, 10), (18.307, 10), (1.0, 5), (30.0, 20), (12.4, 20),
              (50.0, 30), (29.3, 35), (60.0, 40), (70.0, 71), (95.0, 71), (0.01, 4), (150.0, 100)]


def test_criterion_05_pvalue_oracle(gate):
    with gate(5, "chi-square p-values against numerical integration (20 pairs)", 5.0):
        assert len(CHI2_PAIRS) == 20
        worst = max(abs(chi_square_pvalue(x, k) - _chi2_tail_quadrature(x, k))
                    for x, k in CHI2_PAIRS)
        assert worst <= 1e-6, worst


# ---------------------------------------------------------------- 6

def test_criterion_06_rank_sum_oracle(gate):
    with gate(6, "rank-sum p-values against exhaustive enumeration, sizes up to 6+6", 10.0):
        assert rank_sum_test_one_sided([10, 11, 12], [1, 2, 3]) == 0.05
        checked, worst = 0, 0.0
        for n1 in range(1, 7):
            for n2 in range(1, 7):
                n = n1 + n2
                # null distribution by listing every assignment of ranks to x
                sums = sorted(sum(c) for c in combinations(range(1, n + 1), n1))
                total = len(sums)
                for x_ranks in combinations(range(1, n + 1), n1):
                    y_ranks = [r for r in range(1, n + 1) if r not in x_ranks]
                    observed = sum(x_ranks)
                    expected = sum(s >= observed for s in sums) / total
                    got = rank_sum_test_one_sided([float(r) for r in x_ranks],
                                                  [float(r) for r in y_ranks])
                    worst = max(worst, abs(got - expected))
                    checked += 1
        assert worst <= 1e-9, worst
        assert checked == sum(math.comb(a + b, a) for a in range(1, 7) for b in range(1, 7))


# ---------------------------------------------------------------- 7

def test_criterion_07_metric_identities(gate):
    with gate(7, "predictability at zero span, AM-GM, monotonicity in omega", 10.0):
        truth = (0.005, 80.0, 0.5)
        samples = []
        for r in ("A", "B"):
            samples += samples_from_curve(ModelId.AML, truth, r, 24)
        curves = [fit(m, s) for s in samples for m in (ModelId.AML, ModelId.LN)]
        analysis = PredictabilityAnalysis(curves, samples)
        index = {s.key: s for s in samples}
        for model in (ModelId.AML, ModelId.LN):
            for tau in analysis.horizons(model):
                evs = [evaluate_sample(c, index[c.sample_key]) for c in curves
                       if c.model is model and c.sample_key.horizon == tau]
                assert analysis.predictability(model, tau, 0) == overall_quality(evs)

        rnd = random.Random(2024)
        for _ in range(1000):
            factors = [rnd.random() for _ in range(rnd.randint(1, 25))]
            if rnd.random() < 0.1:
                factors[rnd.randrange(len(factors))] = 0.0
            assert geometric_mean(factors) <= sum(factors) / len(factors) + 1e-12

        for _ in range(1000):
            comp = [rnd.randint(0, 30) for _ in range(3)]
            if not sum(comp):
                comp[0] = 1
            evs = evaluated_set(*comp)
            omegas = sorted(rnd.random() for _ in range(4))
            qs = [overall_quality(evs, w) for w in [0.0] + omegas + [1.0]]
            assert all(a <= b for a, b in zip(qs, qs[1:])), (comp, qs)


# ---------------------------------------------------------------- 8

def _pipeline(out: Path):
    args = ["run", "--records", str(DATA / "corpus_records.csv"),
            "--manifest", str(DATA / "corpus_manifest.csv"),
            "--collection-date", "2011-07-01",
            "--seed", "7", "--out", str(out)]
    assert cli_main(args) == 0


def _snapshot(root: Path):
    files = {p.relative_to(root).as_posix(): p.read_bytes()
             for p in sorted(root.rglob("*")) if p.is_file()}
    # the echoed config names the output directory, which differs by design
    echo = json.loads(files["run_manifest.json"])
    for cfg in echo["commands"].values():
        cfg.pop("out")
    files["run_manifest.json"] = json.dumps(echo, sort_keys=True).encode()
    return files


@pytest.mark.slow
def test_criterion_08_pipeline_determinism(gate, tmp_path):
    with gate(8, "two seeded pipeline runs on the fixture corpus are byte-identical", 120.0):
        _pipeline(tmp_path / "first")
        _pipeline(tmp_path / "second")
        first, second = _snapshot(tmp_path / "first"), _snapshot(tmp_path / "second")
        assert first.keys() == second.keys()
        differing = [k for k in first if first[k] != second[k]]
        assert not differing, differing
        expected = {"samples.jsonl", "curves.jsonl", "evaluated.jsonl",
                    "quality/report.txt", "quality/periods.csv",
                    "predict/long-term/table.csv", "compare/long-term/graph.dot",
                    "compare/long-term/report.txt", "run_manifest.json"}
        assert expected <= first.keys(), expected - first.keys()


# ---------------------------------------------------------------- 9

JOINS = {
    ("FF1.0", DataSetId.NVD): {"CVE-1", "CVE-2", "CVE-4", "CVE-5"},
    ("FF2.0", DataSetId.NVD): {"CVE-2", "CVE-3"},
    ("FF1.0", DataSetId.NVD_BUG): {"CVE-1", "CVE-2"},
    ("FF2.0", DataSetId.NVD_BUG): {"CVE-2", "CVE-3"},
    ("FF1.0", DataSetId.NVD_ADVICE): {"CVE-1"},
    ("FF2.0", DataSetId.NVD_ADVICE): {"CVE-3"},
    ("FF1.0", DataSetId.NVD_NBUG): {"100", "101"},
    ("FF2.0", DataSetId.NVD_NBUG): {"101", "102"},
    ("FF1.0", DataSetId.ADVICE_NBUG): {"100"},
    ("FF2.0", DataSetId.ADVICE_NBUG): {"101", "102"},
}


def test_criterion_09_dataset_joins(gate):
    with gate(9, "hand-enumerated joins on the 10-record fixture", 10.0):
        records = load_records(DATA / "joins_records.csv")
        assert len(records) == 10
        for (release, ds), expected in JOINS.items():
            got = build_dataset(records, ds, release)
            assert got == expected, (release, str(ds), sorted(got))
        for release in ("FF1.0", "FF2.0", "FF3.0"):
            nvd = build_dataset(records, DataSetId.NVD, release)
            assert build_dataset(records, DataSetId.NVD_BUG, release) <= nvd
            assert build_dataset(records, DataSetId.NVD_ADVICE, release) <= nvd
        assert all(not build_dataset(records, ds, "FF3.0") for ds in DataSetId)


# ---------------------------------------------------------------- 10

SHAPE_TRUTHS = (
    LogisticTruth(total=120, midpoint=12, rate=0.35),
    LogisticTruth(total=90, midpoint=10, rate=0.45),
    LogisticTruth(total=150, midpoint=14, rate=0.30),
    LogisticTruth(total=70, midpoint=9, rate=0.50),
    LogisticTruth(total=110, midpoint=11, rate=0.40),
)


@pytest.mark.slow
def test_criterion_10_logistic_truth_ranks_logistic_above_linear(gate):
    with gate(10, "on logistic synthetic corpora AML beats LN for tau 12..24, span 12", 300.0):
        models = list(ModelId)
        middle = Scenario("middle-age", 12, 24, 12)
        for seed in (0, 1, 2):
            samples = synthetic_samples(SHAPE_TRUTHS, 36, seed=seed)
            curves = fit_all(samples, models, FitConfig(seed=seed))
            analysis = PredictabilityAnalysis(curves, samples)
            graph = compare_models(analysis, models, middle)
            (pair,) = [r for r in graph.results
                       if {r.model_a, r.model_b} == {ModelId.AML, ModelId.LN}]
            winner = pair.model_a if pair.direction is Direction.A_BETTER else \
                pair.model_b if pair.direction is Direction.B_BETTER else None
            assert winner is ModelId.AML, (seed, pair)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
