"""Compare models on synthetic releases whose discovery follows a logistic curve.

With an s-shaped ground truth the logistic model should come out ahead of
the linear one for middle-aged releases. Prints the predictability series
of both and the better-than graph.

    python scripts/run_synthetic_shape_check.py --models AML,LN,JW,RE
"""
import argparse
import time

from vdmeval.comparison import compare_models
from vdmeval.fitting import FitConfig, fit_all
from vdmeval.models import ModelId
from vdmeval.predictability import PredictabilityAnalysis, Scenario
from vdmeval.synthetic import LogisticTruth, synthetic_samples

TRUTHS = (
    LogisticTruth(total=120, midpoint=12, rate=0.35),
    LogisticTruth(total=90, midpoint=10, rate=0.45),
    LogisticTruth(total=150, midpoint=14, rate=0.30),
    LogisticTruth(total=70, midpoint=9, rate=0.50),
    LogisticTruth(total=110, midpoint=11, rate=0.40),
)
MIDDLE_AGE = Scenario("middle-age", 12, 24, 12)


def shape_check(models, months: int = 36, seed: int = 0, alpha: float = 0.05):
    samples = synthetic_samples(TRUTHS, months, seed=seed)
    curves = fit_all(samples, models, FitConfig(seed=seed))
    analysis = PredictabilityAnalysis([c for c in curves if hasattr(c, "params")], samples)
    graph = compare_models(analysis, models, MIDDLE_AGE, alpha)
    return analysis, graph


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", default="AML,LN")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--months", type=int, default=36)
    args = ap.parse_args()
    models = [ModelId(m) for m in args.models.split(",")]

    start = time.perf_counter()
    analysis, graph = shape_check(models, args.months, args.seed)
    for m in models:
        series = analysis.series(m, MIDDLE_AGE.span, MIDDLE_AGE.horizons)
        print(m, " ".join(f"{q:.2f}" for q in series.values))
    print(graph.to_dot("middle-age"))
    print(f"best: {', '.join(map(str, graph.best_models()))}")
    print(f"elapsed {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
