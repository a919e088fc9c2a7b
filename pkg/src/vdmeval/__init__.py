"""Evaluation of vulnerability discovery models on monthly vulnerability series."""

__version__ = "0.1.0"

from .data import DataSetId, ObservedSample, SampleKey, VulnRecord  # noqa: E402
from .fitting import FitConfig, FittedCurve, fit, fit_all  # noqa: E402
from .gof import EvaluatedSample, FitClass, evaluate_sample  # noqa: E402
from .models import ModelId, ParamVector, evaluate, gradient  # noqa: E402

__all__ = [
    "DataSetId", "ObservedSample", "SampleKey", "VulnRecord",
    "FitConfig", "FittedCurve", "fit", "fit_all",
    "EvaluatedSample", "FitClass", "evaluate_sample",
    "ModelId", "ParamVector", "evaluate", "gradient",
]
