"""Versioned JSON-lines stores for samples, curves and evaluated samples.

Each file starts with a header object ``{"format": ..., "version": ...}``
followed by one JSON object per line. Keys are sorted and floats use
``repr`` so a re-run writes identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .data import DataSetId, ObservedSample, SampleKey
from .errors import VDMError
from .fitting import FitFailure, FittedCurve
from .gof import EvaluatedSample
from .models import ModelId, ParamVector

VERSION = 1
SAMPLES = "vdmeval.samples"
CURVES = "vdmeval.curves"
EVALUATED = "vdmeval.evaluated"


class StoreError(VDMError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_store(path, kind: str, rows: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump({"format": kind, "version": VERSION}) + "\n")
        for row in rows:
            fh.write(_dump(row) + "\n")
            n += 1
    return n


def read_store(path, kind: str) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise StoreError(f"missing store {path}; run the earlier step first")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise StoreError(f"{path}: empty store")
    header = json.loads(lines[0])
    if header.get("format") != kind:
        raise StoreError(f"{path}: expected {kind}, found {header.get('format')}")
    if header.get("version") != VERSION:
        raise StoreError(f"{path}: unsupported version {header.get('version')}")
    return [json.loads(line) for line in lines[1:] if line.strip()]


def _key_fields(key: SampleKey) -> dict:
    return {"release": key.release, "dataset": str(key.dataset), "horizon": key.horizon}


def _key_of(row) -> SampleKey:
    return SampleKey(row["release"], DataSetId(row["dataset"]), int(row["horizon"]))


def sample_row(s: ObservedSample) -> dict:
    return {**_key_fields(s.key), "counts": list(s.counts)}


def sample_from_row(row) -> ObservedSample:
    return ObservedSample(row["release"], DataSetId(row["dataset"]),
                          int(row["horizon"]), tuple(row["counts"]))


def curve_row(c) -> dict:
    base = {"model": str(c.model), **_key_fields(c.sample_key)}
    if isinstance(c, FitFailure):
        return {**base, "error": c.error}
    return {**base, "params": list(c.params.values),
            "rss": c.residual_sum_squares, "converged": c.converged,
            "iterations": c.iterations}


def curve_from_row(row):
    model = ModelId(row["model"])
    key = _key_of(row)
    if "error" in row:
        return FitFailure(model, key, row["error"])
    return FittedCurve(model, ParamVector(model, tuple(row["params"])), key,
                       float(row["rss"]), bool(row["converged"]), int(row["iterations"]))


def evaluated_row(ev: EvaluatedSample) -> dict:
    return {"model": str(ev.curve.model), **_key_fields(ev.sample_key),
            "fitted_horizon": ev.curve.sample_key.horizon,
            "chi_square": ev.chi_square, "dof": ev.dof, "p_value": ev.p_value,
            "fit_class": str(ev.fit_class), "binning_start": ev.binning_start,
            "untestable": ev.untestable}


def save_samples(path, samples) -> int:
    return write_store(path, SAMPLES, (sample_row(s) for s in samples))


def load_samples(path) -> list[ObservedSample]:
    return [sample_from_row(r) for r in read_store(path, SAMPLES)]


def save_curves(path, curves) -> int:
    return write_store(path, CURVES, (curve_row(c) for c in curves))


def load_curves(path) -> list:
    return [curve_from_row(r) for r in read_store(path, CURVES)]


def save_evaluated(path, evaluated) -> int:
    return write_store(path, EVALUATED, (evaluated_row(e) for e in evaluated))
