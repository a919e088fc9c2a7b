"""Command-line driver: ingest -> fit -> quality -> predict -> compare.

Every step reads the stores written by the previous one from ``--out`` and
writes its own, so steps can be re-run independently.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import logging
import statistics
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .comparison import DEFAULT_ALPHA, compare_models
from .data import (TAU_MIN, DataSetId, RecordStore, SampleWarning,
                   enumerate_samples, load_manifest, load_records, tau_max)
from .errors import IngestError, InsufficientDataError, VDMError
from .fitting import FitConfig, FitFailure, fit_all
from .gof import FitClass, evaluate_sample
from .models import ModelId
from .predictability import SCENARIOS, PredictabilityAnalysis, Scenario
from .quality import (DEFAULT_OMEGA, DEFAULT_WINDOW, Period, QualitySeries,
                      baseline_verdict, moving_average, overall_quality,
                      summarize_period, temporal_quality_series)
from .store import (StoreError, load_curves, load_samples, save_curves,
                    save_evaluated, save_samples)

log = logging.getLogger("vdmeval")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


@dataclass
class RunConfig:
    out: str
    records: str | None = None
    manifest: str | None = None
    record_format: str = "auto"
    collection_date: str | None = None
    releases: list = field(default_factory=list)
    datasets: list = field(default_factory=lambda: [str(d) for d in DataSetId])
    models: list = field(default_factory=lambda: [str(m) for m in ModelId])
    omega: float = DEFAULT_OMEGA
    window: int = DEFAULT_WINDOW
    scenarios: list = field(default_factory=lambda: list(SCENARIOS))
    delta: int | None = None
    obs_window: str | None = None
    tau_min: int = TAU_MIN
    tau_max_cap: int = 72
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    workers: int = 1
    max_iterations: int = 200
    multistart: int = 8
    cluster_distance: int = 1

    def validate(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"--omega must lie in [0, 1], got {self.omega}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"--window must be a positive odd integer, got {self.window}")
        if self.tau_min < TAU_MIN:
            raise ValueError(f"--tau-min must be >= {TAU_MIN}")
        for name in ("records", "manifest"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"--{name}: no such file {path}")
        for ds in self.datasets:
            DataSetId(ds)
        for m in self.models:
            ModelId(m)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def fit_config(self) -> FitConfig:
        return FitConfig(max_iterations=self.max_iterations,
                         multistart_count=self.multistart, seed=self.seed)

    def scenario_list(self) -> list[Scenario]:
        out = []
        for name in self.scenarios:
            if name not in SCENARIOS:
                raise ValueError(f"unknown scenario {name!r}; "
                                 f"choose from {', '.join(SCENARIOS)}")
            sc = SCENARIOS[name]
            first, last = sc.obs_first, sc.obs_last
            if self.obs_window:
                a, _, b = self.obs_window.partition(":")
                first, last = int(a), int(b)
            span = sc.span if self.delta is None else self.delta
            out.append(Scenario(sc.name, first, last, span))
        return out


# ------------------------------------------------------------------ helpers

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def _echo_config(cfg: RunConfig, command: str):
    path = cfg.out_dir / "run_manifest.json"
    doc = json.loads(path.read_text()) if path.exists() else {}
    doc["vdmeval_version"] = __version__
    doc.setdefault("commands", {})[command] = asdict(cfg)
    _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _series_csv(series: QualitySeries, window: int, label: str) -> str:
    ma = {}
    if len(series) >= window:
        ma = moving_average(series, window).as_dict()
    rows = [(t, f"{q:.6f}", _fmt(ma.get(t))) for t, q in series.points]
    return _csv_text(["tau", label, f"ma{window}"], rows)


def _fitted(curves):
    return [c for c in curves if not isinstance(c, FitFailure)]


# ------------------------------------------------------------------ commands

def cmd_ingest(cfg: RunConfig) -> int:
    if cfg.records is None or cfg.manifest is None:
        raise IngestError("ingest needs --records and --manifest")
    if cfg.collection_date is None:
        raise IngestError("ingest needs --collection-date")
    collection = dt.date.fromisoformat(cfg.collection_date)
    records = load_records(cfg.records, cfg.record_format)
    manifest = load_manifest(cfg.manifest)
    releases = cfg.releases or sorted(manifest)
    store = RecordStore(records, cfg.cluster_distance)
    if not records:
        # nothing was collected, so there is no series to observe
        log.warning("record file %s is empty; writing an empty sample store", cfg.records)
        samples = []
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SampleWarning)
            samples = enumerate_samples(store, releases, cfg.datasets, collection,
                                        manifest, cfg.tau_min, cfg.tau_max_cap)
        for w in caught:
            log.warning("%s", w.message)
    n = save_samples(cfg.out_dir / "samples.jsonl", samples)
    lines = []
    for r in releases:
        rel = manifest.get(r)
        top = tau_max(rel.date, collection) if rel else 0
        lines.append(f"{r}\ttau_max={top}\tsamples={sum(s.release == r for s in samples)}")
    summary = "\n".join(lines)
    _write(cfg.out_dir / "ingest_summary.txt", summary + f"\ntotal_samples={n}\n")
    print(summary)
    print(f"wrote {n} samples")
    _echo_config(cfg, "ingest")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    samples = load_samples(cfg.out_dir / "samples.jsonl")
    models = [ModelId(m) for m in cfg.models]
    curves = fit_all(samples, models, cfg.fit_config(), workers=cfg.workers)
    save_curves(cfg.out_dir / "curves.jsonl", curves)
    failed = sum(isinstance(c, FitFailure) for c in curves)
    stalled = sum(1 for c in _fitted(curves) if not c.converged)
    print(f"fitted {len(curves)} curves ({failed} failed, {stalled} not converged)")
    _echo_config(cfg, "fit")
    return EXIT_OK


def _evaluate(cfg: RunConfig):
    samples = {s.key: s for s in load_samples(cfg.out_dir / "samples.jsonl")}
    curves = _fitted(load_curves(cfg.out_dir / "curves.jsonl"))
    wanted = {ModelId(m) for m in cfg.models}
    curves = [c for c in curves if c.model in wanted]
    return samples, curves


def cmd_quality(cfg: RunConfig) -> int:
    samples, curves = _evaluate(cfg)
    evaluated = [evaluate_sample(c, samples[c.sample_key]) for c in curves]
    save_evaluated(cfg.out_dir / "evaluated.jsonl", evaluated)
    qdir = cfg.out_dir / "quality"
    report = [f"omega={cfg.omega}", f"window={cfg.window}"]
    period_rows = []
    for m in sorted({c.model for c in curves}):
        mine = [e for e in evaluated if e.curve.model == m]
        counts = {cls: sum(e.fit_class is cls for e in mine) for cls in FitClass}
        untestable = sum(e.untestable for e in mine)
        q = overall_quality(mine, cfg.omega)
        report.append(f"{m}\tQ={q:.4f}\tgood={counts[FitClass.GOOD]}"
                      f"\tinconclusive={counts[FitClass.INCONCLUSIVE]}"
                      f"\tnot={counts[FitClass.NOT]}\tuntestable={untestable}"
                      f"\ttotal={len(mine)}")
        series = temporal_quality_series(mine, cfg.omega, model=m)
        _write(qdir / f"series_{m}.csv", _series_csv(series, cfg.window, "quality"))
        for period in Period:
            if not any(t in period for t in series.horizons):
                continue
            s = summarize_period(series, period)
            period_rows.append((str(m), period.label, len(s.values), f"{s.median:.6f}",
                                s.verdict, f"{s.p_above:.6g}", f"{s.p_below:.6g}"))
    _write(qdir / "periods.csv", _csv_text(
        ["model", "period", "n_horizons", "median", "verdict", "p_above", "p_below"],
        period_rows))
    _write(qdir / "report.txt", "\n".join(report) + "\n")
    print("\n".join(report))
    _echo_config(cfg, "quality")
    return EXIT_OK


def _analysis(cfg: RunConfig):
    samples, curves = _evaluate(cfg)
    top = min(cfg.tau_max_cap, max((k.horizon for k in samples), default=0))
    return PredictabilityAnalysis(curves, samples, cfg.omega), top


def cmd_predict(cfg: RunConfig) -> int:
    analysis, top = _analysis(cfg)
    models = [m for m in (ModelId(x) for x in cfg.models) if m in analysis.models()]
    for sc in cfg.scenario_list():
        pdir = cfg.out_dir / "predict" / sc.name
        table = []
        taus = [t for t in sc.horizons if t <= top]
        for m in models:
            series = analysis.series(m, sc.span, taus)
            _write(pdir / f"series_{m}.csv",
                   _series_csv(series, cfg.window, "predictability"))
            if len(series):
                vals = series.values
                verdict, _, _ = baseline_verdict(vals)
                table.append((str(m), sc.obs_first, sc.obs_last, sc.span, len(series),
                              f"{statistics.median(vals):.6f}",
                              f"{statistics.fmean(vals):.6f}", verdict))
            else:
                table.append((str(m), sc.obs_first, sc.obs_last, sc.span, 0, "", "", "n/a"))
        _write(pdir / "table.csv", _csv_text(
            ["model", "obs_first", "obs_last", "delta", "n_horizons", "median",
             "mean", "verdict"], table))
        excluded = sorted((str(m), t, d, n) for (m, t, d), n in analysis.excluded.items()
                          if n and t in sc.horizons and d <= sc.span)
        _write(pdir / "excluded_pairs.csv",
               _csv_text(["model", "tau", "delta", "excluded"], excluded))
        print(f"{sc.name}: horizons {sc.obs_first}-{sc.obs_last}, delta={sc.span}")
    _echo_config(cfg, "predict")
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    analysis, top = _analysis(cfg)
    models = [m for m in (ModelId(x) for x in cfg.models) if m in analysis.models()]
    for sc in cfg.scenario_list():
        cdir = cfg.out_dir / "compare" / sc.name
        header = (f"scenario={sc.name} horizons={sc.obs_first}-{sc.obs_last} "
                  f"delta={sc.span}")
        try:
            graph = compare_models(analysis, models, sc, cfg.alpha, tau_max=top)
        except InsufficientDataError as exc:
            _write(cdir / "report.txt", f"{header}\nskipped: {exc}\n")
            print(f"{header}\nskipped: {exc}")
            continue
        _write(cdir / "graph.dot", graph.to_dot(f"{sc.name}"))
        rows = [(str(r.model_a), str(r.model_b), r.basis.value, r.direction.value,
                 f"{r.p_values[0]:.6g}", f"{r.p_values[1]:.6g}",
                 f"{r.alpha_effective:.6g}") for r in graph.results]
        _write(cdir / "comparison.csv", _csv_text(
            ["model_a", "model_b", "basis", "direction", "p_predictability",
             "p_quality", "alpha_effective"], rows))
        best = ", ".join(str(m) for m in graph.best_models()) if graph.edges else "none"
        report = [header,
                  f"models={len(models)} alpha_effective={graph.alpha_effective:.6g}",
                  f"edges={len(graph.edges)}", f"best={best}"]
        report += [f"{e.source} -> {e.target} ({e.style})" for e in graph.edges]
        _write(cdir / "report.txt", "\n".join(report) + "\n")
        print("\n".join(report))
    _echo_config(cfg, "compare")
    return EXIT_OK


def cmd_run(cfg: RunConfig) -> int:
    for step in (cmd_ingest, cmd_fit, cmd_quality, cmd_predict, cmd_compare):
        code = step(cfg)
        if code != EXIT_OK:
            return code
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "fit": cmd_fit, "quality": cmd_quality,
            "predict": cmd_predict, "compare": cmd_compare, "run": cmd_run}


# ------------------------------------------------------------------ parsing

def _csv_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for stores and reports")
    common.add_argument("--config", help="JSON file whose keys mirror the flags")
    common.add_argument("--records")
    common.add_argument("--manifest")
    common.add_argument("--format", dest="record_format", choices=["auto", "csv", "json"])
    common.add_argument("--collection-date", help="ISO date the data was collected")
    common.add_argument("--releases", type=_csv_list)
    common.add_argument("--datasets", type=_csv_list)
    common.add_argument("--models", type=_csv_list)
    common.add_argument("--omega", type=float)
    common.add_argument("--window", type=int)
    common.add_argument("--scenario", dest="scenarios", type=_csv_list,
                        help=f"comma list of {', '.join(SCENARIOS)}")
    common.add_argument("--delta", type=int, help="override the scenario's span")
    common.add_argument("--obs-window", help="override the observation window, FIRST:LAST")
    common.add_argument("--tau-min", type=int)
    common.add_argument("--tau-max-cap", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--max-iterations", type=int)
    common.add_argument("--multistart", type=int)
    common.add_argument("--cluster-distance", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="vdm-eval", description="Evaluate vulnerability discovery models.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        values.update(json.loads(Path(ns.config).read_text()))
    for key in RunConfig.__dataclass_fields__:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    if "out" not in values:
        raise ValueError("--out is required")
    unknown = set(values) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return COMMANDS[ns.command](cfg)
    except (IngestError, StoreError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VDMError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except AssertionError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
