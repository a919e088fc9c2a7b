"""Vulnerability records, data-set joins and observed-sample extraction.

Record files
------------
CSV (header required) or JSON (an array of objects, or one object per line).
Fields:

``source``
    ``TADV`` (third-party advisory, e.g. NVD), ``ADV`` (vendor advisory)
    or ``BUG`` (vendor bug tracker).
``id``
    Identifier, unique within its source.
``date``
    Disclosure date, ISO-8601 (``YYYY-MM-DD``).
``releases``
    Semicolon-separated vulnerable release identifiers (JSON: list).
``refs``
    Semicolon-separated ``SOURCE:id`` references (JSON: list of strings).
``advisory_positions``
    Optional, ADV records only. Semicolon-separated integer group indices,
    one per entry of ``refs``, giving where each reference sits in the
    advisory. Without it, the position of a reference is its index in
    ``refs``.

Release manifest
----------------
CSV or JSON with fields ``release``, ``date``, ``product``, ``version``.
"""
from __future__ import annotations

import bisect
import calendar
import csv
import datetime as dt
import json
import warnings
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import (DuplicateRecordError, HorizonError,
                     MissingReleaseDateError, RecordParseError,
                     UnknownSourceError)

TAU_MIN = 6


class Source(str, Enum):
    TADV = "TADV"
    ADV = "ADV"
    BUG = "BUG"

    def __str__(self):
        return self.value


class DataSetId(str, Enum):
    NVD = "NVD"
    NVD_BUG = "NVD.Bug"
    NVD_ADVICE = "NVD.Advice"
    NVD_NBUG = "NVD.NBug"
    ADVICE_NBUG = "Advice.NBug"

    def __str__(self):
        return self.value

    @property
    def entry_source(self) -> Source:
        """Which source the entries of this data set come from."""
        if self in (DataSetId.NVD_NBUG, DataSetId.ADVICE_NBUG):
            return Source.BUG
        return Source.TADV


class Ref(NamedTuple):
    source: Source
    id: str

    def __str__(self):
        return f"{self.source}:{self.id}"


@dataclass(frozen=True)
class VulnRecord:
    source: Source
    id: str
    date: dt.date
    releases: frozenset = frozenset()
    refs: tuple = ()
    advisory_positions: tuple | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be nonempty")
        if Ref(self.source, self.id) in self.refs:
            raise ValueError(f"record {self.source}:{self.id} references itself")
        if self.advisory_positions is not None and \
                len(self.advisory_positions) != len(self.refs):
            raise ValueError("advisory_positions must align with refs")

    @property
    def key(self) -> Ref:
        return Ref(self.source, self.id)

    def position_of(self, ref: Ref) -> int | None:
        try:
            i = self.refs.index(ref)
        except ValueError:
            return None
        if self.advisory_positions is None:
            return i
        return self.advisory_positions[i]


@dataclass(frozen=True)
class Release:
    id: str
    date: dt.date
    product: str = ""
    version: str = ""


class SampleKey(NamedTuple):
    release: str
    dataset: DataSetId
    horizon: int


@dataclass(frozen=True)
class ObservedSample:
    """Monthly cumulative counts for months 1..horizon of one release."""

    release: str
    dataset: DataSetId
    horizon: int
    counts: tuple

    def __post_init__(self):
        object.__setattr__(self, "dataset", DataSetId(self.dataset))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.horizon < TAU_MIN:
            raise HorizonError(f"horizon {self.horizon} < {TAU_MIN}")
        if len(self.counts) != self.horizon:
            raise ValueError(
                f"expected {self.horizon} counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be nonnegative")
        if any(b < a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("counts must be nondecreasing")

    @property
    def key(self) -> SampleKey:
        return SampleKey(self.release, self.dataset, self.horizon)


# ---------------------------------------------------------------- loading

def _parse_date(text, where):
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError:
        raise RecordParseError(*where, f"invalid date {text!r}") from None


def _split(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [v.strip() for v in str(value).split(";") if v.strip()]


def _parse_row(row: Mapping, where) -> VulnRecord:
    raw_source = str(row.get("source") or "").strip()
    try:
        source = Source(raw_source)
    except ValueError:
        raise UnknownSourceError(
            f"{where[0]}:{where[1]}: unknown source {raw_source!r}") from None
    rid = str(row.get("id") or "").strip()
    if not rid:
        raise RecordParseError(*where, "missing id")
    if not str(row.get("date") or "").strip():
        raise RecordParseError(*where, "missing date")
    date = _parse_date(row["date"], where)
    refs = []
    for text in _split(row.get("refs")):
        src, sep, ref_id = text.partition(":")
        if not sep or not ref_id:
            raise RecordParseError(*where, f"malformed reference {text!r}")
        try:
            refs.append(Ref(Source(src.strip()), ref_id.strip()))
        except ValueError:
            raise UnknownSourceError(
                f"{where[0]}:{where[1]}: unknown source {src!r} in refs") from None
    positions = _split(row.get("advisory_positions"))
    try:
        pos = tuple(int(p) for p in positions) if positions else None
    except ValueError:
        raise RecordParseError(*where, "advisory_positions must be integers") from None
    try:
        return VulnRecord(source, rid, date, frozenset(_split(row.get("releases"))),
                          tuple(refs), pos)
    except ValueError as exc:
        raise RecordParseError(*where, str(exc)) from None


def _rows(path: Path, fmt: str):
    """Yield (line_number, mapping) pairs."""
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                yield reader.line_num, row
        return
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return
    if text.lstrip().startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RecordParseError(path, exc.lineno, exc.msg) from None
        for i, item in enumerate(items, 1):
            yield i, item
        return
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            yield i, json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordParseError(path, i, exc.msg) from None


def _detect_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    return "json" if path.suffix.lower() in (".json", ".jsonl") else "csv"


def load_records(path, format: str = "auto") -> list[VulnRecord]:
    """Read a record file; every row becomes one VulnRecord."""
    path = Path(path)
    fmt = _detect_format(path, format)
    seen = set()
    records = []
    for line, row in _rows(path, fmt):
        if not isinstance(row, Mapping):
            raise RecordParseError(path, line, "expected an object")
        rec = _parse_row(row, (path, line))
        if rec.key in seen:
            raise DuplicateRecordError(f"{path}:{line}: duplicate id {rec.key}")
        seen.add(rec.key)
        records.append(rec)
    return records


def load_manifest(path, format: str = "auto") -> dict[str, Release]:
    path = Path(path)
    fmt = _detect_format(path, format)
    out = {}
    for line, row in _rows(path, fmt):
        rid = str(row.get("release") or "").strip()
        if not rid:
            raise RecordParseError(path, line, "missing release")
        if not str(row.get("date") or "").strip():
            raise MissingReleaseDateError(f"{path}:{line}: release {rid} has no date")
        if rid in out:
            raise DuplicateRecordError(f"{path}:{line}: duplicate release {rid}")
        out[rid] = Release(rid, _parse_date(row["date"], (path, line)),
                           str(row.get("product") or ""), str(row.get("version") or ""))
    return out


# ---------------------------------------------------------------- joins

class RecordStore:
    """Immutable index over a record collection."""

    def __init__(self, records: Iterable[VulnRecord], max_group_distance: int = 1):
        self._by_key: dict[Ref, VulnRecord] = {}
        for rec in records:
            if rec.key in self._by_key:
                raise DuplicateRecordError(f"duplicate id {rec.key}")
            self._by_key[rec.key] = rec
        self.max_group_distance = max_group_distance
        self._tadv_by_release = defaultdict(list)
        for rec in self._by_key.values():
            if rec.source is Source.TADV:
                for r in rec.releases:
                    self._tadv_by_release[r].append(rec)

    def __len__(self):
        return len(self._by_key)

    def __contains__(self, ref):
        return ref in self._by_key

    def get(self, ref: Ref) -> VulnRecord | None:
        return self._by_key.get(ref)

    def of_source(self, source: Source) -> list[VulnRecord]:
        return [r for r in self._by_key.values() if r.source is source]

    def nvd_entries(self, release: str) -> list[VulnRecord]:
        return self._tadv_by_release.get(release, [])

    def _existing(self, refs, source):
        return [ref for ref in refs if ref.source is source and ref in self._by_key]

    def clustered(self, advisory: VulnRecord, bug: Ref, nvd: Ref) -> bool:
        """Whether the two references sit next together in the advisory."""
        pb = advisory.position_of(bug)
        pn = advisory.position_of(nvd)
        if pb is None or pn is None:
            return False
        return abs(pb - pn) <= self.max_group_distance


def build_dataset(records, dataset: DataSetId, release: str) -> frozenset[str]:
    """Entry ids of ``dataset`` for ``release`` (formal join definitions)."""
    store = records if isinstance(records, RecordStore) else RecordStore(records)
    dataset = DataSetId(dataset)
    nvd = store.nvd_entries(release)

    if dataset is DataSetId.NVD:
        return frozenset(e.id for e in nvd)
    if dataset is DataSetId.NVD_BUG:
        return frozenset(e.id for e in nvd if store._existing(e.refs, Source.BUG))
    if dataset is DataSetId.NVD_ADVICE:
        return frozenset(e.id for e in nvd if store._existing(e.refs, Source.ADV))
    if dataset is DataSetId.NVD_NBUG:
        return frozenset(ref.id for e in nvd for ref in store._existing(e.refs, Source.BUG))
    if dataset is DataSetId.ADVICE_NBUG:
        nvd_keys = {e.key for e in nvd}
        out = set()
        for adv in store.of_source(Source.ADV):
            hits = [ref for ref in adv.refs if ref in nvd_keys]
            if not hits:
                continue
            for bug in store._existing(adv.refs, Source.BUG):
                if any(store.clustered(adv, bug, h) for h in hits):
                    out.add(bug.id)
        return frozenset(out)
    raise ValueError(f"unknown data set {dataset!r}")


# ---------------------------------------------------------------- months

def add_months(day: dt.date, months: int) -> dt.date:
    """Calendar-month arithmetic with end-of-month clamping."""
    total = day.year * 12 + (day.month - 1) + months
    year, month0 = divmod(total, 12)
    last = calendar.monthrange(year, month0 + 1)[1]
    return dt.date(year, month0 + 1, min(day.day, last))


def month_index(release_date: dt.date, day: dt.date) -> int:
    """Month m such that day lies in (release + (m-1) months, release + m months].

    Returns 0 for dates on or before the release date.
    """
    if day <= release_date:
        return 0
    m = (day.year - release_date.year) * 12 + day.month - release_date.month
    m = max(m, 1)
    while add_months(release_date, m) < day:
        m += 1
    while m > 1 and add_months(release_date, m - 1) >= day:
        m -= 1
    return m


def whole_months(release_date: dt.date, until: dt.date) -> int:
    """Largest m with release_date + m months <= until."""
    if until < release_date:
        return 0
    m = (until.year - release_date.year) * 12 + until.month - release_date.month
    while m > 0 and add_months(release_date, m) > until:
        m -= 1
    return m


def monthly_cumulative(dates: Iterable[dt.date], release_date: dt.date,
                       months: int) -> list[int]:
    idx = sorted(month_index(release_date, d) for d in dates)
    return [bisect.bisect_right(idx, m) - bisect.bisect_right(idx, 0)
            for m in range(1, months + 1)]


def extract_sample(dates: Iterable[dt.date], release_date: dt.date, horizon: int,
                   release: str = "", dataset: DataSetId = DataSetId.NVD,
                   tau_min: int = TAU_MIN) -> ObservedSample:
    """Cumulative monthly counts of ``dates`` for months 1..horizon."""
    if horizon < tau_min:
        raise HorizonError(f"horizon {horizon} below minimum {tau_min}")
    counts = monthly_cumulative(dates, release_date, horizon)
    return ObservedSample(release, dataset, horizon, tuple(counts))


class SampleWarning(UserWarning):
    pass


def entry_dates(store: RecordStore, dataset: DataSetId, release: str) -> list[dt.date]:
    src = DataSetId(dataset).entry_source
    return [store.get(Ref(src, i)).date for i in sorted(build_dataset(store, dataset, release))]


def tau_max(release_date: dt.date, collection_date: dt.date) -> int:
    return whole_months(release_date, collection_date)


def enumerate_samples(records, releases: Iterable[str], datasets: Sequence[DataSetId],
                      collection_date: dt.date,
                      manifest: Mapping[str, Release | dt.date],
                      tau_min: int = TAU_MIN,
                      tau_max_cap: int | None = None) -> list[ObservedSample]:
    """One sample per (release, data set, horizon) with horizon in [tau_min, tau_max]."""
    if tau_min < TAU_MIN:
        raise HorizonError(f"tau_min {tau_min} below minimum {TAU_MIN}")
    store = records if isinstance(records, RecordStore) else RecordStore(records)
    out = []
    for release in releases:
        entry = manifest.get(release)
        if entry is None:
            raise MissingReleaseDateError(f"no release date for {release!r}")
        rdate = entry.date if isinstance(entry, Release) else entry
        top = tau_max(rdate, collection_date)
        if tau_max_cap is not None:
            top = min(top, tau_max_cap)
        if top < tau_min:
            warnings.warn(f"release {release} has only {top} months of data "
                          f"(< {tau_min}); no samples", SampleWarning, stacklevel=2)
            continue
        for ds in datasets:
            ds = DataSetId(ds)
            full = monthly_cumulative(entry_dates(store, ds, release), rdate, top)
            for tau in range(tau_min, top + 1):
                out.append(ObservedSample(release, ds, tau, tuple(full[:tau])))
    return out
