"""Trace parsing, per-run aggregation, power isolation, and dataset assembly.

Counter traces arrive as CSV dumps of cumulative event deltas; power traces
as timestamped current readings. A benchmark run is collapsed into a single
feature vector of average event rates over the window where both traces
overlap, matching the steady, repetitive workloads the models are trained on.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AggregationError, ConfigError, IsolationError, ParseError

WORKLOAD_TYPES = ("Rendering", "NeuralNetwork", "Compute", "Other")


class ClampWarning(UserWarning):
    """Isolated current fell below zero and was clamped to 0 mA."""


@dataclass(frozen=True)
class CounterTrace:
    """Per-dump counter deltas: counts[i] accumulated over (ts[i-1], ts[i]]."""

    counter_names: tuple[str, ...]
    timestamps_ms: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps_ms, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "timestamps_ms", ts)
        object.__setattr__(self, "counts", counts)
        if ts.ndim != 1 or counts.shape != (ts.size, len(self.counter_names)):
            raise ParseError("counter trace shape mismatch")
        if ts.size < 1:
            raise ParseError("no samples")
        if np.any(np.diff(ts) <= 0):
            raise ParseError("timestamps must be strictly increasing")
        if np.any(counts < 0):
            raise ParseError("negative count")


@dataclass(frozen=True)
class PowerTrace:
    """Timestamped current readings, optional constant supply voltage."""

    timestamps_ms: np.ndarray
    current_ma: np.ndarray
    voltage_v: float | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps_ms, dtype=float)
        cur = np.asarray(self.current_ma, dtype=float)
        object.__setattr__(self, "timestamps_ms", ts)
        object.__setattr__(self, "current_ma", cur)
        if ts.ndim != 1 or cur.shape != ts.shape or ts.size < 1:
            raise ParseError("power trace shape mismatch")
        if np.any(np.diff(ts) <= 0):
            raise ParseError("timestamps must be strictly increasing")
        if np.any(cur < 0):
            raise ParseError("negative current")


@dataclass(frozen=True)
class RunMeta:
    benchmark_name: str
    workload_type: str
    frequency_hz: float
    utilization: float | None = None

    def __post_init__(self):
        if self.workload_type not in WORKLOAD_TYPES:
            raise ConfigError(
                f"unknown workload type {self.workload_type!r}; "
                f"expected one of {WORKLOAD_TYPES}"
            )
        if not self.frequency_hz > 0:
            raise ConfigError("frequency must be > 0")
        if self.utilization is not None and not 0.0 <= self.utilization <= 1.0:
            raise ConfigError("utilization must lie in [0, 1]")


@dataclass(frozen=True)
class RunRecord:
    """One benchmark run: average event rates plus measured/isolated current."""

    meta: RunMeta
    rates: dict[str, float]
    total_current: float
    target_current: float


@dataclass(frozen=True)
class Dataset:
    records: list[RunRecord]
    counter_names: tuple[str, ...]

    def __post_init__(self):
        for rec in self.records:
            if tuple(rec.rates.keys()) != self.counter_names:
                raise ConfigError(
                    f"run {rec.meta.benchmark_name!r} does not share the "
                    "dataset counter ordering"
                )

    def __len__(self) -> int:
        return len(self.records)

    def rates_matrix(self) -> np.ndarray:
        return np.array(
            [[rec.rates[c] for c in self.counter_names] for rec in self.records],
            dtype=float,
        )

    def column(self, counter: str) -> np.ndarray:
        return np.array([rec.rates[counter] for rec in self.records], dtype=float)

    def targets(self) -> np.ndarray:
        return np.array([rec.target_current for rec in self.records], dtype=float)


def _parse_rows(text: str, expected_first: str):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file") from None
    header = [h.strip() for h in header]
    if not header or header[0] != expected_first:
        raise ParseError(f"line 1: expected '{expected_first}' as first column")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # blank line
        if len(row) != len(header):
            raise ParseError(
                f"line {lineno}: column mismatch "
                f"(expected {len(header)} values, got {len(row)})"
            )
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise ParseError(f"line {lineno}: malformed row {row!r}") from None
        rows.append((lineno, values))
    if not rows:
        raise ParseError("no samples")
    return header, rows


def _check_monotone(rows) -> None:
    prev = None
    for lineno, values in rows:
        if prev is not None and values[0] <= prev:
            raise ParseError(f"non-monotone timestamp at line {lineno}")
        prev = values[0]


def parse_counter_trace(text: str) -> CounterTrace:
    """Parse counter-trace CSV: header ``ts_ms,<c1>,<c2>,...``, delta counts per row."""
    header, rows = _parse_rows(text, "ts_ms")
    if len(header) < 2:
        raise ParseError("line 1: counter trace needs at least one counter column")
    _check_monotone(rows)
    for lineno, values in rows:
        if any(v < 0 for v in values[1:]):
            raise ParseError(f"line {lineno}: negative count")
    ts = np.array([v[0] for _, v in rows])
    counts = np.array([v[1:] for _, v in rows])
    return CounterTrace(tuple(header[1:]), ts, counts)


def parse_power_trace(text: str) -> PowerTrace:
    """Parse power-trace CSV: header ``ts_ms,current_ma[,voltage_v]``."""
    header, rows = _parse_rows(text, "ts_ms")
    if len(header) not in (2, 3) or header[1] != "current_ma":
        raise ParseError("line 1: expected header ts_ms,current_ma[,voltage_v]")
    if len(header) == 3 and header[2] != "voltage_v":
        raise ParseError("line 1: third column must be voltage_v")
    _check_monotone(rows)
    for lineno, values in rows:
        if values[1] < 0:
            raise ParseError(f"line {lineno}: negative current")
    ts = np.array([v[0] for _, v in rows])
    cur = np.array([v[1] for _, v in rows])
    voltage = None
    if len(header) == 3:
        volts = np.array([v[2] for _, v in rows])
        if np.any(np.abs(volts - volts[0]) > 1e-6 * max(1.0, abs(volts[0]))):
            raise ParseError("voltage column is not constant")
        voltage = float(volts[0])
    return PowerTrace(ts, cur, voltage)


def aggregate_run(counters: CounterTrace, power: PowerTrace, meta: RunMeta) -> RunRecord:
    """Collapse one run's traces into average event rates and mean current.

    Rates are total counts inside the overlap window divided by its duration;
    counter intervals that straddle a window edge contribute pro-rata
    (uniform accrual within an interval). Current is the time-weighted mean
    of a left-continuous step function through the power samples, since the
    power sampler and the counter dumper tick at different periods. The
    first counter row only opens the window; its counts have no interval.
    """
    c_ts = counters.timestamps_ms
    p_ts = power.timestamps_ms
    w0 = max(c_ts[0], p_ts[0])
    w1 = min(c_ts[-1], p_ts[-1])
    if w1 <= w0:
        raise AggregationError("no temporal overlap")
    if w1 - w0 < 1000.0:
        raise AggregationError(
            f"overlap shorter than 1 second ({(w1 - w0) / 1000.0:.3f} s)"
        )
    duration_s = (w1 - w0) / 1000.0

    # Counter intervals: (c_ts[i-1], c_ts[i]] carrying counts[i].
    starts = c_ts[:-1]
    ends = c_ts[1:]
    frac = (np.minimum(ends, w1) - np.maximum(starts, w0)) / (ends - starts)
    frac = np.clip(frac, 0.0, 1.0)
    totals = frac @ counters.counts[1:]
    rates = totals / duration_s

    # Current step segments: sample j holds on [p_ts[j], p_ts[j+1]), last to w1.
    seg_ends = np.append(p_ts[1:], w1)
    dur = np.maximum(0.0, np.minimum(seg_ends, w1) - np.maximum(p_ts, w0))
    total_current = float(np.dot(power.current_ma, dur) / (w1 - w0))

    rate_map = dict(zip(counters.counter_names, rates.tolist()))
    return RunRecord(
        meta=meta,
        rates=rate_map,
        total_current=total_current,
        target_current=total_current,
    )


def _aux_prediction(aux_model, aux_rates: Mapping[str, float]) -> float:
    from .features import evaluate_spec_on_rates  # deferred: features imports us

    total = aux_model.intercept
    for spec, coef in zip(aux_model.features, aux_model.coefficients):
        total += coef * evaluate_spec_on_rates(spec, aux_rates)
    return total


def _isolated_target(record, base_current, aux_model, aux_rates):
    if base_current < 0:
        raise IsolationError("base current must be >= 0")
    aux = 0.0
    if aux_model is not None:
        if aux_rates is None:
            raise IsolationError("aux model given but no aux rates")
        aux = _aux_prediction(aux_model, aux_rates)
    target = record.total_current - base_current - aux
    clamped = target < 0.0
    return (0.0 if clamped else target), clamped


def isolate_power(
    record: RunRecord,
    base_current: float,
    aux_model=None,
    aux_rates: Mapping[str, float] | None = None,
) -> RunRecord:
    """Subtract base power and an optional auxiliary-component model prediction.

    Measurement noise near the base level can push the difference below
    zero; the result is clamped at 0 mA with a ClampWarning rather than
    rejected.
    """
    target, clamped = _isolated_target(record, base_current, aux_model, aux_rates)
    if clamped:
        warnings.warn(
            f"run {record.meta.benchmark_name!r}: isolated current negative, "
            "clamped to 0 mA",
            ClampWarning,
            stacklevel=2,
        )
    return replace(record, target_current=target)


def isolate_dataset(
    ds: Dataset,
    base_current: float,
    aux_model=None,
    aux_rates_list: Sequence[Mapping[str, float]] | None = None,
) -> tuple[Dataset, int]:
    """Isolate every record; returns the new dataset and the clamp count."""
    if aux_model is not None and aux_rates_list is not None:
        if len(aux_rates_list) != len(ds.records):
            raise IsolationError("aux rates list length must match record count")
    records = []
    n_clamped = 0
    for i, rec in enumerate(ds.records):
        rates = aux_rates_list[i] if aux_rates_list is not None else None
        target, clamped = _isolated_target(rec, base_current, aux_model, rates)
        n_clamped += clamped
        records.append(replace(rec, target_current=target))
    if n_clamped:
        warnings.warn(
            f"{n_clamped} of {len(records)} isolated currents clamped to 0 mA",
            ClampWarning,
            stacklevel=2,
        )
    return Dataset(records, ds.counter_names), n_clamped


def split_dataset(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-and-split; train receives ceil(n * train_fraction) records."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train fraction must lie strictly between 0 and 1")
    n = len(ds.records)
    if n < 3:
        raise ConfigError("need at least 3 records to split")
    perm = np.random.default_rng(seed).permutation(n)
    # The epsilon guards against 300 * (2/3) landing a hair above 200.
    n_train = math.ceil(n * train_fraction - 1e-9)
    train_idx = perm[:n_train]
    test_idx = perm[n_train:]
    train = Dataset([ds.records[i] for i in train_idx], ds.counter_names)
    test = Dataset([ds.records[i] for i in test_idx], ds.counter_names)
    return train, test


@dataclass(frozen=True)
class ManifestRun:
    counter_file: str
    power_file: str
    benchmark: str
    workload_type: str
    frequency_hz: float
    utilization: float | None = None
    aux_counter_file: str | None = None


def _manifest_run(entry: dict, index: int) -> ManifestRun:
    try:
        return ManifestRun(
            counter_file=entry["counter_file"],
            power_file=entry["power_file"],
            benchmark=entry["benchmark"],
            workload_type=entry["workload_type"],
            frequency_hz=float(entry["frequency_hz"]),
            utilization=(
                float(entry["utilization"]) if entry.get("utilization") is not None else None
            ),
            aux_counter_file=entry.get("aux_counter_file"),
        )
    except KeyError as exc:
        raise ParseError(f"manifest run {index}: missing field {exc}") from None


def load_manifest(path) -> tuple[Dataset, list[dict[str, float]] | None]:
    """Build a dataset from a JSON run manifest.

    Returns the dataset plus, when any run lists an ``aux_counter_file``,
    a parallel list of per-run auxiliary counter rates (for CPU-model
    subtraction during isolation).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest {path}: {exc}") from None
    runs = doc.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ParseError(f"manifest {path}: expected a non-empty 'runs' list")

    base_dir = path.parent
    records: list[RunRecord] = []
    aux_rates: list[dict[str, float]] = []
    have_aux = False
    counter_names: tuple[str, ...] | None = None
    for i, entry in enumerate(runs):
        run = _manifest_run(entry, i)
        counter_path = base_dir / run.counter_file
        power_path = base_dir / run.power_file
        if not counter_path.is_file():
            raise FileNotFoundError(f"counter trace not found: {counter_path}")
        if not power_path.is_file():
            raise FileNotFoundError(f"power trace not found: {power_path}")
        trace = parse_counter_trace(counter_path.read_text())
        power = parse_power_trace(power_path.read_text())
        meta = RunMeta(run.benchmark, run.workload_type, run.frequency_hz, run.utilization)
        record = aggregate_run(trace, power, meta)
        if counter_names is None:
            counter_names = trace.counter_names
        elif trace.counter_names != counter_names:
            raise ParseError(
                f"manifest run {i} ({run.benchmark!r}): counter columns differ "
                "from the first run"
            )
        records.append(record)
        if run.aux_counter_file is not None:
            have_aux = True
            aux_path = base_dir / run.aux_counter_file
            if not aux_path.is_file():
                raise FileNotFoundError(f"aux counter trace not found: {aux_path}")
            aux_trace = parse_counter_trace(aux_path.read_text())
            aux_record = aggregate_run(aux_trace, power, meta)
            aux_rates.append(aux_record.rates)
        else:
            aux_rates.append({})
    assert counter_names is not None
    return Dataset(records, counter_names), (aux_rates if have_aux else None)
