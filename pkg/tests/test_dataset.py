import json

import numpy as np
import pytest

from pmcpower.dataset import (
    ClampWarning,
    CounterTrace,
    PowerTrace,
    RunMeta,
    aggregate_run,
    isolate_dataset,
    isolate_power,
    load_manifest,
    parse_counter_trace,
    parse_power_trace,
    split_dataset,
)
from pmcpower.errors import AggregationError, ConfigError, IsolationError, ParseError
from pmcpower.features import base
from pmcpower.model import PowerModel

from conftest import make_dataset

META = RunMeta("bench", "Compute", 471e6)


class TestParseCounterTrace:
    def test_minimal_well_formed(self):
        trace = parse_counter_trace("ts_ms,c1,c2\n0,0,0\n1000,8,1\n")
        assert trace.counter_names == ("c1", "c2")
        assert trace.timestamps_ms.tolist() == [0.0, 1000.0]
        assert trace.counts.tolist() == [[0.0, 0.0], [8.0, 1.0]]

    def test_non_monotone_timestamp_names_line(self):
        with pytest.raises(ParseError, match="non-monotone timestamp at line 3"):
            parse_counter_trace("ts_ms,c1\n1000,5\n500,5\n")

    def test_column_mismatch(self):
        with pytest.raises(ParseError, match="column mismatch"):
            parse_counter_trace("ts_ms,c1,c2\n0,1\n")

    def test_malformed_value_names_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_counter_trace("ts_ms,c1\n0,1\n1000,oops\n")

    def test_negative_count_rejected(self):
        with pytest.raises(ParseError, match="negative count"):
            parse_counter_trace("ts_ms,c1\n0,1\n1000,-2\n")

    def test_bad_header(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_counter_trace("time,c1\n0,1\n")

    def test_empty_body(self):
        with pytest.raises(ParseError, match="no samples"):
            parse_counter_trace("ts_ms,c1\n")


class TestParsePowerTrace:
    def test_basic(self):
        trace = parse_power_trace("ts_ms,current_ma\n0,100\n1000,150\n")
        assert trace.current_ma.tolist() == [100.0, 150.0]
        assert trace.voltage_v is None

    def test_voltage_column(self):
        trace = parse_power_trace("ts_ms,current_ma,voltage_v\n0,100,3.86\n1000,150,3.86\n")
        assert trace.voltage_v == pytest.approx(3.86)

    def test_inconsistent_voltage(self):
        with pytest.raises(ParseError, match="voltage"):
            parse_power_trace("ts_ms,current_ma,voltage_v\n0,100,3.86\n1000,150,4.2\n")

    def test_negative_current(self):
        with pytest.raises(ParseError, match="negative current"):
            parse_power_trace("ts_ms,current_ma\n0,-5\n1000,10\n")


def counter_trace(ts, rows, names=("c1",)):
    return CounterTrace(tuple(names), np.array(ts, float), np.array(rows, float))


def power_trace(ts, currents):
    return PowerTrace(np.array(ts, float), np.array(currents, float))


class TestAggregateRun:
    def test_rate_definition(self):
        counters = counter_trace([0, 1000, 2000], [[0], [250], [350]])
        power = power_trace([0, 2000], [150, 150])
        record = aggregate_run(counters, power, META)
        assert record.rates["c1"] == pytest.approx(300.0)  # 600 events over 2 s

    def test_constant_current(self):
        counters = counter_trace([0, 2000], [[0], [10]])
        power = power_trace([0, 1000, 2000], [150, 150, 150])
        record = aggregate_run(counters, power, META)
        assert record.total_current == pytest.approx(150.0)
        assert record.target_current == record.total_current

    def test_time_weighted_segments(self):
        # 100 mA for 1 s then 200 mA for 3 s -> 175 mA over 4 s
        counters = counter_trace([0, 4000], [[0], [40]])
        power = power_trace([0, 1000, 4000], [100, 200, 200])
        record = aggregate_run(counters, power, META)
        assert record.total_current == pytest.approx(175.0)

    def test_partial_overlap_prorates_counts(self):
        # power covers [1000, 3000]; the 2 s counter interval straddles it
        counters = counter_trace([0, 2000, 4000], [[0], [100], [100]])
        power = power_trace([1000, 3000], [50, 50])
        record = aggregate_run(counters, power, META)
        # half of each interval falls inside the window: 100 events over 2 s
        assert record.rates["c1"] == pytest.approx(50.0)

    def test_no_overlap(self):
        counters = counter_trace([0, 1000], [[0], [10]])
        power = power_trace([5000, 6000], [100, 100])
        with pytest.raises(AggregationError, match="no temporal overlap"):
            aggregate_run(counters, power, META)

    def test_sub_second_overlap_rejected(self):
        counters = counter_trace([0, 1500], [[0], [10]])
        power = power_trace([900, 2000], [100, 100])
        with pytest.raises(AggregationError, match="overlap"):
            aggregate_run(counters, power, META)

    def test_split_sample_invariance(self):
        power = power_trace([0, 3000], [77, 77])
        whole = aggregate_run(
            counter_trace([0, 1000, 2000, 3000], [[0], [120], [30], [600]]),
            power,
            META,
        )
        # split the (1000, 2000] interval at 1500 ms into 12 + 18 = 30 events
        split = counter_trace(
            [0, 1000, 1500, 2000, 3000], [[0], [120], [12], [18], [600]]
        )
        halves = aggregate_run(split, power, META)
        assert halves.rates["c1"] == pytest.approx(whole.rates["c1"], rel=1e-12)


class TestIsolatePower:
    def record(self, total=500.0):
        return make_dataset({"c1": [1.0]}, [total]).records[0]

    def test_base_subtraction(self):
        out = isolate_power(self.record(500.0), 100.0)
        assert out.target_current == pytest.approx(400.0)

    def test_aux_model_subtraction(self):
        aux = PowerModel((base("cpu_c"),), (1.0,), 50.0)
        out = isolate_power(self.record(500.0), 100.0, aux, {"cpu_c": 100.0})
        assert out.target_current == pytest.approx(250.0)

    def test_clamp_to_zero_warns(self):
        with pytest.warns(ClampWarning):
            out = isolate_power(self.record(90.0), 100.0)
        assert out.target_current == 0.0

    def test_negative_base_rejected(self):
        with pytest.raises(IsolationError):
            isolate_power(self.record(), -1.0)

    def test_missing_aux_rate_names_counter(self):
        aux = PowerModel((base("cpu_c"),), (1.0,), 50.0)
        with pytest.raises(Exception, match="cpu_c"):
            isolate_power(self.record(), 0.0, aux, {"other": 1.0})

    def test_isolate_dataset_counts_clamps(self):
        ds = make_dataset({"c1": [1.0, 2.0, 3.0]}, [500.0, 90.0, 80.0])
        with pytest.warns(ClampWarning):
            out, n_clamped = isolate_dataset(ds, 100.0)
        assert n_clamped == 2
        assert [r.target_current for r in out.records] == [400.0, 0.0, 0.0]
        assert all(r.target_current >= 0 for r in out.records)


class TestSplitDataset:
    def dataset(self, n):
        return make_dataset({"c1": np.arange(n) + 1.0}, np.arange(n) + 10.0)

    def test_counts_9_records(self):
        train, test = split_dataset(self.dataset(9), 2 / 3, seed=7)
        assert (len(train.records), len(test.records)) == (6, 3)

    def test_counts_300_records(self):
        train, test = split_dataset(self.dataset(300), 2 / 3, seed=7)
        assert (len(train.records), len(test.records)) == (200, 100)

    def test_deterministic(self):
        ds = self.dataset(20)
        a = split_dataset(ds, 2 / 3, seed=42)
        b = split_dataset(ds, 2 / 3, seed=42)
        names_a = [r.meta.benchmark_name for r in a[0].records]
        names_b = [r.meta.benchmark_name for r in b[0].records]
        assert names_a == names_b

    def test_partition(self):
        ds = self.dataset(17)
        train, test = split_dataset(ds, 0.55, seed=3)
        got = sorted(
            r.meta.benchmark_name for r in train.records + test.records
        )
        assert got == sorted(r.meta.benchmark_name for r in ds.records)
        overlap = {r.meta.benchmark_name for r in train.records} & {
            r.meta.benchmark_name for r in test.records
        }
        assert not overlap

    def test_too_few_records(self):
        with pytest.raises(ConfigError):
            split_dataset(self.dataset(2), 0.5, seed=0)

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            split_dataset(self.dataset(9), 1.0, seed=0)


class TestManifest:
    def write_run(self, tmp_path, i, rate=100.0, current=250.0):
        counter = tmp_path / f"run{i}.counters.csv"
        power = tmp_path / f"run{i}.power.csv"
        counter.write_text(
            "ts_ms,c1,c2\n0,0,0\n"
            + "".join(f"{t * 1000},{rate},{rate * 2}\n" for t in range(1, 6))
        )
        power.write_text(
            "ts_ms,current_ma\n" + "".join(f"{t * 1000},{current}\n" for t in range(6))
        )
        return {
            "counter_file": counter.name,
            "power_file": power.name,
            "benchmark": f"bench-{i}",
            "workload_type": "Compute",
            "frequency_hz": 471e6,
        }

    def test_load(self, tmp_path):
        runs = [self.write_run(tmp_path, i, rate=100.0 + i) for i in range(3)]
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"runs": runs}))
        ds, aux = load_manifest(manifest)
        assert aux is None
        assert len(ds.records) == 3
        assert ds.counter_names == ("c1", "c2")
        assert ds.records[1].rates["c1"] == pytest.approx(101.0)
        assert ds.records[0].total_current == pytest.approx(250.0)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="manifest not found"):
            load_manifest(tmp_path / "nope.json")

    def test_mismatched_counters(self, tmp_path):
        runs = [self.write_run(tmp_path, 0)]
        other = tmp_path / "odd.counters.csv"
        other.write_text("ts_ms,zz\n0,0\n1000,5\n2000,5\n")
        runs.append(dict(runs[0], counter_file=other.name, benchmark="odd"))
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"runs": runs}))
        with pytest.raises(ParseError, match="counter columns differ"):
            load_manifest(manifest)

    def test_missing_field(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"runs": [{"counter_file": "x.csv"}]}))
        with pytest.raises(ParseError, match="missing field"):
            load_manifest(manifest)

    def test_aux_counter_files_drive_model_subtraction(self, tmp_path):
        runs = []
        for i in range(2):
            run = self.write_run(tmp_path, i, current=500.0)
            aux = tmp_path / f"run{i}.aux.csv"
            aux.write_text(
                "ts_ms,cpu_cycles\n0,0\n"
                + "".join(f"{t * 1000},{40.0 + 10 * i}\n" for t in range(1, 6))
            )
            runs.append(dict(run, aux_counter_file=aux.name))
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"runs": runs}))
        ds, aux_rates = load_manifest(manifest)
        assert aux_rates is not None
        assert aux_rates[1]["cpu_cycles"] == pytest.approx(50.0)
        # cpu model: 2 mA per cycle/s + 20 mA idle
        cpu_model = PowerModel((base("cpu_cycles"),), (2.0,), 20.0)
        isolated, n_clamped = isolate_dataset(ds, 100.0, cpu_model, aux_rates)
        assert n_clamped == 0
        # 500 total - 100 base - (2*40 + 20) = 300; second run subtracts 2*50+20
        assert isolated.records[0].target_current == pytest.approx(300.0)
        assert isolated.records[1].target_current == pytest.approx(280.0)


class TestRunMeta:
    def test_workload_validation(self):
        with pytest.raises(ConfigError):
            RunMeta("b", "Gaming", 1.0)

    def test_utilization_bounds(self):
        with pytest.raises(ConfigError):
            RunMeta("b", "Other", 1.0, utilization=1.5)
