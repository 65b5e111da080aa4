"""Command-line workflows: train, eval, predict, compare, synth, energy.

Every command is deterministic given its config file and seed: reports embed
no timestamps, JSON is written with sorted keys, and floats keep full
round-trip precision. Exit codes: 0 success, 1 pipeline error, 2 usage or
I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import synth as synthmod
from .dataset import Dataset, isolate_dataset, load_manifest, split_dataset
from .errors import ConfigError, ModelFileError, ParseError, PmcPowerError
from .model import (
    PipelineConfig,
    evaluate_by_workload,
    evaluate_model,
    load_model,
    predict_dataset,
    predict_util_freq_dataset,
    run_pipeline,
    save_model,
    train_all_pmc,
    train_k_top,
    train_util_freq,
)
from .numerics import EvalReport, evaluate
from .selection import format_trace

TRAIN_FRACTION_DEFAULT = 2.0 / 3.0


@dataclass
class RunConfig:
    """One training/evaluation job; defaults are the recommended knobs."""

    manifest: str = ""
    output_dir: str = "out"
    alpha: float = 0.05
    cut_factor: float = 0.05
    epsilon: float = 0.01
    patience: int = 5
    top_k: int = 1000
    combined: bool = True
    cluster_scope: str = "union"
    train_fraction: float = TRAIN_FRACTION_DEFAULT
    seed: int = 0
    base_current_ma: float = 0.0
    aux_model: str | None = None

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            alpha=self.alpha,
            cut_factor=self.cut_factor,
            epsilon=self.epsilon,
            patience=self.patience,
            top_k=self.top_k,
            combined=self.combined,
            cluster_scope=self.cluster_scope,
        )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config {path}: unknown key {sorted(unknown)[0]!r}")
    return RunConfig(**doc)


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    for name in RunConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if not config.manifest:
        raise ConfigError("no manifest given (config file key 'manifest' or --manifest)")
    return config


def _load_isolated(config: RunConfig) -> tuple[Dataset, int]:
    ds, aux_rates = load_manifest(config.manifest)
    aux_model = load_model(config.aux_model) if config.aux_model else None
    if aux_model is not None and aux_rates is None:
        raise ConfigError(
            "aux model given but the manifest lists no aux_counter_file entries"
        )
    return isolate_dataset(ds, config.base_current_ma, aux_model, aux_rates)


def _report_dict(report: EvalReport, by_workload: dict[str, EvalReport] | None = None) -> dict:
    doc = report.to_dict()
    if by_workload is not None:
        doc["by_workload"] = {k: v.to_dict() for k, v in by_workload.items()}
    return doc


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _predictions_csv(ds: Dataset, predictions: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["benchmark", "workload_type", "frequency_hz", "target_ma", "predicted_ma"]
    )
    for rec, pred in zip(ds.records, predictions):
        writer.writerow(
            [
                rec.meta.benchmark_name,
                rec.meta.workload_type,
                repr(rec.meta.frequency_hz),
                repr(rec.target_current),
                repr(float(pred)),
            ]
        )
    return buf.getvalue()


def _summary_line(name: str, n_features, report: EvalReport) -> str:
    nf = f"{n_features}" if n_features is not None else "-"
    return (
        f"{name:<14s} {nf:>8s} {report.r_squared:8.4f} "
        f"{report.mae_mean:9.2f} ({report.mae_median:.2f}) "
        f"{report.mape_mean:8.2f} ({report.mape_median:.2f})"
    )


_SUMMARY_HEADER = (
    f"{'model':<14s} {'features':>8s} {'R2':>8s} {'MAE mA':>9s} {'':<8s} "
    f"{'MAPE %':>8s}"
)


def cmd_train(config: RunConfig) -> int:
    ds, n_clamped = _load_isolated(config)
    train, test = split_dataset(ds, config.train_fraction, config.seed)
    result = run_pipeline(train, config.pipeline())
    model = result.model
    model.train_meta["run_config"] = asdict(config)
    model.train_meta["n_isolation_clamped"] = n_clamped
    model.train_meta["selection_trace_file"] = "selection_trace.txt"

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    (out / "selection_trace.txt").write_text(format_trace(result.selection))
    (out / "dendrogram.json").write_text(result.dendrogram.to_json())

    pred_train = predict_dataset(model, train)
    pred_test = predict_dataset(model, test)
    train_report = evaluate(pred_train, train.targets())
    test_report = evaluate(pred_test, test.targets())
    _write_json(
        out / "eval.json",
        {
            "train": _report_dict(train_report, evaluate_by_workload(model, train)),
            "test": _report_dict(test_report, evaluate_by_workload(model, test)),
            "n_negative_predictions": int((pred_test < 0).sum() + (pred_train < 0).sum()),
        },
    )
    (out / "predictions_train.csv").write_text(_predictions_csv(train, pred_train))
    (out / "predictions_test.csv").write_text(_predictions_csv(test, pred_test))

    lines = [
        f"trained on {len(train)} runs, tested on {len(test)} runs",
        f"features: {len(model.features)} of {result.assignment.n_clusters} clusters "
        f"({model.train_meta['pmc_usage_percent']:.2f}% of counters)",
        _SUMMARY_HEADER,
        _summary_line("train", len(model.features), train_report),
        _summary_line("test", len(model.features), test_report),
    ]
    summary = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary)
    sys.stdout.write(summary)
    return 0


def cmd_eval(model_path: str, config: RunConfig) -> int:
    model = load_model(model_path)
    ds, _ = _load_isolated(config)
    predictions = predict_dataset(model, ds)
    report = evaluate(predictions, ds.targets())
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "eval.json",
        {
            "eval": _report_dict(report, evaluate_by_workload(model, ds)),
            "n_negative_predictions": int((predictions < 0).sum()),
        },
    )
    (out / "predictions.csv").write_text(_predictions_csv(ds, predictions))
    sys.stdout.write(_SUMMARY_HEADER + "\n")
    sys.stdout.write(_summary_line("eval", len(model.features), report) + "\n")
    return 0


def cmd_predict(model_path: str, manifest: str, out_file: str) -> int:
    model = load_model(model_path)
    ds, _ = load_manifest(manifest)
    predictions = predict_dataset(model, ds)
    n_negative = int((predictions < 0).sum())
    Path(out_file).parent.mkdir(parents=True, exist_ok=True)
    Path(out_file).write_text(_predictions_csv(ds, predictions))
    if n_negative:
        sys.stderr.write(f"warning: {n_negative} negative predictions reported as-is\n")
    sys.stdout.write(f"wrote {len(ds)} predictions to {out_file}\n")
    return 0


def cmd_compare(config: RunConfig, k: int | None = None) -> int:
    ds, _ = _load_isolated(config)
    train, test = split_dataset(ds, config.train_fraction, config.seed)

    rows: list[tuple[str, int | None, EvalReport]] = []
    auto = run_pipeline(train, config.pipeline()).model
    rows.append(("auto", len(auto.features), evaluate_model(auto, test)))

    linear_cfg = PipelineConfig(
        alpha=config.alpha,
        cut_factor=config.cut_factor,
        epsilon=config.epsilon,
        patience=config.patience,
        top_k=config.top_k,
        combined=False,
    )
    linear = run_pipeline(train, linear_cfg).model
    rows.append(("auto-linear", len(linear.features), evaluate_model(linear, test)))

    if all(rec.meta.utilization is not None for rec in ds.records):
        uf = train_util_freq(train)
        uf_report = evaluate(predict_util_freq_dataset(uf, test), test.targets())
        rows.append(("util-freq", len(uf.slopes), uf_report))
    else:
        sys.stderr.write("note: runs lack utilization; skipping util-freq baseline\n")

    all_pmc = train_all_pmc(train)
    rows.append(("all-pmc", len(all_pmc.features), evaluate_model(all_pmc, test)))

    # The comparison convention: k-top reads as many counters as the trained
    # model does (features can outnumber counters once pairs are combined).
    k_eff = k if k is not None else len(auto.train_meta["counters_used"])
    ktop = train_k_top(train, k_eff)
    rows.append((f"k-top (k={k_eff})", len(ktop.features), evaluate_model(ktop, test)))

    lines = [_SUMMARY_HEADER]
    lines += [_summary_line(name, nf, report) for name, nf, report in rows]
    table = "\n".join(lines) + "\n"

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "compare.json",
        {
            "test_runs": len(test),
            "train_runs": len(train),
            "models": {
                name: {"n_features": nf, **report.to_dict()}
                for name, nf, report in rows
            },
        },
    )
    (out / "compare.txt").write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_synth(profile: str, out_dir: str, n_runs: int | None, noise: float | None,
              seed: int) -> int:
    if profile == "three-factor":
        cfg = synthmod.three_factor_config(
            n_runs=n_runs or 120, noise_sigma=noise or 0.0, seed=seed
        )
        ds, truth = synthmod.generate(cfg)
    elif profile == "collinear":
        cfg = synthmod.collinear_config(
            n_runs=n_runs or 150, noise_sigma=0.02 if noise is None else noise, seed=seed
        )
        ds, truth = synthmod.generate(cfg)
    elif profile == "instruction-mix":
        ds, truth = synthmod.generate_instruction_mix(
            n_runs=n_runs or 120, seed=seed, noise_sigma=noise or 0.0
        )
    elif profile == "util-freq":
        ds = synthmod.generate_util_freq(
            {251e6: 100.0, 351e6: 200.0, 471e6: 300.0}, 50.0,
            n_per_freq=(n_runs or 120) // 3, seed=seed,
        )
        truth = None
    else:
        raise ConfigError(f"unknown synth profile {profile!r}")
    manifest = synthmod.write_dataset_files(ds, out_dir, truth)
    sys.stdout.write(f"wrote {len(ds)} runs to {manifest}\n")
    return 0


def compute_energy_mws(current_ma: float, voltage_v: float, latency_ms: float) -> float:
    """Energy per inference in mWs: current (mA) x voltage (V) x time (s)."""
    if current_ma <= 0 or voltage_v <= 0 or latency_ms <= 0:
        raise ConfigError("current, voltage, and latency must all be > 0")
    return current_ma * voltage_v * latency_ms / 1000.0


def cmd_energy(current_ma: float, voltage_v: float, latency_ms: float) -> int:
    energy = compute_energy_mws(current_ma, voltage_v, latency_ms)
    sys.stdout.write(f"{energy:.4f} mWs\n")
    return 0


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (overridden by flags)")
    parser.add_argument("--manifest", help="run manifest JSON")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--cut-factor", dest="cut_factor", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--top-k", dest="top_k", type=int)
    combined = parser.add_mutually_exclusive_group()
    combined.add_argument(
        "--combined", dest="combined", action="store_const", const=True, default=None,
        help="enable product/ratio features (default)",
    )
    combined.add_argument(
        "--no-combined", dest="combined", action="store_const", const=False,
        help="base counters only",
    )
    parser.add_argument("--cluster-scope", dest="cluster_scope",
                        choices=("union", "combined-only"))
    parser.add_argument("--train-fraction", dest="train_fraction", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--base-current", dest="base_current_ma", type=float)
    parser.add_argument("--aux-model", dest="aux_model")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config) if args.config else RunConfig()
    return _apply_overrides(config, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmcpower",
        description="Synthesize linear power models from performance-counter traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a run manifest")
    _add_config_arguments(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model against measurements")
    p_eval.add_argument("--model", required=True)
    _add_config_arguments(p_eval)

    p_pred = sub.add_parser("predict", help="predict current for manifest runs")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--manifest", required=True)
    p_pred.add_argument("--out", default="predictions.csv")

    p_cmp = sub.add_parser("compare", help="train and compare against the baselines")
    _add_config_arguments(p_cmp)
    p_cmp.add_argument("--k", type=int, help="k for the k-top baseline "
                                             "(default: the trained model's feature count)")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument(
        "--profile",
        choices=("three-factor", "collinear", "instruction-mix", "util-freq"),
        default="three-factor",
    )
    p_synth.add_argument("--runs", type=int)
    p_synth.add_argument("--noise", type=float)
    p_synth.add_argument("--seed", type=int, default=0)

    p_energy = sub.add_parser("energy", help="energy per inference in mWs")
    p_energy.add_argument("--current", type=float, required=True, help="mA")
    p_energy.add_argument("--voltage", type=float, required=True, help="V")
    p_energy.add_argument("--latency", type=float, required=True, help="ms")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(_config_from_args(args))
        if args.command == "eval":
            return cmd_eval(args.model, _config_from_args(args))
        if args.command == "predict":
            return cmd_predict(args.model, args.manifest, args.out)
        if args.command == "compare":
            return cmd_compare(_config_from_args(args), args.k)
        if args.command == "synth":
            return cmd_synth(args.profile, args.out, args.runs, args.noise, args.seed)
        if args.command == "energy":
            return cmd_energy(args.current, args.voltage, args.latency)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ParseError, ModelFileError, FileNotFoundError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except PmcPowerError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
