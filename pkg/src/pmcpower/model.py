"""End-to-end training pipeline, prediction, model persistence, and baselines.

The main trainer chains the feature, clustering, and selection stages into a
single linear model over a handful of representative features. Baselines for
comparison: the utilization-frequency model (one utilization slope per
frequency level), a regression over every retained counter, and a regression
over the k counters that correlate best with the target.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import features as ft
from .clustering import (
    ClusterAssignment,
    Dendrogram,
    cut_dendrogram,
    default_cut_threshold,
    ward_cluster,
)
from .dataset import Dataset, RunRecord
from .errors import ConfigError, FeatureError, ModelFileError
from .features import FeatureMatrix, FeatureSpec
from .numerics import EvalReport, evaluate, ols_fit, pearson
from .selection import SelectionResult, select_significant

MODEL_SCHEMA_VERSION = 1

CLUSTER_SCOPES = ("union", "combined-only")


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline knobs; the defaults are the recommended operating point."""

    alpha: float = 0.05
    cut_factor: float = 0.05
    epsilon: float = 0.01
    patience: int = 5
    top_k: int = 1000
    combined: bool = True
    cluster_scope: str = "union"

    def __post_init__(self):
        if self.cluster_scope not in CLUSTER_SCOPES:
            raise ConfigError(f"cluster_scope must be one of {CLUSTER_SCOPES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PowerModel:
    """Selected features, their regression coefficients (mA per unit), and
    the intercept (mA), plus training provenance."""

    features: tuple[FeatureSpec, ...]
    coefficients: tuple[float, ...]
    intercept: float
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.features) != len(self.coefficients):
            raise ModelFileError("one coefficient per feature required")


def predict_rates(model: PowerModel, rates: Mapping[str, float]) -> float:
    total = model.intercept
    for spec, coef in zip(model.features, model.coefficients):
        total += coef * ft.evaluate_spec_on_rates(spec, rates)
    return total


def predict(model: PowerModel, record: RunRecord) -> float:
    """Predicted current in mA; may be negative (reported as-is)."""
    return predict_rates(model, record.rates)


def predict_dataset(model: PowerModel, ds: Dataset) -> np.ndarray:
    return np.array([predict(model, rec) for rec in ds.records], dtype=float)


def dataset_fingerprint(ds: Dataset) -> str:
    """Stable content hash used to tie a saved model to its training data."""
    doc = {
        "counters": list(ds.counter_names),
        "runs": [
            {
                "benchmark": rec.meta.benchmark_name,
                "workload": rec.meta.workload_type,
                "frequency_hz": rec.meta.frequency_hz,
                "utilization": rec.meta.utilization,
                "rates": [rec.rates[c] for c in ds.counter_names],
                "total": rec.total_current,
                "target": rec.target_current,
            }
            for rec in ds.records
        ],
    }
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class PipelineResult:
    """Everything the training pipeline produced, for auditing and recovery checks."""

    model: PowerModel
    selection: SelectionResult
    matrix: FeatureMatrix
    assignment: ClusterAssignment
    dendrogram: Dendrogram
    dropped_counters: tuple[str, ...]

    def cluster_members(self, cluster_id: int) -> list[FeatureSpec]:
        return [
            self.matrix.specs[i]
            for i in range(len(self.matrix.specs))
            if int(self.assignment.cluster_of[i]) == cluster_id
        ]


def _final_fit(matrix: FeatureMatrix, specs: Sequence[FeatureSpec], y: np.ndarray):
    X = np.column_stack([matrix.column(spec) for spec in specs])
    return ols_fit(X, y)


def run_pipeline(train: Dataset, config: PipelineConfig | None = None) -> PipelineResult:
    """Full automatic feature selection and fit; see train_auto for the contract."""
    config = config or PipelineConfig()
    if len(train.records) < 10:
        raise ConfigError("need at least 10 training records")
    y = train.targets()

    retained, dropped = ft.drop_zero_variance(train)
    specs: Sequence[FeatureSpec] = ft.invert_negative(train, config.alpha)
    if config.combined:
        specs = ft.generate_combined(train, specs, config.alpha, config.top_k)
        if config.cluster_scope == "combined-only":
            pairs = [s for s in specs if s.kind in ("prod", "ratio")]
            if pairs:
                specs = pairs
    matrix = ft.build_matrix(train, specs)

    dendrogram = ward_cluster(matrix.zscored(), matrix.names())
    threshold = default_cut_threshold(len(train.records), config.cut_factor)
    assignment = cut_dendrogram(dendrogram, threshold)
    selection = select_significant(
        assignment, matrix, y, epsilon=config.epsilon, patience=config.patience
    )

    reps = selection.representatives()
    fit = _final_fit(matrix, reps, y)
    used_counters = sorted({name for spec in reps for name in spec.counters()})
    meta = {
        "trainer": "auto",
        "config": config.to_dict(),
        "dataset_fingerprint": dataset_fingerprint(train),
        "n_records": len(train.records),
        "n_counters_total": len(train.counter_names),
        "n_counters_retained": len(retained),
        "n_candidate_features": len(matrix.specs),
        "n_clusters": assignment.n_clusters,
        "n_significant_clusters": len(selection.significant),
        "counters_used": used_counters,
        "pmc_usage_percent": 100.0 * len(used_counters) / len(train.counter_names),
        "train_r_squared": fit.r_squared,
        "selection": {
            "r2_trajectory": list(selection.r2_trajectory),
            "skipped_clusters": list(selection.skipped),
            "terminated_at": selection.terminated_at,
        },
    }
    model = PowerModel(
        features=tuple(reps),
        coefficients=tuple(float(c) for c in fit.coefficients),
        intercept=float(fit.intercept),
        train_meta=meta,
    )
    return PipelineResult(
        model=model,
        selection=selection,
        matrix=matrix,
        assignment=assignment,
        dendrogram=dendrogram,
        dropped_counters=tuple(dropped),
    )


def train_auto(train: Dataset, config: PipelineConfig | None = None) -> PowerModel:
    """Automatic cluster-then-forward feature selection plus final linear fit.

    Stages: drop constant counters, negate significantly anti-correlated
    ones, optionally synthesize pairwise product/ratio features, cluster
    the z-scored columns with Ward linkage, cut at cut_factor times the run
    count, rank clusters by importance, and grow the significant set
    greedily. The returned model regresses the target on the chosen
    representatives' raw values.
    """
    return run_pipeline(train, config).model


def train_all_pmc(train: Dataset) -> PowerModel:
    """Baseline: one regression over every retained counter."""
    retained, _ = ft.drop_zero_variance(train)
    specs = [ft.base(name) for name in retained]
    matrix = ft.build_matrix(train, specs)
    fit = _final_fit(matrix, matrix.specs, train.targets())
    meta = {
        "trainer": "all_pmc",
        "dataset_fingerprint": dataset_fingerprint(train),
        "n_records": len(train.records),
        "n_counters_retained": len(retained),
        "train_r_squared": fit.r_squared,
    }
    return PowerModel(tuple(matrix.specs), tuple(float(c) for c in fit.coefficients),
                      float(fit.intercept), meta)


def train_k_top(train: Dataset, k: int) -> PowerModel:
    """Baseline: regression over the k counters that correlate best with
    the target (|Pearson r|, ties broken by name)."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    retained, _ = ft.drop_zero_variance(train)
    if k > len(retained):
        raise ConfigError(f"k={k} exceeds the {len(retained)} retained counters")
    y = train.targets()
    ranked = sorted(
        retained, key=lambda name: (-abs(pearson(train.column(name), y)), name)
    )
    specs = [ft.base(name) for name in ranked[:k]]
    matrix = ft.build_matrix(train, specs)
    fit = _final_fit(matrix, matrix.specs, y)
    meta = {
        "trainer": "k_top",
        "k": k,
        "dataset_fingerprint": dataset_fingerprint(train),
        "n_records": len(train.records),
        "train_r_squared": fit.r_squared,
    }
    return PowerModel(tuple(matrix.specs), tuple(float(c) for c in fit.coefficients),
                      float(fit.intercept), meta)


@dataclass(frozen=True)
class UtilFreqModel:
    """Per-frequency utilization slope with a shared intercept by default."""

    slopes: dict[float, float]
    intercept: float
    intercepts: dict[float, float] | None = None  # per-frequency mode only


def train_util_freq(train: Dataset, per_frequency_intercept: bool = False) -> UtilFreqModel:
    """Fit current = slope[frequency] * utilization + intercept.

    Every record must carry a utilization; each frequency level needs at
    least 2 records so its slope is identified.
    """
    for rec in train.records:
        if rec.meta.utilization is None:
            raise ConfigError(
                f"run {rec.meta.benchmark_name!r} has no utilization; "
                "the utilization-frequency baseline needs it"
            )
    freqs = sorted({rec.meta.frequency_hz for rec in train.records})
    counts = {f: sum(rec.meta.frequency_hz == f for rec in train.records) for f in freqs}
    thin = [f for f, c in counts.items() if c < 2]
    if thin:
        raise ConfigError(f"frequency level {thin[0]} has fewer than 2 records")

    util = np.array([rec.meta.utilization for rec in train.records])
    freq = np.array([rec.meta.frequency_hz for rec in train.records])
    y = train.targets()

    if per_frequency_intercept:
        slopes, intercepts = {}, {}
        for f in freqs:
            mask = freq == f
            fit = ols_fit(util[mask][:, None], y[mask])
            slopes[f] = float(fit.coefficients[0])
            intercepts[f] = float(fit.intercept)
        shared = float(np.mean(list(intercepts.values())))
        return UtilFreqModel(slopes=slopes, intercept=shared, intercepts=intercepts)

    X = np.column_stack([util * (freq == f) for f in freqs])
    fit = ols_fit(X, y)
    slopes = {f: float(c) for f, c in zip(freqs, fit.coefficients)}
    return UtilFreqModel(slopes=slopes, intercept=float(fit.intercept))


def predict_util_freq(model: UtilFreqModel, record: RunRecord) -> float:
    if record.meta.utilization is None:
        raise ConfigError(f"run {record.meta.benchmark_name!r} has no utilization")
    f = record.meta.frequency_hz
    if f not in model.slopes:
        raise ConfigError(f"no utilization slope for frequency {f}")
    intercept = model.intercepts[f] if model.intercepts is not None else model.intercept
    return model.slopes[f] * record.meta.utilization + intercept


def predict_util_freq_dataset(model: UtilFreqModel, ds: Dataset) -> np.ndarray:
    return np.array([predict_util_freq(model, rec) for rec in ds.records], dtype=float)


def evaluate_model(model: PowerModel, ds: Dataset) -> EvalReport:
    return evaluate(predict_dataset(model, ds), ds.targets())


def evaluate_by_workload(model: PowerModel, ds: Dataset) -> dict[str, EvalReport]:
    """Per-workload-type error breakdown (types with too few runs are skipped)."""
    reports: dict[str, EvalReport] = {}
    for wtype in sorted({rec.meta.workload_type for rec in ds.records}):
        records = [rec for rec in ds.records if rec.meta.workload_type == wtype]
        subset = Dataset(records, ds.counter_names)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # single-workload targets may be constant
            reports[wtype] = evaluate_model(model, subset)
    return reports


def model_to_dict(model: PowerModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "linear_power_model",
        "features": [spec.canonical() for spec in model.features],
        "coefficients": list(model.coefficients),
        "intercept": model.intercept,
        "train_meta": model.train_meta,
    }


def model_from_dict(doc: dict) -> PowerModel:
    if not isinstance(doc, dict):
        raise ModelFileError("model document must be a JSON object")
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ModelFileError(
            f"unsupported model schema version {version!r} "
            f"(this build reads version {MODEL_SCHEMA_VERSION})"
        )
    try:
        raw_specs = doc["features"]
        coefficients = [float(c) for c in doc["coefficients"]]
        intercept = float(doc["intercept"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model document: {exc}") from None
    try:
        specs = tuple(ft.parse_feature_spec(text) for text in raw_specs)
    except FeatureError as exc:
        raise ModelFileError(str(exc)) from None
    return PowerModel(
        features=specs,
        coefficients=tuple(coefficients),
        intercept=intercept,
        train_meta=doc.get("train_meta", {}),
    )


def save_model(model: PowerModel, path) -> None:
    """Write the versioned model file; floats keep full round-trip precision."""
    text = json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def load_model(path) -> PowerModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file {path}: {exc}") from None
    return model_from_dict(doc)
