"""Pipeline orchestration: configuration model and the stage runners
behind the command-line interface.

Every runner is a pure function from a validated :class:`PipelineConfig`
to a result dictionary (paths of artifacts written plus summary values
for display).  Failures surface as :class:`ConfigError` for bad
configuration (usage, exit code 2 at the CLI) or :class:`PipelineError`
tagged with the stage that failed (runtime, exit code 1).
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import classify as clf
from .cluster import (
    assign,
    elbow_select,
    kmeans_fit,
    load_cluster_model,
    save_cluster_model,
    silhouette,
)
from .data import (
    POLLUTANTS,
    SOURCE_ACTIVITIES,
    ActivityLabel,
    Dataset,
    apply_normalizer,
    fit_normalizer,
    preprocess,
    read_readings_csv,
    write_readings_csv,
)
from .errors import AerolensError
from .explain import WeightFactors, derive_weight_factors, lime_explain, mean_abs_shap
from .exposure import (
    ActivityTimeline,
    cluster_potency,
    load_potency_table,
    normalize_cohort,
    personal_cluster_counts,
    pollutant_exposure,
    reclustered_counts,
    save_potency_table,
    segment_activities,
    total_exposure,
    write_cohort_csv,
    write_timeline_csv,
    ExposureReport,
)
from .seeding import derive_seed, rng_from
from .synth import ScheduleEntry, generate_day_schedule

__all__ = [
    "ConfigError",
    "PipelineError",
    "ClassifierSettings",
    "ExplainSettings",
    "PotencySettings",
    "SegmentationSettings",
    "ElbowSettings",
    "PipelineConfig",
    "run_synth",
    "run_fit",
    "run_exposure",
    "run_segment",
    "run_report",
    "run_learning_curve",
    "FIT_ARTIFACTS",
]

ARTIFACT_SCHEMA_VERSION = 1

FIT_ARTIFACTS = (
    "cluster-model.json",
    "classifier.json",
    "weights.json",
    "potency.json",
    "eval-report.json",
    "elbow.csv",
)

CLASSIFIER_VARIANTS = ("dt", "rf", "nb", "svm")
TARGETS = ("cluster", "activity")
WEIGHT_SOURCES = ("shap", "unit")


class ConfigError(AerolensError):
    """Configuration or usage problem; maps to exit code 2."""


class PipelineError(AerolensError):
    """A pipeline stage failed at run time; maps to exit code 1."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except (AerolensError, OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, str(exc)) from exc


def _check_keys(doc: dict, allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


@dataclass
class ClassifierSettings:
    variant: str = "dt"
    max_depth: Optional[int] = None
    min_leaf: int = 1
    n_trees: int = 100
    lam: float = 0.01
    epochs: int = 200
    batch_size: int = 32

    _KEYS = ("variant", "max_depth", "min_leaf", "n_trees", "lam", "epochs", "batch_size")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassifierSettings":
        _check_keys(doc, cls._KEYS, "classifier")
        base = cls()
        return replace(base, **doc)


@dataclass
class ExplainSettings:
    background_size: int = 100
    sample_size: int = 40
    n_samples: int = 1000
    kernel_width: Optional[float] = None
    weight_source: str = "shap"

    _KEYS = ("background_size", "sample_size", "n_samples", "kernel_width", "weight_source")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExplainSettings":
        _check_keys(doc, cls._KEYS, "explain")
        return replace(cls(), **doc)


@dataclass
class PotencySettings:
    beta: float = 2.0
    tracked: tuple[str, ...] = ("no2", "voc", "pm10")

    _KEYS = ("beta", "tracked")

    def to_dict(self) -> dict:
        return {"beta": self.beta, "tracked": list(self.tracked)}

    @classmethod
    def from_dict(cls, doc: dict) -> "PotencySettings":
        _check_keys(doc, cls._KEYS, "potency")
        out = cls()
        if "beta" in doc:
            out.beta = float(doc["beta"])
        if "tracked" in doc:
            out.tracked = tuple(doc["tracked"])
        return out


@dataclass
class SegmentationSettings:
    window_minutes: float = 15.0
    step_minutes: float = 5.0
    smoothing_votes: int = 3

    _KEYS = ("window_minutes", "step_minutes", "smoothing_votes")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    @classmethod
    def from_dict(cls, doc: dict) -> "SegmentationSettings":
        _check_keys(doc, cls._KEYS, "segmentation")
        return replace(cls(), **doc)


@dataclass
class ElbowSettings:
    k_min: int = 2
    k_max: int = 8

    _KEYS = ("k_min", "k_max")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    @classmethod
    def from_dict(cls, doc: dict) -> "ElbowSettings":
        _check_keys(doc, cls._KEYS, "elbow")
        return replace(cls(), **doc)


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs, JSON round-trippable."""

    reference_csv: Optional[str] = None
    personal_csvs: tuple[str, ...] = ()
    segment_csv: Optional[str] = None
    out_dir: str = "out"
    seed: int = 0
    k: int = 3
    train_fraction: float = 0.7
    target: str = "cluster"
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    explain: ExplainSettings = field(default_factory=ExplainSettings)
    potency: PotencySettings = field(default_factory=PotencySettings)
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    elbow: ElbowSettings = field(default_factory=ElbowSettings)
    recluster: bool = False
    schedule: tuple[dict, ...] = ()
    person_id: str = "person-1"
    sampling_period_s: int = 60
    learning_curve_sizes: tuple[int, ...] = ()

    _KEYS = (
        "reference_csv",
        "personal_csvs",
        "segment_csv",
        "out_dir",
        "seed",
        "k",
        "train_fraction",
        "target",
        "classifier",
        "explain",
        "potency",
        "segmentation",
        "elbow",
        "recluster",
        "schedule",
        "person_id",
        "sampling_period_s",
        "learning_curve_sizes",
    )

    def to_dict(self) -> dict:
        return {
            "reference_csv": self.reference_csv,
            "personal_csvs": list(self.personal_csvs),
            "segment_csv": self.segment_csv,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "k": self.k,
            "train_fraction": self.train_fraction,
            "target": self.target,
            "classifier": self.classifier.to_dict(),
            "explain": self.explain.to_dict(),
            "potency": self.potency.to_dict(),
            "segmentation": self.segmentation.to_dict(),
            "elbow": self.elbow.to_dict(),
            "recluster": self.recluster,
            "schedule": [dict(entry) for entry in self.schedule],
            "person_id": self.person_id,
            "sampling_period_s": self.sampling_period_s,
            "learning_curve_sizes": list(self.learning_curve_sizes),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        _check_keys(doc, cls._KEYS, "config")
        cfg = cls()
        simple = (
            "reference_csv",
            "segment_csv",
            "out_dir",
            "seed",
            "k",
            "train_fraction",
            "target",
            "recluster",
            "person_id",
            "sampling_period_s",
        )
        for key in simple:
            if key in doc:
                setattr(cfg, key, doc[key])
        if "personal_csvs" in doc:
            cfg.personal_csvs = tuple(doc["personal_csvs"])
        if "classifier" in doc:
            cfg.classifier = ClassifierSettings.from_dict(doc["classifier"])
        if "explain" in doc:
            cfg.explain = ExplainSettings.from_dict(doc["explain"])
        if "potency" in doc:
            cfg.potency = PotencySettings.from_dict(doc["potency"])
        if "segmentation" in doc:
            cfg.segmentation = SegmentationSettings.from_dict(doc["segmentation"])
        if "elbow" in doc:
            cfg.elbow = ElbowSettings.from_dict(doc["elbow"])
        if "schedule" in doc:
            cfg.schedule = tuple(dict(e) for e in doc["schedule"])
        if "learning_curve_sizes" in doc:
            cfg.learning_curve_sizes = tuple(int(s) for s in doc["learning_curve_sizes"])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}")
        if self.classifier.variant not in CLASSIFIER_VARIANTS:
            raise ConfigError(f"classifier variant must be one of {CLASSIFIER_VARIANTS}")
        if self.explain.weight_source not in WEIGHT_SOURCES:
            raise ConfigError(f"weight_source must be one of {WEIGHT_SOURCES}")
        if self.potency.beta <= 0:
            raise ConfigError("beta must be positive")
        for p in self.potency.tracked:
            if p not in POLLUTANTS:
                raise ConfigError(f"unknown tracked pollutant: {p!r}")
        if not self.potency.tracked:
            raise ConfigError("tracked pollutant list must not be empty")
        if self.sampling_period_s <= 0:
            raise ConfigError("sampling_period_s must be positive")
        if not 2 <= self.elbow.k_min < self.elbow.k_max:
            raise ConfigError("elbow range needs 2 <= k_min < k_max")
        seg = self.segmentation
        if seg.window_minutes <= 0 or seg.step_minutes <= 0:
            raise ConfigError("segmentation window and step must be positive")
        if seg.smoothing_votes < 1 or seg.smoothing_votes % 2 == 0:
            raise ConfigError("smoothing_votes must be a positive odd number")
        self._schedule_entries()
        if any(s <= 0 for s in self.learning_curve_sizes):
            raise ConfigError("learning_curve_sizes must be positive")

    def _schedule_entries(self) -> list["ScheduleEntry"]:
        """Schedule entries checked for shape, bounds, and overlaps."""
        entries = []
        for entry in self.schedule:
            _check_keys(entry, ("start_minute", "duration_minutes", "activity"), "schedule")
            for key in ("start_minute", "duration_minutes", "activity"):
                if key not in entry:
                    raise ConfigError(f"schedule entry missing {key!r}")
            name = str(entry["activity"])
            if ActivityLabel.parse(name) not in SOURCE_ACTIVITIES:
                raise ConfigError(f"schedule activity {name!r} is not a source activity")
            try:
                entries.append(
                    ScheduleEntry(
                        start_minute=int(entry["start_minute"]),
                        duration_minutes=int(entry["duration_minutes"]),
                        activity=ActivityLabel.parse(name),
                    )
                )
            except (AerolensError, ValueError) as exc:
                raise ConfigError(f"invalid schedule entry: {exc}") from exc
        ordered = sorted(entries, key=lambda e: e.start_minute)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.start_minute < prev.start_minute + prev.duration_minutes:
                raise ConfigError(
                    f"schedule segments overlap at minute {cur.start_minute}"
                )
        return entries


def _require_input(path: Optional[str], what: str) -> str:
    if not path:
        raise ConfigError(f"no {what} configured")
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _ensure_out_dir(config: PipelineConfig) -> str:
    try:
        os.makedirs(config.out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {config.out_dir}: {exc}") from exc
    return config.out_dir


def _write_json(doc: dict, path: str) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def run_synth(config: PipelineConfig) -> dict:
    """Generate a synthetic day and write readings.csv + truth-timeline.json."""
    out_dir = _ensure_out_dir(config)
    entries = config._schedule_entries()
    with _stage("generate"):
        dataset, truth = generate_day_schedule(
            entries,
            seed=config.seed,
            sampling_period_s=config.sampling_period_s,
            person_id=config.person_id,
        )
    csv_path = os.path.join(out_dir, "readings.csv")
    truth_path = os.path.join(out_dir, "truth-timeline.json")
    with _stage("artifacts"):
        write_readings_csv(dataset, csv_path)
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "timeline",
                "source": "generator ground truth",
                **ActivityTimeline(segments=tuple(truth)).to_dict(),
            },
            truth_path,
        )
    return {
        "readings_csv": csv_path,
        "truth_timeline": truth_path,
        "n_readings": len(dataset),
        "n_segments": len(truth),
    }


def _load_reference(config: PipelineConfig):
    path = _require_input(config.reference_csv, "reference data file")
    with _stage("ingest"):
        dataset = read_readings_csv(path)
    with _stage("preprocess"):
        dataset, prep = preprocess(dataset)
    with _stage("normalize"):
        norm = fit_normalizer(dataset)
        Xn = apply_normalizer(norm, dataset)
    return dataset, prep, norm, Xn


def _make_targets(config: PipelineConfig, model, dataset: Dataset, Xn: np.ndarray):
    """Feature matrix and label vector for the configured target."""
    if config.target == "cluster":
        return Xn, np.asarray(assign(model, Xn)), "cluster"
    labels = []
    keep = []
    for i, reading in enumerate(dataset):
        if reading.activity is not None and reading.activity is not ActivityLabel.UNKNOWN:
            keep.append(i)
            labels.append(reading.activity.value)
    if not keep:
        raise PipelineError("labels", "no labelled readings for the activity target")
    return Xn[np.asarray(keep, dtype=int)], np.asarray(labels), "activity"


def _train_variant(config: PipelineConfig, X: np.ndarray, y: np.ndarray):
    cset = config.classifier
    if cset.variant == "dt":
        return clf.train_decision_tree(X, y, max_depth=cset.max_depth, min_leaf=cset.min_leaf)
    if cset.variant == "rf":
        return clf.train_random_forest(
            X,
            y,
            n_trees=cset.n_trees,
            max_depth=cset.max_depth,
            min_leaf=cset.min_leaf,
            seed=derive_seed(config.seed, "forest"),
        )
    if cset.variant == "nb":
        return clf.train_gaussian_nb(X, y)
    return clf.train_linear_svm(
        X,
        y,
        lam=cset.lam,
        epochs=cset.epochs,
        seed=derive_seed(config.seed, "svm"),
        batch_size=cset.batch_size,
    )


def run_fit(config: PipelineConfig) -> dict:
    """Full reference fit: cluster, classify, explain, weight, score."""
    out_dir = _ensure_out_dir(config)
    dataset, prep, norm, Xn = _load_reference(config)

    with _stage("elbow"):
        k_hi = min(config.elbow.k_max, Xn.shape[0] - 1)
        if k_hi <= config.elbow.k_min:
            raise PipelineError("elbow", "too few rows for the configured elbow range")
        curve = elbow_select(
            Xn, config.elbow.k_min, k_hi, seed=derive_seed(config.seed, "elbow-scan")
        )
        elbow_path = os.path.join(out_dir, "elbow.csv")
        with open(elbow_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("k,wcss,chosen\n")
            for k_val, wcss in curve.points:
                fh.write(f"{k_val},{repr(float(wcss))},{int(k_val == curve.chosen_k)}\n")

    with _stage("cluster"):
        model = kmeans_fit(Xn, config.k, seed=config.seed, normalization=norm)
        cluster_labels = np.asarray(assign(model, Xn))
        sil = silhouette(Xn, cluster_labels) if config.k >= 2 else 0.0
        cluster_path = os.path.join(out_dir, "cluster-model.json")
        save_cluster_model(model, cluster_path)

    with _stage("labels"):
        X_cls, y_cls, target_name = _make_targets(config, model, dataset, Xn)

    with _stage("split"):
        train_idx, test_idx = clf.split_indices(
            list(y_cls), config.train_fraction, seed=derive_seed(config.seed, "split")
        )

    with _stage("train"):
        classifier = _train_variant(config, X_cls[train_idx], y_cls[train_idx])
        classifier_path = os.path.join(out_dir, "classifier.json")
        clf.save_model(classifier, classifier_path)

    with _stage("evaluate"):
        report = clf.evaluate(classifier, X_cls[test_idx], y_cls[test_idx])
        eval_path = os.path.join(out_dir, "eval-report.json")
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "eval-report",
                "variant": classifier.variant,
                "target": target_name,
                "classes": [clf_label for clf_label in classifier.class_list],
                "n_train": int(len(train_idx)),
                "n_test": int(len(test_idx)),
                **report.to_dict(),
            },
            eval_path,
        )

    importances = None
    lime_rows: list[dict] = []
    with _stage("explain"):
        if config.explain.weight_source == "shap":
            n_train = len(train_idx)
            bg_rng = rng_from(config.seed, "background")
            bg_size = min(config.explain.background_size, n_train)
            background = X_cls[np.sort(bg_rng.choice(train_idx, size=bg_size, replace=False))]
            sm_rng = rng_from(config.seed, "shap-sample")
            sm_size = min(config.explain.sample_size, n_train)
            sample = X_cls[np.sort(sm_rng.choice(train_idx, size=sm_size, replace=False))]
            importances = mean_abs_shap(classifier, sample, background)

            centroids = np.asarray(model.centroids)
            for ci in range(model.k):
                d2 = ((Xn - centroids[ci]) ** 2).sum(axis=1)
                rep_row = Xn[int(np.argmin(d2))]
                att = lime_explain(
                    classifier,
                    rep_row,
                    n_samples=config.explain.n_samples,
                    kernel_width=config.explain.kernel_width,
                    seed=derive_seed(config.seed, "lime", ci),
                )
                lime_rows.append(
                    {
                        "cluster": ci,
                        "label": _jsonable(classifier.class_list[att.target_class]),
                        "base_value": att.base_value,
                        "coefficients": {
                            p: v for p, v in zip(att.feature_names, att.values)
                        },
                    }
                )
        explain_path = os.path.join(out_dir, "explain-report.json")
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "explain-report",
                "target": target_name,
                "weight_source": config.explain.weight_source,
                "importances": None
                if importances is None
                else {p: float(v) for p, v in zip(POLLUTANTS, importances)},
                "lime": lime_rows,
            },
            explain_path,
        )
        explain_csv = os.path.join(out_dir, "explain-report.csv")
        with open(explain_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("row,cluster,label," + ",".join(POLLUTANTS) + ",base_value\n")
            if importances is not None:
                vals = ",".join(repr(float(v)) for v in importances)
                fh.write(f"mean_abs_shap,,,{vals},\n")
            for row in lime_rows:
                coeffs = ",".join(repr(float(row["coefficients"][p])) for p in POLLUTANTS)
                fh.write(
                    f"lime,{row['cluster']},{row['label']},{coeffs},{repr(float(row['base_value']))}\n"
                )

    with _stage("weights"):
        if config.explain.weight_source == "unit":
            weights = WeightFactors.unit()
        else:
            weights = derive_weight_factors(importances)
        weights_path = os.path.join(out_dir, "weights.json")
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "weight-factors",
                **weights.to_dict(),
                "importances": None
                if importances is None
                else {p: float(v) for p, v in zip(POLLUTANTS, importances)},
            },
            weights_path,
        )

    with _stage("potency"):
        table = cluster_potency(
            model,
            dataset,
            weights=weights,
            beta=config.potency.beta,
            tracked=config.potency.tracked,
        )
        potency_path = os.path.join(out_dir, "potency.json")
        save_potency_table(table, potency_path)

    return {
        "artifacts": {name: os.path.join(out_dir, name) for name in FIT_ARTIFACTS},
        "n_readings": len(dataset),
        "dropped_null": prep.dropped_null,
        "dropped_negative": prep.dropped_negative,
        "dropped_duplicate": prep.dropped_duplicate,
        "elbow_chosen_k": curve.chosen_k,
        "k": model.k,
        "silhouette": sil,
        "wcss": model.wcss,
        "target": target_name,
        "variant": classifier.variant,
        "accuracy": report.accuracy,
        "kappa": report.kappa,
        "mcc": report.mcc,
        "potencies": [e.potency for e in table.entries],
        "weights": list(weights.values),
    }


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _load_fit_artifacts(out_dir: str, need: Sequence[str]):
    missing = [n for n in need if not os.path.isfile(os.path.join(out_dir, n))]
    if missing:
        raise PipelineError(
            "artifacts", f"missing fitted artifact(s) in {out_dir}: {', '.join(missing)}"
        )


def run_exposure(config: PipelineConfig) -> dict:
    """Per-person exposure scores against the fitted reference artifacts."""
    out_dir = _ensure_out_dir(config)
    if not config.personal_csvs:
        raise ConfigError("no personal data files configured")
    paths = [_require_input(p, "personal data file") for p in config.personal_csvs]

    _load_fit_artifacts(out_dir, ("cluster-model.json", "potency.json", "weights.json"))
    with _stage("artifacts"):
        model = load_cluster_model(os.path.join(out_dir, "cluster-model.json"))
        table = load_potency_table(os.path.join(out_dir, "potency.json"))
        weights = WeightFactors.from_dict(_read_json(os.path.join(out_dir, "weights.json")))

    persons = []
    raws = []
    for path in paths:
        with _stage("ingest"):
            ds = read_readings_csv(path)
        with _stage("preprocess"):
            ds, _ = preprocess(ds)
        with _stage("exposure"):
            if config.recluster:
                counts = reclustered_counts(
                    model, ds, seed=derive_seed(config.seed, "recluster", path)
                )
            else:
                counts = personal_cluster_counts(model, ds)
            total = total_exposure(counts, table)
            raw = pollutant_exposure(ds, weights=weights, tracked=table.tracked)
            person_id = next(
                (r.person_id for r in ds if r.person_id), os.path.splitext(os.path.basename(path))[0]
            )
            date = ds.readings[0].timestamp.date().isoformat()
            persons.append(
                ExposureReport(
                    person_id=person_id,
                    date=date,
                    counts=tuple(int(c) for c in counts),
                    total=total,
                    tracked=table.tracked,
                    raw_exposure=tuple(float(v) for v in raw),
                )
            )
            raws.append(raw)

    with _stage("cohort"):
        norm_rows = normalize_cohort(np.asarray(raws), ndigits=2)
        persons = [
            ExposureReport(
                person_id=rep.person_id,
                date=rep.date,
                counts=rep.counts,
                total=rep.total,
                tracked=rep.tracked,
                raw_exposure=rep.raw_exposure,
                normalized_exposure=tuple(float(v) for v in norm_rows[i]),
            )
            for i, rep in enumerate(persons)
        ]
        report_path = os.path.join(out_dir, "exposure-report.json")
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "exposure-report",
                "recluster": bool(config.recluster),
                "persons": [rep.to_dict() for rep in persons],
            },
            report_path,
        )
        cohort_path = os.path.join(out_dir, "cohort.csv")
        write_cohort_csv(persons, cohort_path)

    return {
        "exposure_report": report_path,
        "cohort_csv": cohort_path,
        "persons": [
            {"person_id": rep.person_id, "total": rep.total, "counts": list(rep.counts)}
            for rep in persons
        ],
    }


def run_segment(config: PipelineConfig) -> dict:
    """Activity timeline for a (near-)24 h personal recording."""
    out_dir = _ensure_out_dir(config)
    source = config.segment_csv or (config.personal_csvs[0] if config.personal_csvs else None)
    path = _require_input(source, "segmentation data file")

    classifier_path = os.path.join(out_dir, "classifier.json")
    if not os.path.isfile(classifier_path):
        raise PipelineError("artifacts", f"missing fitted artifact(s) in {out_dir}: classifier.json")
    with _stage("artifacts"):
        classifier = clf.load_model(classifier_path)
        norm = None
        cluster_path = os.path.join(out_dir, "cluster-model.json")
        if os.path.isfile(cluster_path):
            norm = load_cluster_model(cluster_path).normalization

    with _stage("ingest"):
        ds = read_readings_csv(path)
    with _stage("preprocess"):
        ds, _ = preprocess(ds)
    with _stage("segment"):
        seg = config.segmentation
        timeline = segment_activities(
            classifier,
            ds,
            window_minutes=seg.window_minutes,
            step_minutes=seg.step_minutes,
            smooth_width=seg.smoothing_votes,
            normalization=norm,
        )
        json_path = os.path.join(out_dir, "timeline.json")
        _write_json(
            {
                "schema_version": ARTIFACT_SCHEMA_VERSION,
                "kind": "timeline",
                "source": "classifier",
                **timeline.to_dict(),
            },
            json_path,
        )
        csv_path = os.path.join(out_dir, "timeline.csv")
        write_timeline_csv(timeline, csv_path)

    return {
        "timeline_json": json_path,
        "timeline_csv": csv_path,
        "segments": [
            {
                "start": seg_.start.isoformat(),
                "end": seg_.end.isoformat(),
                "label": seg_.label,
                "confidence": seg_.confidence,
            }
            for seg_ in timeline.segments
        ],
    }


def run_report(config: PipelineConfig) -> dict:
    """Collect whatever artifacts exist in out_dir into one summary."""
    out_dir = config.out_dir
    found: dict[str, dict] = {}
    names = (
        "cluster-model.json",
        "eval-report.json",
        "weights.json",
        "potency.json",
        "exposure-report.json",
        "timeline.json",
        "explain-report.json",
    )
    for name in names:
        path = os.path.join(out_dir, name)
        if os.path.isfile(path):
            with _stage("artifacts"):
                found[name] = _read_json(path)
    if not found:
        raise PipelineError("artifacts", f"no artifacts found in {out_dir}")
    return {"out_dir": out_dir, "artifacts": found}


def run_learning_curve(config: PipelineConfig) -> dict:
    """Accuracy versus training-set size over random nested subsets."""
    out_dir = _ensure_out_dir(config)
    dataset, _, _, Xn = _load_reference(config)

    with _stage("cluster"):
        model = kmeans_fit(Xn, config.k, seed=config.seed, normalization=None)
    with _stage("labels"):
        X_cls, y_cls, target_name = _make_targets(config, model, dataset, Xn)
    with _stage("split"):
        train_idx, test_idx = clf.split_indices(
            list(y_cls), config.train_fraction, seed=derive_seed(config.seed, "split")
        )
    n_train = len(train_idx)
    if config.learning_curve_sizes:
        sizes = [min(s, n_train) for s in config.learning_curve_sizes]
    else:
        lo = max(min(50, n_train), n_train // 8)
        sizes = sorted({int(round(v)) for v in np.linspace(lo, n_train, 8)})
    order = rng_from(config.seed, "learning-curve").permutation(n_train)
    shuffled = np.asarray(train_idx)[order]

    rows = []
    with _stage("train"):
        for size in sizes:
            subset = np.sort(shuffled[:size])
            classifier = _train_variant(config, X_cls[subset], y_cls[subset])
            report = clf.evaluate(classifier, X_cls[test_idx], y_cls[test_idx])
            rows.append((size, report))

    curve_path = os.path.join(out_dir, "learning-curve.csv")
    with open(curve_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n_train,accuracy,kappa,rmse,mcc,f1_macro,precision_macro,recall_macro\n")
        for size, rep in rows:
            fields = (
                rep.accuracy,
                rep.kappa,
                rep.rmse,
                rep.mcc,
                rep.f1_macro,
                rep.precision_macro,
                rep.recall_macro,
            )
            fh.write(str(size) + "," + ",".join(repr(float(v)) for v in fields) + "\n")

    return {
        "learning_curve_csv": curve_path,
        "target": target_name,
        "variant": config.classifier.variant,
        "points": [
            {"n_train": size, "accuracy": rep.accuracy, "kappa": rep.kappa}
            for size, rep in rows
        ],
    }
