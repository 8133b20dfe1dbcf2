"""aerolens: indoor air pollution analytics.

Clusters pollutant sensor readings (k-means with elbow/silhouette
diagnostics), classifies household activities, explains the classifiers
with exact Shapley values and local linear surrogates, scores cluster
potency from the dominant weighted pollutant, and aggregates personal
24-hour exposure and activity timelines.
"""

from .classify import (
    ClassifierModel,
    evaluate,
    holdout_split,
    load_model,
    predict,
    predict_proba,
    save_model,
    split_indices,
    train_decision_tree,
    train_gaussian_nb,
    train_linear_svm,
    train_random_forest,
)
from .cluster import (
    ClusterModel,
    ElbowCurve,
    assign,
    elbow_select,
    kmeans_fit,
    load_cluster_model,
    save_cluster_model,
    silhouette,
)
from .data import (
    CSV_HEADER,
    POLLUTANTS,
    SOURCE_ACTIVITIES,
    ActivityLabel,
    Dataset,
    NormalizationParams,
    PollutantVector,
    PreprocessReport,
    Reading,
    TimelineSegment,
    apply_normalizer,
    fit_normalizer,
    format_timestamp,
    parse_readings_csv,
    preprocess,
    read_readings_csv,
    write_readings_csv,
)
from .errors import AerolensError
from .explain import (
    Attribution,
    WeightFactors,
    derive_weight_factors,
    lime_explain,
    mean_abs_shap,
    shap_exact,
)
from .exposure import (
    TRACKED_POLLUTANTS,
    ActivityTimeline,
    ExposureReport,
    PotencyEntry,
    PotencyTable,
    classify_windows,
    cluster_potency,
    greedy_centroid_match,
    load_potency_table,
    normalize_cohort,
    personal_cluster_counts,
    pollutant_exposure,
    potency_from_assignments,
    reclustered_counts,
    round_half_up,
    save_potency_table,
    segment_activities,
    smooth_votes,
    total_exposure,
    window_truth_labels,
    write_cohort_csv,
    write_timeline_csv,
)
from .metrics import (
    EvalReport,
    confusion_matrix,
    metrics_from_confusion,
    rmse_from_probabilities,
)
from .pipeline import (
    FIT_ARTIFACTS,
    ConfigError,
    PipelineConfig,
    PipelineError,
    run_exposure,
    run_fit,
    run_learning_curve,
    run_report,
    run_segment,
    run_synth,
)
from .seeding import derive_seed, rng_from
from .synth import (
    BASELINE_PROFILE,
    DEFAULT_PROFILES,
    ActivityProfile,
    Band,
    ScheduleEntry,
    generate_activity_trace,
    generate_day_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AerolensError",
    # data
    "POLLUTANTS",
    "CSV_HEADER",
    "SOURCE_ACTIVITIES",
    "ActivityLabel",
    "PollutantVector",
    "Reading",
    "Dataset",
    "PreprocessReport",
    "NormalizationParams",
    "TimelineSegment",
    "parse_readings_csv",
    "read_readings_csv",
    "write_readings_csv",
    "format_timestamp",
    "preprocess",
    "fit_normalizer",
    "apply_normalizer",
    # synth
    "Band",
    "ActivityProfile",
    "DEFAULT_PROFILES",
    "BASELINE_PROFILE",
    "ScheduleEntry",
    "generate_activity_trace",
    "generate_day_schedule",
    # clustering
    "ClusterModel",
    "ElbowCurve",
    "kmeans_fit",
    "assign",
    "silhouette",
    "elbow_select",
    "save_cluster_model",
    "load_cluster_model",
    # classification
    "ClassifierModel",
    "train_decision_tree",
    "train_random_forest",
    "train_gaussian_nb",
    "train_linear_svm",
    "predict",
    "predict_proba",
    "evaluate",
    "split_indices",
    "holdout_split",
    "save_model",
    "load_model",
    "EvalReport",
    "confusion_matrix",
    "metrics_from_confusion",
    "rmse_from_probabilities",
    # explain
    "Attribution",
    "WeightFactors",
    "shap_exact",
    "mean_abs_shap",
    "lime_explain",
    "derive_weight_factors",
    # exposure
    "TRACKED_POLLUTANTS",
    "PotencyEntry",
    "PotencyTable",
    "ExposureReport",
    "ActivityTimeline",
    "round_half_up",
    "potency_from_assignments",
    "cluster_potency",
    "personal_cluster_counts",
    "greedy_centroid_match",
    "reclustered_counts",
    "total_exposure",
    "pollutant_exposure",
    "normalize_cohort",
    "classify_windows",
    "smooth_votes",
    "window_truth_labels",
    "segment_activities",
    "write_cohort_csv",
    "write_timeline_csv",
    # pipeline
    "PipelineConfig",
    "ConfigError",
    "PipelineError",
    "FIT_ARTIFACTS",
    "run_synth",
    "run_fit",
    "run_exposure",
    "run_segment",
    "run_report",
    "run_learning_curve",
    # seeding
    "derive_seed",
    "rng_from",
]
