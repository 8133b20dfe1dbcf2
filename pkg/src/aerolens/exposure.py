"""Cluster potency scoring and personal exposure aggregation.

The potency of a cluster is derived from its dominant tracked pollutant:
per cluster, the weighted mean concentration of each tracked pollutant is
computed (weight factors W scale the raw means), the dominant pollutant is
the one with the largest weighted mean, and the potency ratio is

    ratio_i = beta * M_i / min_j(M_j)

where M_i is cluster i's dominant weighted mean.  Reported potency is the
ratio rounded half-up to one decimal; ranks are taken from the unrounded
ratios so two clusters rounding to the same display value stay ordered.

Personal exposure combines cluster visit counts with potencies
(total = sum_i counts_i * potency_i) and per-pollutant exposure is the
weighted concentration sum E_j = W_j * sum(x_j) over the tracked
pollutants.  Cohort tables are normalized column-wise by the column
minimum, so the least-exposed person reads 1.00.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import timedelta
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence

import numpy as np

from .cluster import ClusterModel, assign, kmeans_fit
from .data import POLLUTANTS, Dataset, NormalizationParams, TimelineSegment, format_timestamp
from .errors import (
    CorruptDocumentError,
    EmptyClusterError,
    EmptyDatasetError,
    EmptyInputError,
    LengthMismatchError,
    NonPositiveRawError,
    NoTrackedPollutantsError,
    SchemaVersionMismatchError,
    WindowLargerThanDataError,
)
from .explain import WeightFactors

__all__ = [
    "TRACKED_POLLUTANTS",
    "PotencyEntry",
    "PotencyTable",
    "ExposureReport",
    "ActivityTimeline",
    "round_half_up",
    "cluster_potency",
    "potency_from_assignments",
    "personal_cluster_counts",
    "reclustered_counts",
    "greedy_centroid_match",
    "total_exposure",
    "pollutant_exposure",
    "normalize_cohort",
    "classify_windows",
    "smooth_votes",
    "window_truth_labels",
    "segment_activities",
    "save_potency_table",
    "load_potency_table",
    "write_cohort_csv",
    "write_timeline_csv",
]

POTENCY_SCHEMA_VERSION = 1

TRACKED_POLLUTANTS = ("no2", "voc", "pm10")

DEFAULT_BETA = 2.0


def round_half_up(x: float, ndigits: int = 0) -> float:
    """Decimal round-half-up (0.05 -> 0.1 at one digit), unlike banker's."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(str(float(x))).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class PotencyEntry:
    cluster: int
    count: int
    weighted_sums: tuple[float, ...]
    weighted_means: tuple[float, ...]
    dominant: str
    ratio: float
    potency: float
    rank: int


@dataclass(frozen=True)
class PotencyTable:
    """Per-cluster potency scores, ordered by cluster index."""

    entries: tuple[PotencyEntry, ...]
    beta: float = DEFAULT_BETA
    tracked: tuple[str, ...] = TRACKED_POLLUTANTS
    weights: Optional[tuple[float, ...]] = None

    @property
    def k(self) -> int:
        return len(self.entries)

    def potencies(self) -> np.ndarray:
        return np.asarray([e.potency for e in self.entries], dtype=float)

    def to_dict(self) -> dict:
        doc: dict = {
            "schema_version": POTENCY_SCHEMA_VERSION,
            "kind": "potency-table",
            "beta": float(self.beta),
            "tracked": list(self.tracked),
            "clusters": [
                {
                    "cluster": e.cluster,
                    "instance_count": e.count,
                    "weighted_sums": {p: s for p, s in zip(self.tracked, e.weighted_sums)},
                    "weighted_means": {p: m for p, m in zip(self.tracked, e.weighted_means)},
                    "dominant": e.dominant,
                    "ratio": e.ratio,
                    "potency": e.potency,
                    "rank": e.rank,
                }
                for e in self.entries
            ],
        }
        if self.weights is not None:
            doc["weights"] = {p: w for p, w in zip(POLLUTANTS, self.weights)}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PotencyTable":
        tracked = tuple(doc["tracked"])
        entries = tuple(
            PotencyEntry(
                cluster=int(row["cluster"]),
                count=int(row["instance_count"]),
                weighted_sums=tuple(float(row["weighted_sums"][p]) for p in tracked),
                weighted_means=tuple(float(row["weighted_means"][p]) for p in tracked),
                dominant=str(row["dominant"]),
                ratio=float(row["ratio"]),
                potency=float(row["potency"]),
                rank=int(row["rank"]),
            )
            for row in doc["clusters"]
        )
        weights = doc.get("weights")
        return cls(
            entries=entries,
            beta=float(doc["beta"]),
            tracked=tracked,
            weights=None if weights is None else tuple(float(weights[p]) for p in POLLUTANTS),
        )


@dataclass(frozen=True)
class ExposureReport:
    """One person's exposure summary over a recording."""

    person_id: str
    date: str
    counts: tuple[int, ...]
    total: float
    tracked: tuple[str, ...] = TRACKED_POLLUTANTS
    raw_exposure: tuple[float, ...] = ()
    normalized_exposure: Optional[tuple[float, ...]] = None

    def to_dict(self) -> dict:
        doc: dict = {
            "person_id": self.person_id,
            "date": self.date,
            "cluster_counts": list(int(c) for c in self.counts),
            "total_exposure": self.total,
            "raw_exposure": {p: v for p, v in zip(self.tracked, self.raw_exposure)},
        }
        if self.normalized_exposure is not None:
            doc["normalized_exposure"] = {
                p: v for p, v in zip(self.tracked, self.normalized_exposure)
            }
        return doc


@dataclass(frozen=True)
class ActivityTimeline:
    """Ordered, non-overlapping labeled segments covering a recording."""

    segments: tuple[TimelineSegment, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def minutes_by_label(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for seg in self.segments:
            span = (seg.end - seg.start).total_seconds() / 60.0
            out[seg.label] = out.get(seg.label, 0.0) + span
        return out

    def to_dict(self) -> dict:
        return {
            "segments": [
                {
                    "start": format_timestamp(seg.start),
                    "end": format_timestamp(seg.end),
                    "label": seg.label,
                    "confidence": seg.confidence,
                }
                for seg in self.segments
            ]
        }


def _as_weight_array(weights) -> np.ndarray:
    if weights is None:
        return np.ones(len(POLLUTANTS))
    if isinstance(weights, WeightFactors):
        return weights.as_array()
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(POLLUTANTS),):
        raise LengthMismatchError("weights must provide one factor per pollutant")
    return w


def _tracked_columns(tracked: Sequence[str]) -> list[int]:
    tracked = tuple(tracked)
    if not tracked:
        raise NoTrackedPollutantsError("tracked pollutant list is empty")
    cols = []
    for p in tracked:
        if p not in POLLUTANTS:
            raise NoTrackedPollutantsError(f"unknown tracked pollutant: {p!r}")
        cols.append(POLLUTANTS.index(p))
    return cols


def potency_from_assignments(
    X_raw: np.ndarray,
    labels: np.ndarray,
    weights=None,
    beta: float = DEFAULT_BETA,
    tracked: Sequence[str] = TRACKED_POLLUTANTS,
    k: Optional[int] = None,
) -> PotencyTable:
    """Score clusters given an explicit row-to-cluster assignment.

    ``X_raw`` holds unnormalized concentrations in POLLUTANTS column order;
    ``weights`` is a WeightFactors, a length-5 array, or None for unit
    weights.  Every cluster index below ``k`` must own at least one row.
    """
    X_raw = np.asarray(X_raw, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if X_raw.ndim != 2 or X_raw.shape[0] == 0:
        raise EmptyInputError("concentration matrix must have at least one row")
    if labels.shape[0] != X_raw.shape[0]:
        raise LengthMismatchError("labels and matrix row counts differ")
    if beta <= 0:
        raise ValueError("beta must be positive")
    tracked = tuple(tracked)
    cols = _tracked_columns(tracked)
    w = _as_weight_array(weights)
    n_clusters = int(labels.max()) + 1 if k is None else int(k)

    sums = np.zeros((n_clusters, len(cols)))
    means = np.zeros((n_clusters, len(cols)))
    counts = np.bincount(labels, minlength=n_clusters)
    for i in range(n_clusters):
        if counts[i] == 0:
            raise EmptyClusterError(i)
        rows = X_raw[labels == i]
        sums[i] = w[cols] * rows[:, cols].sum(axis=0)
        means[i] = sums[i] / counts[i]

    dominant_idx = np.argmax(means, axis=1)
    dominant_mean = means[np.arange(n_clusters), dominant_idx]
    floor = dominant_mean.min()
    if floor <= 0:
        raise NonPositiveRawError("dominant weighted means must be positive to form ratios")
    ratios = beta * dominant_mean / floor

    order = sorted(range(n_clusters), key=lambda i: (-ratios[i], i))
    ranks = np.empty(n_clusters, dtype=int)
    for position, i in enumerate(order):
        ranks[i] = position + 1

    entries = tuple(
        PotencyEntry(
            cluster=i,
            count=int(counts[i]),
            weighted_sums=tuple(float(s) for s in sums[i]),
            weighted_means=tuple(float(m) for m in means[i]),
            dominant=tracked[int(dominant_idx[i])],
            ratio=float(ratios[i]),
            potency=round_half_up(float(ratios[i]), 1),
            rank=int(ranks[i]),
        )
        for i in range(n_clusters)
    )
    return PotencyTable(
        entries=entries,
        beta=float(beta),
        tracked=tracked,
        weights=tuple(float(v) for v in w),
    )


def cluster_potency(
    model: ClusterModel,
    dataset: Dataset,
    weights=None,
    beta: float = DEFAULT_BETA,
    tracked: Sequence[str] = TRACKED_POLLUTANTS,
) -> PotencyTable:
    """Assign every reading to its nearest centroid and score the clusters.

    Assignment happens in the model's normalized space; sums and means are
    taken over the raw concentrations, scaled by the weight factors.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("no readings to score")
    X_raw = dataset.to_matrix()
    Xn = model.normalization.transform(X_raw) if model.normalization is not None else X_raw
    labels = assign(model, Xn)
    return potency_from_assignments(
        X_raw, labels, weights=weights, beta=beta, tracked=tracked, k=model.k
    )


def personal_cluster_counts(model: ClusterModel, dataset: Dataset) -> np.ndarray:
    """Visit counts per reference cluster for one person's readings.

    Readings are normalized with the reference model's parameters and
    assigned to the nearest frozen centroid; counts sum to len(dataset).
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("no readings to count")
    X = dataset.to_matrix()
    if model.normalization is not None:
        X = model.normalization.transform(X)
    return np.bincount(assign(model, X), minlength=model.k)


def greedy_centroid_match(new_centroids: np.ndarray, ref_centroids: np.ndarray) -> np.ndarray:
    """One-to-one greedy matching: mapping[i] is the reference index for
    new centroid i, chosen by repeatedly pairing the globally closest
    remaining (new, reference) centroids."""
    new_c = np.asarray(new_centroids, dtype=float)
    ref_c = np.asarray(ref_centroids, dtype=float)
    if new_c.shape != ref_c.shape:
        raise LengthMismatchError("centroid sets must have matching shapes")
    k = new_c.shape[0]
    d2 = ((new_c[:, None, :] - ref_c[None, :, :]) ** 2).sum(axis=2)
    mapping = np.full(k, -1, dtype=int)
    free_new = set(range(k))
    free_ref = set(range(k))
    for _ in range(k):
        best = None
        for i in sorted(free_new):
            for j in sorted(free_ref):
                key = (d2[i, j], i, j)
                if best is None or key < best:
                    best = key
        _, i, j = best
        mapping[i] = j
        free_new.remove(i)
        free_ref.remove(j)
    assert sorted(mapping) == list(range(k))
    return mapping


def reclustered_counts(
    model: ClusterModel, dataset: Dataset, seed: int = 0, n_restarts: int = 10
) -> np.ndarray:
    """Counts under a fresh k-means fit of this person's data, reported in
    the reference model's cluster index space via greedy centroid matching."""
    if len(dataset) == 0:
        raise EmptyDatasetError("no readings to count")
    X = dataset.to_matrix()
    Xn = model.normalization.transform(X) if model.normalization is not None else X
    personal = kmeans_fit(Xn, model.k, seed=seed, n_restarts=n_restarts)
    mapping = greedy_centroid_match(
        np.asarray(personal.centroids), np.asarray(model.centroids)
    )
    raw = np.bincount(assign(personal, Xn), minlength=model.k)
    counts = np.zeros(model.k, dtype=int)
    for i in range(model.k):
        counts[mapping[i]] = raw[i]
    return counts


def total_exposure(counts: Sequence[float], potencies) -> float:
    """Potency-weighted visit total: sum_i counts_i * potency_i."""
    if isinstance(potencies, PotencyTable):
        potencies = potencies.potencies()
    c = np.asarray(counts, dtype=float)
    p = np.asarray(potencies, dtype=float)
    if c.shape != p.shape:
        raise LengthMismatchError("counts and potencies differ in length")
    return float(np.dot(c, p))


def pollutant_exposure(
    dataset: Dataset, weights=None, tracked: Sequence[str] = TRACKED_POLLUTANTS
) -> np.ndarray:
    """Weighted concentration totals E_j = W_j * sum(x_j), tracked order."""
    if len(dataset) == 0:
        raise EmptyDatasetError("no readings to sum")
    cols = _tracked_columns(tracked)
    w = _as_weight_array(weights)
    X = dataset.to_matrix()
    return w[cols] * X[:, cols].sum(axis=0)


def normalize_cohort(values: np.ndarray, ndigits: Optional[int] = 2) -> np.ndarray:
    """Scale each column by its minimum so the least-exposed person reads
    1.00; entries are rounded half-up to ``ndigits`` (None to skip)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise EmptyInputError("cohort table must have at least one row")
    mins = values.min(axis=0)
    if np.any(mins <= 0):
        raise NonPositiveRawError("column minima must be positive to normalize")
    out = values / mins
    if ndigits is not None:
        out = np.array(
            [[round_half_up(v, ndigits) for v in row] for row in out], dtype=float
        )
    return out


def _window_grid(dataset: Dataset, window_minutes: float, step_minutes: float):
    if window_minutes <= 0 or step_minutes <= 0:
        raise ValueError("window and step must be positive")
    if len(dataset) == 0:
        raise EmptyDatasetError("dataset holds no readings")
    stamps = [r.timestamp for r in dataset]
    t0, t_last = stamps[0], stamps[-1]
    gaps = [(b - a).total_seconds() for a, b in zip(stamps[:-1], stamps[1:]) if b > a]
    period = min(gaps) if gaps else 60.0
    window_s = window_minutes * 60.0
    step_s = step_minutes * 60.0
    span = (t_last - t0).total_seconds() + period
    if span < window_s:
        raise WindowLargerThanDataError(
            f"recording covers {span / 60.0:.1f} min, "
            f"shorter than one {window_minutes:g}-min window"
        )
    starts = []
    k = 0
    while k * step_s + window_s <= span + 1e-9:
        starts.append(k * step_s)
        k += 1
    rel = np.asarray([(s - t0).total_seconds() for s in stamps])
    return t0, t_last, np.asarray(starts), window_s, rel


def classify_windows(
    model,
    dataset: Dataset,
    window_minutes: float = 15.0,
    step_minutes: float = 5.0,
    normalization: Optional[NormalizationParams] = None,
):
    """Mean-vector classification of sliding windows.

    Returns (centers, labels, proba): window-center datetimes, the predicted
    label per window, and the full probability row per window.  Windows are
    half-open [start, start + window) intervals stepped from the first
    reading; empty windows are skipped.
    """
    t0, _, starts, window_s, rel = _window_grid(dataset, window_minutes, step_minutes)
    X = dataset.to_matrix()
    centers = []
    feats = []
    for s in starts:
        inside = (rel >= s - 1e-9) & (rel < s + window_s - 1e-9)
        if not inside.any():
            continue
        feats.append(X[inside].mean(axis=0))
        centers.append(t0 + timedelta(seconds=s + window_s / 2.0))
    feats = np.asarray(feats)
    if normalization is not None:
        feats = normalization.transform(feats)
    proba = model.predict_proba(feats)
    class_list = list(model.class_list)
    labels = [class_list[int(i)] for i in np.argmax(proba, axis=1)]
    return centers, labels, proba


def smooth_votes(labels: Sequence, width: int = 3) -> list:
    """Sliding majority filter; ties keep the center vote.  Edge windows
    shrink to the available neighbors."""
    if width < 1 or width % 2 == 0:
        raise ValueError("width must be a positive odd number")
    half = width // 2
    n = len(labels)
    out = []
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        tally: dict = {}
        for v in labels[lo:hi]:
            tally[v] = tally.get(v, 0) + 1
        best = max(tally.values())
        winners = [v for v, c in tally.items() if c == best]
        out.append(labels[i] if len(winners) > 1 else winners[0])
    return out


def window_truth_labels(
    dataset: Dataset, window_minutes: float = 15.0, step_minutes: float = 5.0
) -> list[str]:
    """Majority true activity label per sliding window (ties keep the
    label seen first inside the window); readings without an activity
    count as Unknown."""
    t0, _, starts, window_s, rel = _window_grid(dataset, window_minutes, step_minutes)
    raw = [r.activity.value if r.activity is not None else "Unknown" for r in dataset]
    out = []
    for s in starts:
        inside = np.nonzero((rel >= s - 1e-9) & (rel < s + window_s - 1e-9))[0]
        if inside.size == 0:
            continue
        tally: dict[str, int] = {}
        order: list[str] = []
        for i in inside:
            lbl = raw[int(i)]
            if lbl not in tally:
                order.append(lbl)
            tally[lbl] = tally.get(lbl, 0) + 1
        best = max(tally.values())
        out.append(next(lbl for lbl in order if tally[lbl] == best))
    return out


def segment_activities(
    model,
    dataset: Dataset,
    window_minutes: float = 15.0,
    step_minutes: float = 5.0,
    smooth_width: int = 3,
    normalization: Optional[NormalizationParams] = None,
) -> ActivityTimeline:
    """Sliding-window classification merged into a labeled timeline.

    Window votes are majority-smoothed, consecutive equal labels merge into
    segments, and the boundary between two segments falls at the midpoint
    of the adjacent window centers.  The first segment is stretched back to
    the first reading and the last forward to the final reading, so the
    timeline covers the recording exactly.  Segment confidence is the mean
    predicted probability of the segment's label over its windows.
    """
    centers, labels, proba = classify_windows(
        model, dataset, window_minutes, step_minutes, normalization
    )
    smoothed = smooth_votes(labels, smooth_width)
    class_list = list(model.class_list)

    runs: list[tuple[int, int]] = []
    start = 0
    for i in range(1, len(smoothed)):
        if smoothed[i] != smoothed[i - 1]:
            runs.append((start, i))
            start = i
    runs.append((start, len(smoothed)))

    first_ts = dataset.readings[0].timestamp
    last_ts = dataset.readings[-1].timestamp
    segments = []
    for run_idx, (lo, hi) in enumerate(runs):
        label = smoothed[lo]
        if run_idx == 0:
            seg_start = first_ts
        else:
            prev_center = centers[lo - 1]
            seg_start = prev_center + (centers[lo] - prev_center) / 2
        if run_idx == len(runs) - 1:
            seg_end = last_ts
        else:
            seg_end = centers[hi - 1] + (centers[hi] - centers[hi - 1]) / 2
        col = class_list.index(label)
        confidence = float(np.mean(proba[lo:hi, col]))
        segments.append(
            TimelineSegment(start=seg_start, end=seg_end, label=str(label), confidence=confidence)
        )
    return ActivityTimeline(segments=tuple(segments))


def save_potency_table(table: PotencyTable, path) -> None:
    text = json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_potency_table(path) -> PotencyTable:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptDocumentError(f"not valid JSON: {exc}") from None
    try:
        version = int(doc["schema_version"])
        if version > POTENCY_SCHEMA_VERSION:
            raise SchemaVersionMismatchError(
                f"document schema {version} is newer than supported {POTENCY_SCHEMA_VERSION}"
            )
        return PotencyTable.from_dict(doc)
    except SchemaVersionMismatchError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDocumentError(f"malformed potency document: {exc}") from None


def write_cohort_csv(reports: Sequence[ExposureReport], path) -> None:
    """Cohort table: one row per person, with raw and cohort-normalized
    per-pollutant exposure plus the potency-weighted total."""
    if not reports:
        raise EmptyInputError("no exposure reports to write")
    tracked = reports[0].tracked
    header = (
        ["person_id", "date", "total_exposure"]
        + [f"raw_{p}" for p in tracked]
        + [f"norm_{p}" for p in tracked]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rep in reports:
            norm = (
                ["" for _ in tracked]
                if rep.normalized_exposure is None
                else [repr(float(v)) for v in rep.normalized_exposure]
            )
            writer.writerow(
                [rep.person_id, rep.date, repr(float(rep.total))]
                + [repr(float(v)) for v in rep.raw_exposure]
                + norm
            )


def write_timeline_csv(timeline: ActivityTimeline, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start", "end", "label", "confidence"])
        for seg in timeline.segments:
            writer.writerow(
                [
                    format_timestamp(seg.start),
                    format_timestamp(seg.end),
                    seg.label,
                    repr(float(seg.confidence)),
                ]
            )
