"""Domain types, CSV ingestion, preprocessing, and min-max normalization.

The five pollutants are always handled in the fixed order ``(no2, voc,
pm10, pm2_5, pm1)``; every matrix view produced anywhere in the package
uses that column order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import (
    BadNumberError,
    BadTimestampError,
    CorruptDocumentError,
    EmptyDatasetError,
    MissingHeaderError,
)

__all__ = [
    "POLLUTANTS",
    "CSV_HEADER",
    "SOURCE_ACTIVITIES",
    "PollutantVector",
    "ActivityLabel",
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
]

#: Fixed pollutant field order used by every vector/matrix view.
POLLUTANTS: tuple[str, ...] = ("no2", "voc", "pm10", "pm2_5", "pm1")

#: Exact CSV header for reading files.
CSV_HEADER: tuple[str, ...] = (
    "timestamp",
    "no2_ppb",
    "voc_ppb",
    "pm10_ugm3",
    "pm25_ugm3",
    "pm1_ugm3",
    "activity",
    "person_id",
)


class ActivityLabel(Enum):
    """Indoor pollution source labels; ``UNKNOWN`` never enters training targets."""

    COOKING = "Cooking"
    SMOKING = "Smoking"
    AIR_CONDITIONING = "AirConditioning"
    INCENSE_STICK = "IncenseStick"
    PAPER_BURNING = "PaperBurning"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str) -> "ActivityLabel":
        """Parse a label name; unrecognized names map to ``UNKNOWN``."""
        try:
            return cls(text)
        except ValueError:
            return cls.UNKNOWN

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: The five labels that may appear as classification targets.
SOURCE_ACTIVITIES: tuple[ActivityLabel, ...] = (
    ActivityLabel.COOKING,
    ActivityLabel.SMOKING,
    ActivityLabel.AIR_CONDITIONING,
    ActivityLabel.INCENSE_STICK,
    ActivityLabel.PAPER_BURNING,
)


@dataclass(frozen=True)
class PollutantVector:
    """One sensor sample over the five pollutants.

    Fields may be ``None`` straight after CSV parsing (empty cells); the
    preprocessing step drops such readings, so downstream matrix views only
    ever see finite, non-negative values.
    """

    no2: Optional[float]
    voc: Optional[float]
    pm10: Optional[float]
    pm2_5: Optional[float]
    pm1: Optional[float]

    def as_tuple(self) -> tuple[Optional[float], ...]:
        return (self.no2, self.voc, self.pm10, self.pm2_5, self.pm1)

    def has_null(self) -> bool:
        return any(v is None for v in self.as_tuple())

    def has_negative(self) -> bool:
        return any(v is not None and v < 0 for v in self.as_tuple())


@dataclass(frozen=True)
class Reading:
    timestamp: datetime
    pollutants: PollutantVector
    activity: Optional[ActivityLabel] = None
    person_id: Optional[str] = None


@dataclass
class Dataset:
    """An ordered (by timestamp) list of readings plus a free-text source tag."""

    readings: tuple[Reading, ...]
    source_tag: str = ""

    def __len__(self) -> int:
        return len(self.readings)

    def __iter__(self) -> Iterator[Reading]:
        return iter(self.readings)

    def to_matrix(self) -> np.ndarray:
        """Raw (n, 5) float matrix in POLLUTANTS column order.

        Readings must be free of nulls (i.e. preprocessed).
        """
        rows = []
        for r in self.readings:
            t = r.pollutants.as_tuple()
            if any(v is None for v in t):
                raise ValueError("dataset contains null pollutant values; run preprocess first")
            rows.append(t)
        return np.asarray(rows, dtype=float).reshape(len(rows), len(POLLUTANTS))


@dataclass(frozen=True)
class PreprocessReport:
    input_count: int
    dropped_null: int
    dropped_negative: int
    dropped_duplicate: int
    output_count: int

    def __post_init__(self) -> None:
        expected = (
            self.input_count
            - self.dropped_null
            - self.dropped_negative
            - self.dropped_duplicate
        )
        if self.output_count != expected:
            raise ValueError("preprocess counts do not reconcile")


@dataclass(frozen=True)
class NormalizationParams:
    """Per-pollutant (min, max) pairs, in POLLUTANTS order."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mins) != len(POLLUTANTS) or len(self.maxs) != len(POLLUTANTS):
            raise ValueError("normalization params must cover all five pollutants")
        if any(hi < lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("max < min in normalization params")

    @property
    def degenerate(self) -> tuple[bool, ...]:
        """Flags the fields where max = min (constant columns)."""
        return tuple(hi == lo for lo, hi in zip(self.mins, self.maxs))

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Map values to (v - min)/(max - min); degenerate fields map to 0.0.

        Values outside the fitted range are deliberately not clamped, so
        distances stay monotone for unseen data.
        """
        X = np.asarray(X, dtype=float)
        mins = np.asarray(self.mins)
        spans = np.asarray(self.maxs) - mins
        out = np.zeros_like(X, dtype=float)
        ok = spans > 0
        out[:, ok] = (X[:, ok] - mins[ok]) / spans[ok]
        return out

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        """Undo :meth:`transform` (degenerate fields recover the constant)."""
        Z = np.asarray(Z, dtype=float)
        mins = np.asarray(self.mins)
        spans = np.asarray(self.maxs) - mins
        return Z * spans + mins

    def to_dict(self) -> dict:
        return {"mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationParams":
        return cls(tuple(float(v) for v in doc["mins"]), tuple(float(v) for v in doc["maxs"]))


@dataclass(frozen=True)
class TimelineSegment:
    """A maximal constant-label span of time, with a prediction confidence.

    Ground-truth segments from the generator carry confidence 1.0.
    """

    start: datetime
    end: datetime
    label: str
    confidence: float = 1.0


# --- CSV ingestion ----------------------------------------------------------


def _parse_timestamp(text: str, row: int) -> datetime:
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise BadTimestampError(row, text) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_number(text: str, row: int, column: str) -> Optional[float]:
    if text.strip() == "":
        return None
    try:
        v = float(text)
    except ValueError:
        raise BadNumberError(row, column, text) from None
    if not math.isfinite(v):
        raise BadNumberError(row, column, text)
    return v


def parse_readings_csv(stream: Iterable[str], source_tag: str = "") -> Dataset:
    """Parse a reading CSV from a text stream.

    The header must match :data:`CSV_HEADER` exactly.  Empty cells become
    nulls, carried forward for :func:`preprocess` to drop.  Row numbers in
    errors are 1-based file line numbers (the header is row 1).
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeaderError("empty input: no header row") from None
    if header and header[0].startswith("﻿"):
        header = [header[0].lstrip("﻿"), *header[1:]]
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MissingHeaderError(
            f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )

    readings = []
    for row_no, cells in enumerate(reader, start=2):
        if not cells:
            continue  # blank line
        if len(cells) != len(CSV_HEADER):
            raise CorruptDocumentError(
                f"row {row_no}: expected {len(CSV_HEADER)} cells, got {len(cells)}"
            )
        ts = _parse_timestamp(cells[0], row_no)
        values = [
            _parse_number(cells[i + 1], row_no, CSV_HEADER[i + 1]) for i in range(len(POLLUTANTS))
        ]
        activity = ActivityLabel.parse(cells[6].strip()) if cells[6].strip() else None
        person = cells[7].strip() or None
        readings.append(Reading(ts, PollutantVector(*values), activity, person))

    readings.sort(key=lambda r: r.timestamp)  # stable: file order preserved on ties
    return Dataset(tuple(readings), source_tag=source_tag)


def read_readings_csv(path: str, source_tag: str = "") -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_readings_csv(fh, source_tag=source_tag or str(path))


def _format_number(v: Optional[float]) -> str:
    if v is None:
        return ""
    return repr(float(v))


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_readings_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset in the documented CSV schema (UTF-8, LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in dataset:
            cells = [
                format_timestamp(r.timestamp),
                *(_format_number(v) for v in r.pollutants.as_tuple()),
                r.activity.value if r.activity is not None else "",
                r.person_id or "",
            ]
            fh.write(",".join(cells) + "\n")


# --- preprocessing ----------------------------------------------------------


def preprocess(dataset: Dataset) -> tuple[Dataset, PreprocessReport]:
    """Drop null-valued and negative-valued readings, then duplicates.

    A reading with any null pollutant counts as a null drop (even if it also
    has negatives); duplicate detection is on (timestamp, person_id) with the
    first occurrence kept.  Idempotent.
    """
    ordered = sorted(dataset.readings, key=lambda r: r.timestamp)
    kept = []
    seen: set = set()
    n_null = n_neg = n_dup = 0
    for r in ordered:
        if r.pollutants.has_null():
            n_null += 1
            continue
        if r.pollutants.has_negative():
            n_neg += 1
            continue
        key = (r.timestamp, r.person_id)
        if key in seen:
            n_dup += 1
            continue
        seen.add(key)
        kept.append(r)
    report = PreprocessReport(
        input_count=len(ordered),
        dropped_null=n_null,
        dropped_negative=n_neg,
        dropped_duplicate=n_dup,
        output_count=len(kept),
    )
    return Dataset(tuple(kept), source_tag=dataset.source_tag), report


# --- normalization ----------------------------------------------------------


def fit_normalizer(dataset: Dataset) -> NormalizationParams:
    """Per-pollutant min and max over a non-empty, preprocessed dataset."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot fit a normalizer on an empty dataset")
    X = dataset.to_matrix()
    return NormalizationParams(
        mins=tuple(float(v) for v in X.min(axis=0)),
        maxs=tuple(float(v) for v in X.max(axis=0)),
    )


def apply_normalizer(params: NormalizationParams, dataset: Dataset) -> np.ndarray:
    """Normalized (n, 5) feature matrix for a dataset."""
    return params.transform(dataset.to_matrix())
