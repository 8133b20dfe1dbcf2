"""Synthetic activity-trace generator.

Substitutes for the unpublished sensor corpus: each activity has a profile
of per-pollutant truncated Gaussians, and a day is assembled from scheduled
activity segments with a low-level Baseline profile filling the gaps.

The default profile constants are documented reconstructions chosen to
satisfy qualitative orderings (VOC carries the highest mean everywhere,
cooking VOC tops every other activity, incense-stick PM10 puts substantial
mass above 200 µg/m³, air-conditioning VOC is tight and outlier-free,
paper-burning VOC spans only ~50 ppb, smoking VOC spans ~200 ppb).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import (
    POLLUTANTS,
    ActivityLabel,
    Dataset,
    PollutantVector,
    Reading,
    TimelineSegment,
)
from .errors import BadProfileError, OverlappingSegmentsError
from .seeding import rng_from

__all__ = [
    "Band",
    "ActivityProfile",
    "DEFAULT_PROFILES",
    "BASELINE_PROFILE",
    "ScheduleEntry",
    "generate_activity_trace",
    "generate_day_schedule",
]

_REJECTION_ROUNDS = 1000


@dataclass(frozen=True)
class Band:
    """Truncated-Gaussian parameters for one pollutant."""

    mean: float
    std_dev: float
    floor: float
    ceiling: float


@dataclass(frozen=True)
class ActivityProfile:
    """Per-pollutant concentration bands for one activity."""

    bands: Mapping[str, Band]

    def __post_init__(self) -> None:
        missing = [p for p in POLLUTANTS if p not in self.bands]
        if missing:
            raise BadProfileError(f"profile missing pollutants: {missing}")
        for name, b in self.bands.items():
            if b.std_dev < 0:
                raise BadProfileError(f"{name}: std_dev must be >= 0")
            if b.floor < 0:
                raise BadProfileError(f"{name}: floor must be >= 0")
            if b.ceiling <= b.floor:
                raise BadProfileError(f"{name}: ceiling must exceed floor")
            if b.std_dev == 0 and not (b.floor <= b.mean <= b.ceiling):
                raise BadProfileError(f"{name}: zero-spread band with mean outside bounds")


def _profile(**bands: tuple[float, float, float, float]) -> ActivityProfile:
    return ActivityProfile({name: Band(*params) for name, params in bands.items()})


#: Default per-activity generator profiles (mean, std_dev, floor, ceiling).
#: VOC bands are symmetric about their means so truncation does not shift them.
DEFAULT_PROFILES: dict[ActivityLabel, ActivityProfile] = {
    ActivityLabel.COOKING: _profile(
        no2=(60.0, 20.0, 0.0, 150.0),
        voc=(320.0, 50.0, 170.0, 470.0),
        pm10=(120.0, 60.0, 0.0, 400.0),
        pm2_5=(60.0, 25.0, 0.0, 200.0),
        pm1=(30.0, 15.0, 0.0, 120.0),
    ),
    ActivityLabel.SMOKING: _profile(
        no2=(80.0, 25.0, 0.0, 180.0),
        voc=(200.0, 45.0, 100.0, 300.0),
        pm10=(90.0, 35.0, 0.0, 190.0),
        pm2_5=(70.0, 30.0, 0.0, 180.0),
        pm1=(40.0, 18.0, 0.0, 120.0),
    ),
    ActivityLabel.AIR_CONDITIONING: _profile(
        no2=(25.0, 10.0, 0.0, 80.0),
        voc=(300.0, 45.0, 160.0, 440.0),
        pm10=(110.0, 40.0, 0.0, 210.0),
        pm2_5=(35.0, 15.0, 0.0, 120.0),
        pm1=(18.0, 8.0, 0.0, 60.0),
    ),
    ActivityLabel.INCENSE_STICK: _profile(
        no2=(35.0, 12.0, 0.0, 90.0),
        voc=(250.0, 70.0, 100.0, 400.0),
        pm10=(180.0, 70.0, 0.0, 350.0),
        pm2_5=(90.0, 35.0, 0.0, 250.0),
        pm1=(45.0, 20.0, 0.0, 150.0),
    ),
    ActivityLabel.PAPER_BURNING: _profile(
        no2=(45.0, 15.0, 0.0, 110.0),
        voc=(150.0, 18.0, 125.0, 175.0),
        pm10=(25.0, 10.0, 0.0, 48.0),
        pm2_5=(20.0, 8.0, 0.0, 45.0),
        pm1=(10.0, 5.0, 0.0, 30.0),
    ),
}

#: Low-level indoor background used to fill unscheduled time.
BASELINE_PROFILE: ActivityProfile = _profile(
    no2=(12.0, 4.0, 0.0, 30.0),
    voc=(60.0, 15.0, 10.0, 110.0),
    pm10=(20.0, 8.0, 0.0, 50.0),
    pm2_5=(12.0, 5.0, 0.0, 35.0),
    pm1=(8.0, 3.0, 0.0, 20.0),
)

_EPOCH_DEFAULT = datetime(2023, 7, 25, tzinfo=timezone.utc)


def _sample_band(rng: np.random.Generator, band: Band, n: int) -> np.ndarray:
    """Draw n truncated-Gaussian values by rejection sampling."""
    if band.std_dev == 0:
        return np.full(n, float(band.mean))
    out = rng.normal(band.mean, band.std_dev, size=n)
    bad = (out < band.floor) | (out > band.ceiling)
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > _REJECTION_ROUNDS:
            raise BadProfileError(
                f"band (mean={band.mean}, std={band.std_dev}) has negligible mass "
                f"inside [{band.floor}, {band.ceiling}]"
            )
        out[bad] = rng.normal(band.mean, band.std_dev, size=int(bad.sum()))
        bad = (out < band.floor) | (out > band.ceiling)
    return out


def _sample_profile(rng: np.random.Generator, profile: ActivityProfile, n: int) -> np.ndarray:
    """(n, 5) matrix of draws, one column per pollutant in fixed order."""
    cols = [_sample_band(rng, profile.bands[p], n) for p in POLLUTANTS]
    return np.column_stack(cols) if n else np.empty((0, len(POLLUTANTS)))


def generate_activity_trace(
    activity: ActivityLabel,
    duration_minutes: float,
    sampling_period_s: int = 60,
    profile: Optional[ActivityProfile] = None,
    seed: int = 0,
    start: datetime = _EPOCH_DEFAULT,
    person_id: Optional[str] = None,
) -> Dataset:
    """One labelled reading per sampling period over ``duration_minutes``.

    Deterministic for a fixed seed: the same arguments reproduce the same
    bytes on every platform (PCG64 stream, column-by-column rejection
    sampling in POLLUTANTS order).
    """
    if duration_minutes <= 0:
        raise ValueError("duration must be positive")
    if sampling_period_s <= 0:
        raise ValueError("sampling period must be positive")
    if profile is None:
        profile = DEFAULT_PROFILES.get(activity, BASELINE_PROFILE)
    n = int(duration_minutes * 60) // sampling_period_s
    rng = rng_from(seed)
    values = _sample_profile(rng, profile, n)
    readings = tuple(
        Reading(
            timestamp=start + timedelta(seconds=i * sampling_period_s),
            pollutants=PollutantVector(*(float(v) for v in values[i])),
            activity=activity,
            person_id=person_id,
        )
        for i in range(n)
    )
    return Dataset(readings, source_tag=f"synthetic:{activity.value}")


@dataclass(frozen=True)
class ScheduleEntry:
    """One scheduled activity block: start offset within the day + duration."""

    start_minute: int
    duration_minutes: int
    activity: ActivityLabel

    def __post_init__(self) -> None:
        if not 0 <= self.start_minute < 24 * 60:
            raise OverlappingSegmentsError(
                f"segment start {self.start_minute} outside the 24 h window"
            )
        if self.duration_minutes <= 0:
            raise OverlappingSegmentsError("segment duration must be positive")
        if self.start_minute + self.duration_minutes > 24 * 60:
            raise OverlappingSegmentsError("segment extends past the 24 h window")


def generate_day_schedule(
    schedule: Sequence[ScheduleEntry],
    seed: int = 0,
    sampling_period_s: int = 60,
    base_date: datetime = _EPOCH_DEFAULT,
    profiles: Optional[Mapping[ActivityLabel, ActivityProfile]] = None,
    baseline: ActivityProfile = BASELINE_PROFILE,
    person_id: Optional[str] = None,
) -> tuple[Dataset, list[TimelineSegment]]:
    """A full 24 h of readings on a uniform grid, plus the true timeline.

    Scheduled blocks draw from their activity profiles; gaps draw from the
    Baseline profile and are labelled ``UNKNOWN``.  The returned timeline
    lists the exact block boundaries (adjacent same-label blocks merged),
    confidence 1.0 throughout.
    """
    if profiles is None:
        profiles = DEFAULT_PROFILES
    day_start = base_date.astimezone(timezone.utc).replace(
        hour=0, minute=0, second=0, microsecond=0
    )

    ordered = sorted(schedule, key=lambda e: e.start_minute)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start_minute < prev.start_minute + prev.duration_minutes:
            raise OverlappingSegmentsError(
                f"segment at minute {cur.start_minute} overlaps the one at "
                f"minute {prev.start_minute}"
            )

    # Tile [0, 1440) minutes with scheduled blocks and baseline gap fillers.
    blocks: list[tuple[int, int, ActivityLabel]] = []
    cursor = 0
    for e in ordered:
        if e.start_minute > cursor:
            blocks.append((cursor, e.start_minute, ActivityLabel.UNKNOWN))
        blocks.append((e.start_minute, e.start_minute + e.duration_minutes, e.activity))
        cursor = e.start_minute + e.duration_minutes
    if cursor < 24 * 60:
        blocks.append((cursor, 24 * 60, ActivityLabel.UNKNOWN))

    rng = rng_from(seed)
    readings: list[Reading] = []
    for start_min, end_min, label in blocks:
        profile = (
            baseline
            if label is ActivityLabel.UNKNOWN
            else profiles.get(label, baseline)
        )
        # grid points i*period falling inside [start, end) seconds
        lo, hi = start_min * 60, end_min * 60
        first = -(-lo // sampling_period_s)  # ceil division
        ticks = range(first, -(-hi // sampling_period_s))
        values = _sample_profile(rng, profile, len(ticks))
        for j, tick in enumerate(ticks):
            readings.append(
                Reading(
                    timestamp=day_start + timedelta(seconds=tick * sampling_period_s),
                    pollutants=PollutantVector(*(float(v) for v in values[j])),
                    activity=label,
                    person_id=person_id,
                )
            )

    timeline: list[TimelineSegment] = []
    for start_min, end_min, label in blocks:
        seg = TimelineSegment(
            start=day_start + timedelta(minutes=start_min),
            end=day_start + timedelta(minutes=end_min),
            label=label.value,
            confidence=1.0,
        )
        if timeline and timeline[-1].label == seg.label and timeline[-1].end == seg.start:
            timeline[-1] = TimelineSegment(timeline[-1].start, seg.end, seg.label, 1.0)
        else:
            timeline.append(seg)

    return Dataset(tuple(readings), source_tag="synthetic:day"), timeline
