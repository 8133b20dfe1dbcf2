"""CSV ingestion, preprocessing, and min-max normalization."""

import io
from datetime import datetime, timezone

import numpy as np
import pytest

from aerolens import (
    CSV_HEADER,
    POLLUTANTS,
    ActivityLabel,
    Dataset,
    NormalizationParams,
    PollutantVector,
    PreprocessReport,
    Reading,
    apply_normalizer,
    fit_normalizer,
    format_timestamp,
    parse_readings_csv,
    preprocess,
    read_readings_csv,
    write_readings_csv,
)
from aerolens.errors import (
    BadNumberError,
    BadTimestampError,
    CorruptDocumentError,
    EmptyDatasetError,
    MissingHeaderError,
)
from _util import T0, make_dataset

HEADER = ",".join(CSV_HEADER)


def parse(text):
    return parse_readings_csv(io.StringIO(text))


def test_header_constant():
    assert CSV_HEADER == (
        "timestamp",
        "no2_ppb",
        "voc_ppb",
        "pm10_ugm3",
        "pm25_ugm3",
        "pm1_ugm3",
        "activity",
        "person_id",
    )
    assert POLLUTANTS == ("no2", "voc", "pm10", "pm2_5", "pm1")


def test_parse_basic_row():
    ds = parse(
        HEADER + "\n"
        "2023-07-25T08:00:00Z,12.5,300,110,35.5,18,Cooking,p-1\n"
    )
    assert len(ds) == 1
    r = ds.readings[0]
    assert r.timestamp == datetime(2023, 7, 25, 8, tzinfo=timezone.utc)
    assert r.pollutants.as_tuple() == (12.5, 300.0, 110.0, 35.5, 18.0)
    assert r.activity is ActivityLabel.COOKING
    assert r.person_id == "p-1"


def test_parse_empty_cells_become_nulls():
    ds = parse(HEADER + "\n2023-07-25T08:00:00Z,12.5,,110,35.5,18,,\n")
    r = ds.readings[0]
    assert r.pollutants.voc is None
    assert r.pollutants.has_null()
    assert r.activity is None
    assert r.person_id is None


def test_parse_unrecognized_activity_maps_to_unknown():
    ds = parse(HEADER + "\n2023-07-25T08:00:00Z,1,2,3,4,5,Vacuuming,p\n")
    assert ds.readings[0].activity is ActivityLabel.UNKNOWN


def test_parse_offset_timestamps_convert_to_utc():
    ds = parse(HEADER + "\n2023-07-25T05:30:00+05:30,1,2,3,4,5,,\n")
    assert ds.readings[0].timestamp == datetime(2023, 7, 25, 0, 0, tzinfo=timezone.utc)


def test_parse_sorts_by_timestamp_stably():
    ds = parse(
        HEADER + "\n"
        "2023-07-25T09:00:00Z,1,1,1,1,1,,late\n"
        "2023-07-25T08:00:00Z,2,2,2,2,2,,a\n"
        "2023-07-25T08:00:00Z,3,3,3,3,3,,b\n"
    )
    assert [r.person_id for r in ds] == ["a", "b", "late"]


def test_parse_skips_blank_lines():
    ds = parse(HEADER + "\n\n2023-07-25T08:00:00Z,1,2,3,4,5,,\n\n")
    assert len(ds) == 1


def test_parse_tolerates_byte_order_mark():
    ds = parse("﻿" + HEADER + "\n2023-07-25T08:00:00Z,1,2,3,4,5,,\n")
    assert len(ds) == 1


def test_parse_rejects_wrong_header():
    with pytest.raises(MissingHeaderError):
        parse("time,no2\n")
    with pytest.raises(MissingHeaderError):
        parse("")


def test_parse_rejects_bad_timestamp_with_row_number():
    with pytest.raises(BadTimestampError) as exc:
        parse(HEADER + "\n2023-07-25T08:00:00Z,1,2,3,4,5,,\nnot-a-time,1,2,3,4,5,,\n")
    assert exc.value.row == 3


def test_parse_rejects_bad_numbers():
    with pytest.raises(BadNumberError) as exc:
        parse(HEADER + "\n2023-07-25T08:00:00Z,twelve,2,3,4,5,,\n")
    assert exc.value.row == 2
    assert exc.value.column == "no2_ppb"
    for literal in ("nan", "inf", "-inf"):
        with pytest.raises(BadNumberError):
            parse(HEADER + f"\n2023-07-25T08:00:00Z,{literal},2,3,4,5,,\n")


def test_parse_rejects_short_rows():
    with pytest.raises(CorruptDocumentError):
        parse(HEADER + "\n2023-07-25T08:00:00Z,1,2,3\n")


def test_format_timestamp():
    assert format_timestamp(T0) == "2023-07-25T00:00:00Z"


def test_write_read_round_trip_is_exact(tmp_path):
    X = np.array(
        [
            [0.1, 1 / 3, 2.5e-7, 123456.789, 5.0],
            [7.0, 80.25, 90.125, 100.0, 110.0],
        ]
    )
    ds = make_dataset(X, activities=["Cooking", None], person_id="p-9")
    path = tmp_path / "out.csv"
    write_readings_csv(ds, str(path))
    back = read_readings_csv(str(path))
    np.testing.assert_array_equal(back.to_matrix(), X)
    assert back.readings[0].activity is ActivityLabel.COOKING
    assert back.readings[1].activity is None
    assert all(r.person_id == "p-9" for r in back)
    text = path.read_text(encoding="utf-8")
    assert "\r" not in text
    assert text.endswith("\n")
    assert text.splitlines()[0] == HEADER


def test_write_null_values_as_empty_cells(tmp_path):
    ds = Dataset(
        (Reading(T0, PollutantVector(1.0, None, 3.0, 4.0, 5.0)),)
    )
    path = tmp_path / "nulls.csv"
    write_readings_csv(ds, str(path))
    line = path.read_text().splitlines()[1]
    assert line == "2023-07-25T00:00:00Z,1.0,,3.0,4.0,5.0,,"


def test_to_matrix_requires_preprocessed_data():
    ds = Dataset((Reading(T0, PollutantVector(1.0, None, 3.0, 4.0, 5.0)),))
    with pytest.raises(ValueError):
        ds.to_matrix()


def test_preprocess_drops_nulls_negatives_and_duplicates():
    rows = [
        Reading(T0, PollutantVector(1, 2, 3, 4, 5), person_id="a"),
        Reading(T0, PollutantVector(9, 9, 9, 9, 9), person_id="a"),  # dup key
        Reading(T0, PollutantVector(1, 2, 3, 4, 5), person_id="b"),  # other person: kept
        Reading(T0, PollutantVector(None, 2, 3, 4, 5), person_id="c"),
        Reading(T0, PollutantVector(-1, 2, 3, 4, 5), person_id="d"),
        Reading(T0, PollutantVector(None, -2, 3, 4, 5), person_id="e"),  # null wins
    ]
    clean, report = preprocess(Dataset(tuple(rows)))
    assert report == PreprocessReport(
        input_count=6,
        dropped_null=2,
        dropped_negative=1,
        dropped_duplicate=1,
        output_count=2,
    )
    assert {r.person_id for r in clean} == {"a", "b"}
    # first occurrence of the duplicate key is the one kept
    kept_a = [r for r in clean if r.person_id == "a"][0]
    assert kept_a.pollutants.no2 == 1


def test_preprocess_is_idempotent():
    ds = make_dataset(np.arange(20.0).reshape(4, 5), person_id="p")
    once, _ = preprocess(ds)
    twice, report = preprocess(once)
    assert twice.readings == once.readings
    assert report.dropped_null == report.dropped_negative == report.dropped_duplicate == 0


def test_preprocess_report_must_reconcile():
    with pytest.raises(ValueError):
        PreprocessReport(10, 1, 1, 1, 9)


def test_normalizer_maps_fitted_data_into_unit_box():
    X = np.array(
        [
            [0.0, 10.0, 5.0, 1.0, 7.0],
            [10.0, 30.0, 5.0, 3.0, 8.0],
            [5.0, 20.0, 5.0, 2.0, 9.0],
        ]
    )
    ds = make_dataset(X)
    params = fit_normalizer(ds)
    Z = apply_normalizer(params, ds)
    assert Z.min() >= 0.0 and Z.max() <= 1.0
    np.testing.assert_allclose(Z[:, 0], [0.0, 1.0, 0.5])
    # constant column maps to 0.0
    np.testing.assert_array_equal(Z[:, 2], np.zeros(3))
    assert params.degenerate == (False, False, True, False, False)


def test_normalizer_does_not_clamp_unseen_values():
    params = NormalizationParams(mins=(0, 0, 0, 0, 0), maxs=(10, 10, 10, 10, 10))
    Z = params.transform(np.array([[20.0, -5.0, 5.0, 0.0, 10.0]]))
    np.testing.assert_allclose(Z[0], [2.0, -0.5, 0.5, 0.0, 1.0])


def test_normalizer_inverse_round_trips():
    X = np.array([[1.0, 2.0, 3.0, 4.0, 5.0], [6.0, 7.0, 8.0, 9.0, 10.0]])
    params = fit_normalizer(make_dataset(X))
    np.testing.assert_allclose(params.inverse(params.transform(X)), X)


def test_normalizer_validation():
    with pytest.raises(ValueError):
        NormalizationParams(mins=(0, 0, 0, 0, 0), maxs=(1, 1, 1, 1, -1))
    with pytest.raises(ValueError):
        NormalizationParams(mins=(0, 0), maxs=(1, 1))
    with pytest.raises(EmptyDatasetError):
        fit_normalizer(Dataset(()))


def test_normalization_params_round_trip_dict():
    params = NormalizationParams(mins=(0, 1, 2, 3, 4), maxs=(5, 6, 7, 8, 9))
    assert NormalizationParams.from_dict(params.to_dict()) == params
