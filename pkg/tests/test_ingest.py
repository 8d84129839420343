from datetime import datetime, timedelta
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windclime.errors import OrderingError, ParseError
from windclime.ingest import (
    MetRecord,
    format_canonical_csv,
    format_isd_lite,
    parse_canonical_csv,
    parse_isd_lite,
    quality_filter,
    read_records,
    records_to_frame,
    frame_to_records,
)

DATA = Path(__file__).parent / "data"

# column spans of the fixed-width ISD-Lite layout (0-based, end exclusive)
ISD_COLUMNS = [(0, 4), (5, 7), (8, 10), (11, 13), (13, 19), (19, 25), (25, 31), (31, 37),
               (37, 43), (43, 49), (49, 55), (55, 61)]


def decode_fixed_columns(line):
    """Reference decoder: slices fixed columns instead of splitting on whitespace."""
    y, mo, d, h, temp, _dew, slp, wd, ws, _sky, p1, p6 = [int(line[a:b]) for a, b in ISD_COLUMNS]

    def tenth(v):
        return None if v == -9999 else v / 10

    p = p6 if p6 != -9999 else p1
    return MetRecord(datetime(y, mo, d, h), None if wd == -9999 else float(wd), tenth(ws),
                     tenth(slp), tenth(temp), None if p == -9999 else (0.0 if p == -1 else p / 10))


def test_worked_line():
    (r,) = parse_isd_lite("2010 01 09 00 -45 -89 10255 320 60 2 0 -9999\n")
    assert r.timestamp == datetime(2010, 1, 9, 0)
    assert (r.temperature, r.pressure, r.wind_dir, r.wind_speed, r.precip) == (-4.5, 1025.5, 320.0, 6.0, 0.0)


def test_fixture_matches_golden_records():
    text = (DATA / "isd_lite_sample.txt").read_text()
    records = parse_isd_lite(text)
    assert len(records) == 50
    golden = parse_canonical_csv((DATA / "isd_lite_sample.golden.csv").read_text())
    assert records == golden


def test_fixture_matches_fixed_column_decoder():
    lines = (DATA / "isd_lite_sample.txt").read_text().splitlines()
    assert parse_isd_lite("\n".join(lines)) == [decode_fixed_columns(l) for l in lines]


def test_fixture_round_trip():
    records = parse_isd_lite((DATA / "isd_lite_sample.txt").read_text())
    assert parse_isd_lite(format_isd_lite(records)) == records
    assert parse_canonical_csv(format_canonical_csv(records)) == records


def test_missing_speed_sentinel():
    (r,) = parse_isd_lite("2010 01 09 00 -45 -89 10255 320 -9999 2 0 -9999")
    assert r.wind_speed is None and r.wind_dir == 320.0


def test_precip_prefers_six_hour_field_and_maps_trace():
    a, b, c = parse_isd_lite("2010 01 09 00 0 0 10000 10 10 0 25 44\n"
                             "2010 01 09 03 0 0 10000 10 10 0 25 -9999\n"
                             "2010 01 09 06 0 0 10000 10 10 0 -9999 -1\n")
    assert (a.precip, b.precip, c.precip) == (4.4, 2.5, 0.0)


def test_eleven_fields_is_parse_error_with_line():
    text = "2010 01 09 00 -45 -89 10255 320 60 2 0 -9999\n2010 01 09 03 -45 -89 10255 320 60 2 0\n"
    with pytest.raises(ParseError) as exc:
        parse_isd_lite(text)
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


def test_non_integer_token_is_parse_error():
    with pytest.raises(ParseError):
        parse_isd_lite("2010 01 09 00 -45 -89 10255 320 6.0 2 0 -9999")


def test_decreasing_timestamp_is_ordering_error():
    text = "2010 01 09 03 0 0 10000 10 10 0 0 0\n2010 01 09 00 0 0 10000 10 10 0 0 0\n"
    with pytest.raises(OrderingError):
        parse_isd_lite(text)


def test_read_records_detects_format(tmp_path):
    isd = DATA / "isd_lite_sample.txt"
    csv_path = tmp_path / "r.csv"
    csv_path.write_text(format_canonical_csv(parse_isd_lite(isd.read_text())))
    assert read_records(isd) == read_records(csv_path)


def _rec(hours, speed=5.0, pressure=1000.0):
    return MetRecord(datetime(2010, 1, 1) + timedelta(hours=hours), 90.0, speed, pressure, 10.0, 0.0)


def test_duplicates_keep_first():
    out = quality_filter([_rec(0, 5.0), _rec(0, 7.0)])
    assert len(out) == 1 and out[0].wind_speed == 5.0


def test_range_rules():
    (r,) = quality_filter([_rec(0, speed=150.0, pressure=1200.0)])
    assert r.wind_speed is None and r.pressure is None
    assert r.wind_dir == 90.0 and r.temperature == 10.0


def test_empty_input():
    assert quality_filter([]) == []


def test_grid_alignment_and_gap_fill():
    out = quality_filter([_rec(0), _rec(1, 9.0), _rec(2, 4.0), _rec(12)])
    assert [r.timestamp.hour for r in out] == [0, 3, 6, 9, 12]
    assert out[0].wind_speed == 9.0  # hourly reports binned by maximum speed
    assert out[1].is_gap and out[2].is_gap and out[3].is_gap


def test_fixture_filtered_is_regular():
    out = quality_filter(parse_isd_lite((DATA / "isd_lite_sample.txt").read_text()))
    steps = {(b.timestamp - a.timestamp) for a, b in zip(out, out[1:])}
    assert steps == {timedelta(hours=3)}


def test_frame_round_trip():
    out = quality_filter(parse_isd_lite((DATA / "isd_lite_sample.txt").read_text()))
    assert frame_to_records(records_to_frame(out)) == out


opt_tenths = st.one_of(st.none(), st.integers(0, 600).map(lambda v: v / 10))


@st.composite
def record_lists(draw):
    n = draw(st.integers(0, 30))
    offsets = sorted(draw(st.lists(st.integers(0, 200), min_size=n, max_size=n)))
    out = []
    for h in offsets:
        out.append(MetRecord(datetime(2015, 6, 1) + timedelta(hours=h),
                             draw(st.one_of(st.none(), st.integers(0, 360).map(float))),
                             draw(st.one_of(st.none(), st.integers(0, 1600).map(lambda v: v / 10))),
                             draw(st.one_of(st.none(), st.integers(7000, 11500).map(lambda v: v / 10))),
                             draw(st.one_of(st.none(), st.integers(-300, 400).map(lambda v: v / 10))),
                             draw(opt_tenths)))
    return out


@given(record_lists())
@settings(max_examples=60, deadline=None)
def test_quality_filter_idempotent(records):
    once = quality_filter(records)
    assert quality_filter(once) == once


@given(record_lists())
@settings(max_examples=60, deadline=None)
def test_isd_round_trip_property(records):
    assert parse_isd_lite(format_isd_lite(records)) == records
