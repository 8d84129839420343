"""Station record parsing, quality control and the canonical 3-hour grid.

Two input formats are understood:

* ISD-Lite text (12 whitespace separated integer columns, ``-9999`` missing)
* canonical CSV with header ``timestamp,wind_dir_deg,wind_speed_ms,
  pressure_hpa,temp_c,precip_mm`` and empty cells for missing values

Everything downstream works on a :class:`pandas.DataFrame` indexed by UTC
timestamp on a regular 3-hour grid (see :func:`records_to_frame`).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from .errors import ConfigError, OrderingError, ParseError
from .terrain import RoughnessTable

MISSING = -9999
GRID_HOURS = 3
CSV_HEADER = ("timestamp", "wind_dir_deg", "wind_speed_ms", "pressure_hpa", "temp_c", "precip_mm")
CHANNELS = CSV_HEADER[1:]

MAX_SPEED = 120.0
PRESSURE_RANGE = (800.0, 1100.0)


@dataclass(frozen=True)
class MetRecord:
    """One station observation. ``None`` marks a missing value.

    ``timestamp`` is a naive datetime interpreted as UTC.
    """

    timestamp: datetime
    wind_dir: Optional[float] = None
    wind_speed: Optional[float] = None
    pressure: Optional[float] = None
    temperature: Optional[float] = None
    precip: Optional[float] = None

    @property
    def is_gap(self) -> bool:
        return all(v is None for v in self.values())

    def values(self):
        return (self.wind_dir, self.wind_speed, self.pressure, self.temperature, self.precip)


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    latitude: float
    longitude: float
    record_years: float
    roughness: RoughnessTable = field(default_factory=RoughnessTable.identity)

    def __post_init__(self):
        if not self.record_years > 0:
            raise ConfigError(f"record_years must be > 0, got {self.record_years}")
        if not -90.0 <= self.latitude <= 90.0:
            raise ConfigError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ConfigError(f"longitude out of range: {self.longitude}")


# ---------------------------------------------------------------------------
# ISD-Lite


def _scaled(raw: int) -> Optional[float]:
    return None if raw == MISSING else raw / 10.0


def _parse_isd_line(line: str, lineno: int) -> MetRecord:
    tokens = line.split()
    if len(tokens) != 12:
        raise ParseError(f"expected 12 fields, found {len(tokens)}", lineno)
    try:
        v = [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"non-integer field: {exc}", lineno) from None
    year, month, day, hour, temp, _dew, slp, wdir, wspd, _sky, p1, p6 = v
    try:
        ts = datetime(year, month, day, hour)
    except ValueError as exc:
        raise ParseError(f"invalid date/time: {exc}", lineno) from None

    direction = None if wdir == MISSING or not 0 <= wdir <= 360 else float(wdir)
    speed = _scaled(wspd)
    if speed is not None and speed < 0:
        speed = None
    raw_precip = p6 if p6 != MISSING else p1
    # -1 is the ISD trace-amount code
    precip = None if raw_precip == MISSING else max(raw_precip, 0) / 10.0
    return MetRecord(ts, direction, speed, _scaled(slp), _scaled(temp), precip)


def parse_isd_lite(text: str) -> list[MetRecord]:
    """Decode ISD-Lite content into records.

    Blank lines are skipped. Equal consecutive timestamps are allowed (they
    are collapsed by :func:`quality_filter`); a timestamp earlier than its
    predecessor raises :class:`OrderingError`.
    """
    records = []
    previous = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        rec = _parse_isd_line(line, lineno)
        if previous is not None and rec.timestamp < previous:
            raise OrderingError(f"line {lineno}: timestamp {rec.timestamp:%Y-%m-%d %H}h "
                                f"precedes {previous:%Y-%m-%d %H}h")
        previous = rec.timestamp
        records.append(rec)
    return records


def _tenths(value: Optional[float]) -> int:
    return MISSING if value is None else int(round(value * 10))


def format_isd_lite(records: Iterable[MetRecord]) -> str:
    """Serialize records as fixed-width ISD-Lite lines.

    Dew point, sky code and the 1-hour precipitation are written as missing;
    precipitation goes into the 6-hour column so that re-parsing is lossless.
    """
    lines = []
    for r in records:
        ts = r.timestamp
        fields = (
            _tenths(r.temperature), MISSING, _tenths(r.pressure),
            MISSING if r.wind_dir is None else int(round(r.wind_dir)),
            _tenths(r.wind_speed), MISSING, MISSING, _tenths(r.precip),
        )
        lines.append(f"{ts.year:4d} {ts.month:02d} {ts.day:02d} {ts.hour:02d}"
                     + "".join(f"{f:6d}" for f in fields))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# canonical CSV


def format_timestamp(ts) -> str:
    return pd.Timestamp(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


def format_float(value) -> str:
    """Shortest round-trip text for a float; empty for missing."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def parse_canonical_csv(text: str) -> list[MetRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"unexpected header {header!r}", 1)
    records = []
    previous = None
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} fields, found {len(row)}", lineno)
        try:
            ts = parse_timestamp(row[0])
            vals = [float(c) if c.strip() else None for c in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if previous is not None and ts < previous:
            raise OrderingError(f"line {lineno}: timestamp out of order")
        previous = ts
        records.append(MetRecord(ts, *vals))
    return records


def format_canonical_csv(records: Iterable[MetRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([format_timestamp(r.timestamp)] + [format_float(v) for v in r.values()])
    return out.getvalue()


def read_records(path) -> list[MetRecord]:
    """Read ISD-Lite or canonical CSV, chosen by the first line."""
    text = Path(path).read_text()
    first = text.lstrip().split("\n", 1)[0]
    if first.startswith("timestamp,"):
        return parse_canonical_csv(text)
    return parse_isd_lite(text)


# ---------------------------------------------------------------------------
# quality control


def _grid_floor(ts: datetime) -> datetime:
    return ts.replace(hour=ts.hour - ts.hour % GRID_HOURS, minute=0, second=0, microsecond=0)


def _range_checked(r: MetRecord) -> MetRecord:
    speed, pressure = r.wind_speed, r.pressure
    if speed is not None and speed > MAX_SPEED:
        speed = None
    if pressure is not None and not PRESSURE_RANGE[0] <= pressure <= PRESSURE_RANGE[1]:
        pressure = None
    if speed is r.wind_speed and pressure is r.pressure:
        return r
    return MetRecord(r.timestamp, r.wind_dir, speed, pressure, r.temperature, r.precip)


def quality_filter(records: Iterable[MetRecord]) -> list[MetRecord]:
    """Deduplicate, range-check and regrid records to the 3-hour grid.

    Records sharing a timestamp keep the first. Off-grid records are binned
    to the preceding grid instant and the bin keeps the record with the
    highest wind speed along with its concurrent values. Grid instants with
    no data are filled with all-missing gap records.
    """
    seen = {}
    for r in sorted(records, key=lambda r: r.timestamp):
        seen.setdefault(r.timestamp, r)
    if not seen:
        return []

    bins: dict[datetime, MetRecord] = {}
    for ts, r in seen.items():
        r = _range_checked(r)
        slot = _grid_floor(ts)
        best = bins.get(slot)
        if best is None:
            bins[slot] = r
        elif r.wind_speed is not None and (best.wind_speed is None or r.wind_speed > best.wind_speed):
            bins[slot] = r

    out = []
    step = timedelta(hours=GRID_HOURS)
    slot = min(bins)
    last = max(bins)
    while slot <= last:
        r = bins.get(slot)
        if r is None:
            out.append(MetRecord(slot))
        elif r.timestamp != slot:
            out.append(MetRecord(slot, *r.values()))
        else:
            out.append(r)
        slot += step
    return out


# ---------------------------------------------------------------------------
# frame conversion


def records_to_frame(records: Iterable[MetRecord]) -> pd.DataFrame:
    """Records to a float DataFrame (NaN = missing) indexed by timestamp."""
    records = list(records)
    index = pd.DatetimeIndex([r.timestamp for r in records], name="timestamp")
    data = np.array([[np.nan if v is None else v for v in r.values()] for r in records],
                    dtype=float).reshape(len(records), len(CHANNELS))
    return pd.DataFrame(data, index=index, columns=list(CHANNELS))


def frame_to_records(frame: pd.DataFrame) -> list[MetRecord]:
    out = []
    values = frame[list(CHANNELS)].to_numpy(dtype=float)
    for ts, row in zip(frame.index, values):
        out.append(MetRecord(pd.Timestamp(ts).to_pydatetime(),
                             *[None if np.isnan(v) else float(v) for v in row]))
    return out


def apply_roughness(frame: pd.DataFrame, table: RoughnessTable) -> pd.DataFrame:
    """Return a copy with wind speeds corrected to open-terrain exposure."""
    out = frame.copy()
    out["wind_speed_ms"] = table.correct_array(frame["wind_speed_ms"].to_numpy(float),
                                               frame["wind_dir_deg"].to_numpy(float))
    return out
