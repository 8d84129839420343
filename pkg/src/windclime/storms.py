"""Independent storm extraction.

Peaks above a threshold are picked greedily (highest first) with a minimum
separation, each peak gets a 96 h window on the 3-hour grid, and the window
is trimmed with recursive mean-shift segmentation (Bernaola-Galvan style):
the cut maximising a two-sample t statistic is accepted when its
significance reaches ``p0`` and both parts keep at least ``l0`` points. The
part holding the centre peak is the storm.
"""
from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import betainc

from .errors import ConfigError, TooShortError
from .ingest import GRID_HOURS, format_float, format_timestamp, parse_timestamp

EPSILON = 1e-9
BG_DELTA = 0.40
BG_ETA_SLOPE = 4.19
BG_ETA_OFFSET = -11.54

STORM_CSV_HEADER = ("storm_id", "start", "end", "peak_time", "peak_speed_ms", "n_points")


@dataclass(frozen=True)
class SegmentationConfig:
    p0: float = 0.7
    l0: int = 8
    epsilon: float = EPSILON

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ConfigError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.l0 < 2:
            raise ConfigError(f"l0 must be >= 2, got {self.l0}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")


@dataclass
class CandidateWindow:
    """Grid slots centred on a selected peak.

    ``records`` has one row per slot (NaN rows pad past the record edges);
    ``in_record`` flags slots that fall inside the station record.
    """

    records: pd.DataFrame
    in_record: np.ndarray
    peak_time: pd.Timestamp
    peak_speed: float

    @property
    def center(self) -> int:
        return len(self.records) // 2

    @property
    def speeds(self) -> np.ndarray:
        return self.records["wind_speed_ms"].to_numpy(float)


@dataclass
class StormSegment:
    records: pd.DataFrame
    start: pd.Timestamp
    end: pd.Timestamp
    peak_time: pd.Timestamp
    peak_speed: float
    storm_id: str = ""

    @property
    def n_points(self) -> int:
        return len(self.records)


def storm_id_for(peak_time) -> str:
    return "S" + pd.Timestamp(peak_time).strftime("%Y%m%d%H")


# ---------------------------------------------------------------------------
# threshold windowing


def _regular(frame: pd.DataFrame) -> pd.DataFrame:
    if len(frame) < 2:
        return frame
    full = pd.date_range(frame.index[0], frame.index[-1], freq=f"{GRID_HOURS}h")
    if len(full) == len(frame) and (full == frame.index).all():
        return frame
    return frame.reindex(full.rename(frame.index.name))


def select_peaks(times: np.ndarray, speeds: np.ndarray, threshold: float,
                 separation_hours: float) -> list[int]:
    """Greedy peak selection; returns sorted positions of the kept peaks.

    Candidates are visited by descending speed (earlier first on ties) and
    kept unless closer than ``separation_hours`` to an already kept peak.
    """
    speeds = np.asarray(speeds, float)
    hours = (np.asarray(times, "datetime64[s]").astype(np.int64)) / 3600.0
    cand = np.flatnonzero(np.nan_to_num(speeds, nan=-np.inf) > threshold)
    order = cand[np.lexsort((cand, -speeds[cand]))]
    kept_hours: list[float] = []
    kept: list[int] = []
    for i in order:
        h = hours[i]
        j = bisect.bisect_left(kept_hours, h)
        if j < len(kept_hours) and kept_hours[j] - h < separation_hours:
            continue
        if j > 0 and h - kept_hours[j - 1] < separation_hours:
            continue
        kept_hours.insert(j, h)
        kept.append(int(i))
    return sorted(kept)


def extract_candidate_windows(frame: pd.DataFrame, threshold: float = 12.0,
                              span_hours: float = 96.0) -> list[CandidateWindow]:
    """Cut one ``span_hours`` window around every independent peak.

    ``frame`` is a gridded station stream (see ``ingest.records_to_frame``).
    Windows clipped by the record edges are padded with missing slots and
    kept as long as one side of the peak is complete.
    """
    if len(frame) == 0:
        return []
    frame = _regular(frame)
    speeds = frame["wind_speed_ms"].to_numpy(float)
    times = frame.index.to_numpy()
    half = int(round(span_hours / 2 / GRID_HOURS))
    step = pd.Timedelta(hours=GRID_HOURS)
    start, stop = frame.index[0], frame.index[-1]

    windows = []
    for i in select_peaks(times, speeds, threshold, span_hours):
        left_avail = min(i, half) + 1
        right_avail = min(len(frame) - 1 - i, half) + 1
        if max(left_avail, right_avail) < half + 1:
            continue
        peak = frame.index[i]
        slots = pd.DatetimeIndex([peak + k * step for k in range(-half, half + 1)],
                                 name=frame.index.name)
        in_record = np.asarray((slots >= start) & (slots <= stop))
        windows.append(CandidateWindow(frame.reindex(slots), in_record, peak, float(speeds[i])))
    return windows


# ---------------------------------------------------------------------------
# recursive segmentation


def bg_split_statistic(series: Sequence[float], l0: int = 8,
                       epsilon: float = EPSILON) -> tuple[int, float]:
    """Best cut of ``series`` by the pooled two-sample t statistic.

    Cut ``i`` splits into ``series[:i]`` and ``series[i:]``; only cuts that
    leave ``l0`` points on both sides are considered. Missing values (NaN)
    are dropped first, so the returned index refers to the compacted series.
    Ties go to the smallest index.
    """
    x = np.asarray(series, dtype=float)
    x = x[~np.isnan(x)]
    n = len(x)
    cuts = range(l0, n - l0 + 1)
    if len(cuts) == 0:
        raise TooShortError(f"series of {n} points is too short to split with l0={l0}")
    best_i, best_t = -1, -1.0
    for i in cuts:
        a, b = x[:i], x[i:]
        n1, n2 = len(a), len(b)
        ma, mb = a.mean(), b.mean()
        pooled = (((a - ma) ** 2).sum() + ((b - mb) ** 2).sum()) / (n1 + n2 - 2)
        s_d = max(math.sqrt(pooled * (1.0 / n1 + 1.0 / n2)), epsilon)
        t = abs(ma - mb) / s_d
        if t > best_t:
            best_i, best_t = i, t
    return best_i, best_t


def bg_split_significance(t_max: float, n: int) -> float:
    """Approximate significance of a maximal t statistic over ``n`` points.

    ``P = (1 - I_x(delta*nu, delta)) ** eta`` with ``x = nu / (nu + t^2)``,
    ``nu = n - 2``, ``delta = 0.40`` and ``eta = 4.19 ln n - 11.54`` (floored
    at 1), ``I`` being the regularized incomplete beta function.
    """
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    nu = n - 2
    eta = max(BG_ETA_SLOPE * math.log(n) + BG_ETA_OFFSET, 1.0)
    if math.isinf(t_max):
        return 1.0
    x = nu / (nu + t_max * t_max)
    p = (1.0 - float(betainc(BG_DELTA * nu, BG_DELTA, x))) ** eta
    return min(max(p, 0.0), 1.0)


def bg_segment(series: Sequence[float], config: SegmentationConfig = SegmentationConfig()) -> list[int]:
    """Recursive segmentation; returns sorted cut positions in ``series``.

    A cut at position ``c`` means a new part starts at ``series[c]``. NaN
    slots are ignored by the statistics but keep their positions.
    """
    x = np.asarray(series, dtype=float)
    valid = np.flatnonzero(~np.isnan(x))
    values = x[valid]
    cuts: list[int] = []

    def recurse(lo, hi):
        n = hi - lo
        if n < 2 * config.l0:
            return
        i, t = bg_split_statistic(values[lo:hi], config.l0, config.epsilon)
        if bg_split_significance(t, n) < config.p0:
            return
        cuts.append(lo + i)
        recurse(lo, lo + i)
        recurse(lo + i, hi)

    recurse(0, len(values))
    return sorted(int(valid[c]) for c in cuts)


def finalize_storm(window: CandidateWindow, boundaries: Sequence[int]) -> StormSegment:
    """The part of ``window`` between adjacent cuts that holds the centre."""
    center = window.center
    edges = [0, *sorted(boundaries), len(window.records)]
    lo = max(e for e in edges if e <= center)
    hi = min(e for e in edges if e > center)
    mask = np.zeros(len(window.records), bool)
    mask[lo:hi] = True
    mask &= window.in_record
    part = window.records[mask]
    peak_speed = float(np.nanmax(part["wind_speed_ms"].to_numpy(float)))
    return StormSegment(part, part.index[0], part.index[-1], window.peak_time, peak_speed,
                        storm_id_for(window.peak_time))


def segment_storms(frame: pd.DataFrame, threshold: float = 12.0,
                   config: SegmentationConfig = SegmentationConfig(),
                   span_hours: float = 96.0) -> list[StormSegment]:
    """Windowing, segmentation and trimming over a whole station stream."""
    storms = []
    for w in extract_candidate_windows(frame, threshold, span_hours):
        cuts = bg_segment(w.speeds, config)
        storms.append(finalize_storm(w, cuts))
    return storms


# ---------------------------------------------------------------------------
# storm CSV


def format_storms_csv(storms: Sequence[StormSegment]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(STORM_CSV_HEADER)
    for s in storms:
        w.writerow([s.storm_id, format_timestamp(s.start), format_timestamp(s.end),
                    format_timestamp(s.peak_time), format_float(s.peak_speed), s.n_points])
    return out.getvalue()


@dataclass(frozen=True)
class StormRow:
    storm_id: str
    start: pd.Timestamp
    end: pd.Timestamp
    peak_time: pd.Timestamp
    peak_speed: float
    n_points: int


def parse_storms_csv(text: str) -> list[StormRow]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [StormRow(r["storm_id"], pd.Timestamp(parse_timestamp(r["start"])),
                     pd.Timestamp(parse_timestamp(r["end"])),
                     pd.Timestamp(parse_timestamp(r["peak_time"])),
                     float(r["peak_speed_ms"]), int(r["n_points"])) for r in rows]


def storms_from_rows(frame: pd.DataFrame, rows: Sequence[StormRow]) -> list[StormSegment]:
    """Rebuild segments by slicing a gridded stream with stored bounds."""
    out = []
    for r in rows:
        part = frame.loc[r.start:r.end]
        out.append(StormSegment(part, r.start, r.end, r.peak_time, r.peak_speed, r.storm_id))
    return out
