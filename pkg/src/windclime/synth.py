"""Synthetic labelled station records.

A quiet autoregressive background (speeds below 10 m/s) gets storms planted
on top, each with a class-specific signature:

typhoon
    speed ramps to the peak while pressure dips, a precipitation burst and a
    steady veer of the wind direction
monsoon
    broad sustained speed hump, near-constant direction, pressure rising and
    temperature falling as the surge arrives
other
    short speed spike with little else going on

Peaks sit on the 3-hour grid and storms are at least ``min_spacing_hours``
apart, so the storm extractor should recover every one of them.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import ConfigError
from .features import CLASSES
from .ingest import CHANNELS, GRID_HOURS, format_timestamp, parse_timestamp
from .storms import storm_id_for

HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class SynthSpec:
    years: int = 10
    start_year: int = 2000
    storms_per_year: Mapping[str, int] = field(
        default_factory=lambda: {"typhoon": 10, "monsoon": 10, "other": 10})
    # typhoon
    typhoon_peak: tuple = (18.0, 32.0)
    pressure_dip_hpa: float = 25.0
    precip_burst_mm: float = 18.0
    direction_veer_deg: float = 140.0
    # monsoon
    monsoon_peak: tuple = (13.5, 20.0)
    monsoon_direction_deg: float = 45.0
    monsoon_direction_jitter_deg: float = 6.0
    # other
    other_peak: tuple = (13.0, 19.0)
    spike_duration_hours: float = 9.0
    # per-channel noise (speed m/s, direction deg, pressure hPa, temperature C, precip mm)
    noise: tuple = (0.6, 8.0, 1.0, 0.5, 0.3)
    min_spacing_hours: float = 120.0

    def __post_init__(self):
        if self.years < 1:
            raise ConfigError("years must be >= 1")
        for c, n in self.storms_per_year.items():
            if c not in CLASSES or n < 0:
                raise ConfigError(f"bad storm count {c}={n}")
        for name in ("typhoon_peak", "monsoon_peak", "other_peak"):
            lo, hi = getattr(self, name)
            if not 12.0 < lo <= hi:
                raise ConfigError(f"{name} must lie above 12 m/s, got {(lo, hi)}")


@dataclass(frozen=True)
class TruthStorm:
    storm_id: str
    label: str
    start: pd.Timestamp
    end: pd.Timestamp
    peak_time: pd.Timestamp
    peak_speed: float


@dataclass
class SynthStation:
    frame: pd.DataFrame
    truth: list


# half-widths of the truth interval, hours
_EXTENT = {"typhoon": 36, "monsoon": 48, "other": 12}
_SEASON = {"typhoon": (7, 8, 9), "monsoon": (11, 12, 1, 2, 3), "other": (4, 5, 6)}


def _place_storms(spec: SynthSpec, rng: np.random.Generator):
    per_year = sum(spec.storms_per_year.get(c, 0) for c in CLASSES)
    if per_year == 0:
        return []
    slot = HOURS_PER_YEAR / per_year
    if slot < spec.min_spacing_hours:
        raise ConfigError(f"{per_year} storms per year need {slot:.1f} h slots, "
                          f"below the {spec.min_spacing_hours} h minimum spacing")
    slack = (slot - spec.min_spacing_hours) / 2
    placed = []
    for y in range(spec.years):
        year_start = pd.Timestamp(year=spec.start_year + y, month=1, day=1)
        centers = []
        for k in range(per_year):
            h = slot * (k + 0.5) + rng.uniform(-slack, slack)
            h = GRID_HOURS * math.floor(h / GRID_HOURS)
            centers.append(year_start + pd.Timedelta(hours=h))
        free = list(range(per_year))
        labels = [None] * per_year
        for c in CLASSES:
            n = spec.storms_per_year.get(c, 0)
            if n == 0:
                continue
            w = np.array([4.0 if centers[i].month in _SEASON[c] else 1.0 for i in free])
            pick = rng.choice(len(free), size=n, replace=False, p=w / w.sum())
            chosen = sorted((free[i] for i in pick))
            for i in chosen:
                labels[i] = c
            free = [i for i in free if i not in set(chosen)]
        placed.extend(zip(centers, labels))
    # spacing floors to the grid; enforce the minimum exactly
    placed.sort(key=lambda p: p[0])
    for (a, _), (b, _) in zip(placed, placed[1:]):
        if (b - a) < pd.Timedelta(hours=spec.min_spacing_hours):
            raise ConfigError("storm spacing below minimum; reduce storms per year")
    return placed


def _background(n, hours, rng):
    speed = np.empty(n)
    s = 4.0
    eps = rng.normal(0.0, 1.0, n)
    for i in range(n):
        s = 4.0 + 0.9 * (s - 4.0) + eps[i]
        speed[i] = s
    speed = np.clip(speed, 0.3, 9.5)
    direction = np.mod(np.cumsum(rng.normal(0, 12, n)) + 180.0, 360.0)
    doy = (hours / 24.0) % 365.25
    pressure = 1013.0 + 8.0 * np.cos(2 * np.pi * (doy - 15) / 365.25) + rng.normal(0, 1.5, n)
    temp = 17.0 - 10.0 * np.cos(2 * np.pi * (doy - 15) / 365.25) + \
        3.0 * np.sin(2 * np.pi * (hours % 24) / 24.0) + rng.normal(0, 0.7, n)
    rain = rng.random(n) < 0.05
    precip = np.where(rain, rng.exponential(1.5, n), 0.0)
    return speed, direction, pressure, temp, precip


def generate_synthetic_station(spec: SynthSpec = SynthSpec(), seed: int = 0) -> SynthStation:
    """Gridded record stream plus the truth list of planted storms."""
    rng = np.random.default_rng(seed)
    start = pd.Timestamp(year=spec.start_year, month=1, day=1)
    end = pd.Timestamp(year=spec.start_year + spec.years, month=1, day=1) - pd.Timedelta(hours=GRID_HOURS)
    index = pd.date_range(start, end, freq=f"{GRID_HOURS}h", name="timestamp")
    n = len(index)
    hours = np.arange(n, dtype=float) * GRID_HOURS
    speed, direction, pressure, temp, precip = _background(n, hours, rng)
    placed = _place_storms(spec, rng)

    s_sd, d_sd, p_sd, t_sd, r_sd = spec.noise
    reach = int(spec.min_spacing_hours / 2 // GRID_HOURS)
    truth = []
    for center, label in placed:
        c = int((center - start) / pd.Timedelta(hours=GRID_HOURS))
        lo, hi = max(c - reach, 0), min(c + reach + 1, n)
        if c < 0 or c >= n:
            continue
        t = (np.arange(lo, hi) - c) * float(GRID_HOURS)
        m = hi - lo
        bg = speed[lo:hi]
        if label == "typhoon":
            peak = rng.uniform(*spec.typhoon_peak)
            w = np.exp(-np.abs(t) / 14.0)
            d0 = rng.uniform(40.0, 80.0)
            core = np.abs(t) <= 48
            direction[lo:hi] = np.where(core, d0 + spec.direction_veer_deg * 0.5 * (1 + np.tanh(t / 15.0))
                                        + rng.normal(0, d_sd, m), direction[lo:hi])
            depth = spec.pressure_dip_hpa * rng.uniform(0.6, 1.2)
            pressure[lo:hi] += -depth * np.exp(-t ** 2 / (2 * 18.0 ** 2)) + rng.normal(0, p_sd, m)
            burst = spec.precip_burst_mm * rng.uniform(0.5, 1.5)
            precip[lo:hi] += burst * np.exp(-t ** 2 / (2 * 9.0 ** 2)) + np.abs(rng.normal(0, r_sd, m))
            temp[lo:hi] += -2.0 * np.exp(-t ** 2 / (2 * 24.0 ** 2)) + rng.normal(0, t_sd, m)
        elif label == "monsoon":
            peak = rng.uniform(*spec.monsoon_peak)
            w = np.exp(-np.abs(t) / 30.0)
            d0 = spec.monsoon_direction_deg + rng.uniform(-10.0, 10.0)
            core = np.abs(t) <= 54
            direction[lo:hi] = np.where(core, d0 + rng.normal(0, spec.monsoon_direction_jitter_deg, m),
                                        direction[lo:hi])
            surge = 1.0 / (1.0 + np.exp(-t / 12.0))
            pressure[lo:hi] += 6.0 * surge + rng.normal(0, p_sd, m)
            temp[lo:hi] += -6.0 * surge + rng.normal(0, t_sd, m)
            precip[lo:hi] = np.where(core, np.abs(rng.normal(0, r_sd, m)), precip[lo:hi])
        else:
            peak = rng.uniform(*spec.other_peak)
            w = np.exp(-np.abs(t) / (spec.spike_duration_hours / 2.0))
            core = np.abs(t) <= 12
            direction[lo:hi] = np.where(core, rng.uniform(0, 360) + rng.normal(0, d_sd * 2, m),
                                        direction[lo:hi])
            pressure[lo:hi] += -1.5 * w + rng.normal(0, p_sd, m)
            temp[lo:hi] += rng.normal(0, t_sd, m)
            precip[lo:hi] += 2.0 * w * rng.uniform(0, 1) + np.abs(rng.normal(0, r_sd, m)) * core
        peak = round(peak, 1)
        s = bg * (1 - w) + peak * w + rng.normal(0, s_sd, m) * (w > 0.05)
        s[t == 0] = peak
        others = t != 0
        s[others] = np.minimum(s[others], peak - 0.1)
        speed[lo:hi] = np.maximum(s, 0.0)
        ext = pd.Timedelta(hours=_EXTENT[label])
        truth.append(TruthStorm(storm_id_for(center), label, center - ext, center + ext,
                                center, peak))

    data = np.column_stack([
        np.round(np.mod(direction, 360.0)),
        np.round(speed, 1),
        np.round(pressure, 1),
        np.round(temp, 1),
        np.round(np.maximum(precip, 0.0), 1),
    ])
    frame = pd.DataFrame(data, index=index, columns=list(CHANNELS))
    return SynthStation(frame, truth)


def format_truth_csv(truth) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["storm_id", "label", "start", "end"])
    for t in truth:
        w.writerow([t.storm_id, t.label, format_timestamp(t.start), format_timestamp(t.end)])
    return out.getvalue()


def parse_truth_csv(text: str) -> list[TruthStorm]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        start = pd.Timestamp(parse_timestamp(r["start"]))
        end = pd.Timestamp(parse_timestamp(r["end"]))
        out.append(TruthStorm(r["storm_id"], r["label"], start, end, start + (end - start) / 2,
                              math.nan))
    return out


def labels_from_truth(storms, truth, tolerance_hours: float = 24.0) -> dict:
    """Label detected storms by the planted storm whose peak is nearest.

    Storms with no planted peak within ``tolerance_hours`` stay unlabelled.
    """
    if not truth:
        return {}
    peaks = np.array([t.peak_time.value for t in truth])
    out = {}
    for s in storms:
        d = np.abs(peaks - pd.Timestamp(s.peak_time).value)
        i = int(np.argmin(d))
        if d[i] <= tolerance_hours * 3600e9:
            out[s.storm_id] = truth[i].label
    return out
