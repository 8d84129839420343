"""Storm feature vectors and label helpers.

Each storm becomes 82 numbers: eight summary statistics for each of the five
channels on raw values (40), the same on first differences (40), then the
peak month and the station latitude.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import astuple, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ParseError
from .ingest import CHANNELS, StationMeta, format_float, parse_timestamp
from .storms import StormSegment

log = logging.getLogger(__name__)

CLASSES = ("typhoon", "monsoon", "other")
STAT_NAMES = ("mean", "std", "skew", "kurt", "max", "min", "range", "median")
N_FEATURES = 2 * len(CHANNELS) * len(STAT_NAMES) + 2
EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class FeatureStats:
    mean: float
    std: float
    skew: float
    kurt: float
    max: float
    min: float
    range: float
    median: float

    def as_tuple(self):
        return astuple(self)


def series_stats(values: Iterable[float]) -> FeatureStats:
    """Population moments and order statistics of the non-missing values.

    Skewness is ``m3 / m2**1.5`` and kurtosis is excess (``m4 / m2**2 - 3``);
    both are 0 for a constant series.
    """
    x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise ValueError("series_stats needs at least one non-missing value")
    hi, lo = x.max(), x.min()
    if hi == lo:  # exact, so summation rounding cannot leak into the moments
        return FeatureStats(float(hi), 0.0, 0.0, 0.0, float(hi), float(hi), 0.0, float(hi))
    mu = x.mean()
    d = x - mu
    m2 = np.mean(d ** 2)
    if m2 > 0:
        skew = np.mean(d ** 3) / m2 ** 1.5
        kurt = np.mean(d ** 4) / m2 ** 2 - 3.0
    else:
        skew = kurt = 0.0
    return FeatureStats(float(mu), math.sqrt(m2), float(skew), float(kurt),
                        float(hi), float(lo), float(hi - lo), float(np.median(x)))


def feature_names() -> list[str]:
    names = [f"{ch}_{s}" for ch in CHANNELS for s in STAT_NAMES]
    names += [f"diff_{ch}_{s}" for ch in CHANNELS for s in STAT_NAMES]
    return names + ["peak_month", "latitude"]


def _channel_stats(x: np.ndarray, storm_id: str, what: str) -> tuple:
    if np.all(np.isnan(x)):
        log.warning("storm %s: %s has no valid values, filling zeros", storm_id, what)
        return (0.0,) * len(STAT_NAMES)
    return series_stats(x).as_tuple()


def featurize_storm(storm: StormSegment, station: StationMeta) -> np.ndarray:
    """82-entry feature vector for one storm segment.

    A channel with no valid values contributes zeros (and a log warning).
    Differences are taken between consecutive slots; a difference touching
    a missing slot is itself missing.
    """
    if storm.n_points < 2:
        raise ValueError(f"storm {storm.storm_id!r} has {storm.n_points} point(s); need >= 2")
    data = storm.records[list(CHANNELS)].to_numpy(float)
    first, second = [], []
    for k, ch in enumerate(CHANNELS):
        col = data[:, k]
        first.extend(_channel_stats(col, storm.storm_id, ch))
        second.extend(_channel_stats(np.diff(col), storm.storm_id, f"diff({ch})"))
    env = [float(pd.Timestamp(storm.peak_time).month), float(station.latitude)]
    return np.array(first + second + env, dtype=float)


# ---------------------------------------------------------------------------
# track-assisted labelling


@dataclass(frozen=True)
class TyphoonTrackPoint:
    typhoon_id: str
    timestamp: pd.Timestamp
    latitude: float
    longitude: float


def great_circle_km(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Haversine distance on a spherical Earth."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def label_by_track(storm: StormSegment, tracks: Sequence[TyphoonTrackPoint],
                   station: StationMeta, radius_km: float = 500.0) -> bool:
    """True when a track point is within ``radius_km`` of the station during the storm."""
    if not radius_km > 0:
        raise ValueError("radius_km must be positive")
    start, end = pd.Timestamp(storm.start), pd.Timestamp(storm.end)
    near = [p for p in tracks if start <= pd.Timestamp(p.timestamp) <= end]
    if not near:
        return False
    d = great_circle_km(station.latitude, station.longitude,
                        np.array([p.latitude for p in near]), np.array([p.longitude for p in near]))
    return bool(np.any(d <= radius_km))


# ---------------------------------------------------------------------------
# CSV formats


def format_features_csv(ids: Sequence[str], vectors: Sequence[np.ndarray]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["storm_id"] + [f"f{i:02d}" for i in range(1, N_FEATURES + 1)])
    for sid, v in zip(ids, vectors):
        w.writerow([sid] + [format_float(x) for x in v])
    return out.getvalue()


def parse_features_csv(text: str) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[0] != "storm_id" or len(header) != N_FEATURES + 1:
        raise ParseError("features CSV needs storm_id,f01..f82 header", 1)
    ids, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != N_FEATURES + 1:
            raise ParseError(f"expected {N_FEATURES + 1} fields", lineno)
        ids.append(row[0])
        rows.append([float(c) for c in row[1:]])
    return ids, np.array(rows, dtype=float).reshape(len(rows), N_FEATURES)


def format_labels_csv(labels: Mapping[str, str]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["storm_id", "label"])
    for sid, lab in labels.items():
        w.writerow([sid, lab])
    return out.getvalue()


def parse_labels_csv(text: str) -> dict[str, str]:
    labels = {}
    for lineno, r in enumerate(csv.DictReader(io.StringIO(text)), start=2):
        lab = r["label"].strip().lower()
        if lab not in CLASSES:
            raise ParseError(f"unknown label {r['label']!r}", lineno)
        labels[r["storm_id"].strip()] = lab
    return labels


def parse_tracks_csv(text: str) -> list[TyphoonTrackPoint]:
    pts = []
    for r in csv.DictReader(io.StringIO(text)):
        pts.append(TyphoonTrackPoint(r["typhoon_id"], pd.Timestamp(parse_timestamp(r["timestamp"])),
                                     float(r["lat"]), float(r["lon"])))
    pts.sort(key=lambda p: (p.typhoon_id, p.timestamp))
    return pts
