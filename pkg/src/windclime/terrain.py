"""Directional roughness correction to 10 m over open terrain.

Sectors are 30 degrees wide and labelled by their upper edge, so a
direction ``d`` belongs to sector ``ceil(d / 30) * 30`` and ``d == 0`` is
folded into the 360 sector.

.. note::
   The shipped Dachen Island table carries a factor of 1.903 for the 120
   degree sector, far from its neighbours (all close to 1.0). It is kept
   verbatim as published; override it in the station config if your source
   says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError

SECTORS = tuple(range(30, 361, 30))
FACTOR_BOUNDS = (0.3, 3.0)


def sector_of(direction: float) -> int:
    """Upper-edge label of the 30-degree sector containing ``direction``."""
    if not 0.0 <= direction <= 360.0:
        raise ValueError(f"direction must lie in [0, 360], got {direction}")
    if direction == 0.0:
        return 360
    # max() guards subnormal directions whose quotient underflows to 0
    return max(int(math.ceil(direction / 30.0)), 1) * 30


@dataclass(frozen=True)
class RoughnessTable:
    factors: Mapping[int, float]

    def __post_init__(self):
        keys = set(self.factors)
        if keys != set(SECTORS):
            missing = sorted(set(SECTORS) - keys)
            extra = sorted(keys - set(SECTORS))
            raise ConfigError(f"roughness table needs sectors {SECTORS}; "
                              f"missing {missing}, unexpected {extra}")
        lo, hi = FACTOR_BOUNDS
        for sector, f in self.factors.items():
            if not lo < f < hi:
                raise ConfigError(f"factor {f} for sector {sector} outside ({lo}, {hi})")
        object.__setattr__(self, "factors", {s: float(self.factors[s]) for s in SECTORS})

    @classmethod
    def identity(cls) -> "RoughnessTable":
        return cls({s: 1.0 for s in SECTORS})

    @classmethod
    def from_entries(cls, entries: Mapping[str, str]) -> "RoughnessTable":
        """Build from ``sector=factor`` config entries (string keys/values)."""
        try:
            factors = {int(k): float(v) for k, v in entries.items()}
        except ValueError as exc:
            raise ConfigError(f"bad roughness entry: {exc}") from None
        return cls(factors)

    def factor(self, direction) -> float:
        if direction is None or (isinstance(direction, float) and math.isnan(direction)):
            return 1.0
        return self.factors[sector_of(float(direction))]

    def correct_array(self, speeds: np.ndarray, directions: np.ndarray) -> np.ndarray:
        speeds = np.asarray(speeds, dtype=float)
        directions = np.asarray(directions, dtype=float)
        out = speeds.copy()
        ok = ~np.isnan(directions)
        if np.any((directions[ok] < 0) | (directions[ok] > 360)):
            raise ValueError("directions must lie in [0, 360]")
        labels = np.where(directions[ok] == 0, 360,
                          np.maximum(np.ceil(directions[ok] / 30.0), 1) * 30).astype(int)
        lookup = np.array([self.factors[s] for s in SECTORS])
        out[ok] = speeds[ok] * lookup[labels // 30 - 1]
        return out


def correct_wind_speed(speed: float, direction, table: RoughnessTable) -> float:
    """Scale a recorded speed by the factor of its direction sector.

    A missing direction (``None`` or NaN) leaves the speed unchanged.
    """
    if speed < 0:
        raise ValueError(f"speed must be >= 0, got {speed}")
    return speed * table.factor(direction)


def _table(*values):
    return RoughnessTable(dict(zip(SECTORS, values)))


# Published factors, sectors 30..360 in order.
DACHEN_ISLAND = _table(1.029, 1.093, 1.052, 1.903, 1.035, 1.024,
                       1.012, 1.018, 0.943, 1.035, 1.087, 1.058)
DINGHAI = _table(0.895, 0.950, 0.915, 0.905, 0.900, 0.890,
                 0.880, 0.885, 0.820, 0.900, 0.945, 0.920)
SHENGZHOU = _table(0.895, 0.950, 0.915, 0.905, 0.900, 0.890,
                   0.880, 0.885, 0.820, 0.900, 0.945, 0.920)

STATION_TABLES = {
    "dachen_island": DACHEN_ISLAND,
    "dinghai": DINGHAI,
    "shengzhou": SHENGZHOU,
}
