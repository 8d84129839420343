import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from windclime.errors import ConfigError
from windclime.terrain import (DACHEN_ISLAND, DINGHAI, SECTORS, SHENGZHOU, RoughnessTable,
                               correct_wind_speed, sector_of)


def test_dachen_sixty_degrees():
    assert correct_wind_speed(10.0, 60.0, DACHEN_ISLAND) == pytest.approx(10.93, abs=1e-12)


def test_forty_five_falls_in_sixty_sector():
    assert sector_of(45.0) == 60
    assert correct_wind_speed(10.0, 45.0, DACHEN_ISLAND) == pytest.approx(10.93, abs=1e-12)


def test_identity_table():
    t = RoughnessTable.identity()
    for d in (0.0, 17.0, 180.0, 360.0):
        assert correct_wind_speed(10.0, d, t) == 10.0


def test_sector_edges():
    assert sector_of(0.0) == 360
    assert sector_of(30.0) == 30
    assert sector_of(30.5) == 60
    assert sector_of(360.0) == 360
    with pytest.raises(ValueError):
        sector_of(361.0)


def test_missing_direction_leaves_speed():
    assert correct_wind_speed(10.0, None, DACHEN_ISLAND) == 10.0
    assert correct_wind_speed(10.0, math.nan, DACHEN_ISLAND) == 10.0


def test_shipped_tables_verbatim():
    assert DACHEN_ISLAND.factors[120] == 1.903
    assert DINGHAI.factors == SHENGZHOU.factors


def test_missing_sector_is_config_error():
    with pytest.raises(ConfigError):
        RoughnessTable({s: 1.0 for s in SECTORS[:-1]})
    with pytest.raises(ConfigError):
        RoughnessTable({**{s: 1.0 for s in SECTORS}, 90: 3.5})


def test_from_entries():
    t = RoughnessTable.from_entries({str(s): "1.1" for s in SECTORS})
    assert t.factor(200.0) == 1.1


def test_array_matches_scalar():
    rng = np.random.default_rng(3)
    d = rng.uniform(0, 360, 200)
    d[:5] = [0.0, 30.0, 360.0, np.nan, 120.0]
    s = rng.uniform(0, 40, 200)
    vec = DACHEN_ISLAND.correct_array(s, d)
    ref = [correct_wind_speed(a, b, DACHEN_ISLAND) for a, b in zip(s, d)]
    np.testing.assert_array_equal(vec, ref)


speeds = st.floats(0, 80, allow_nan=False)
directions = st.floats(0, 360, allow_nan=False)


@given(speeds, st.floats(0, 10, allow_nan=False), directions)
def test_linearity(s, a, d):
    assert correct_wind_speed(a * s, d, DACHEN_ISLAND) == pytest.approx(
        a * correct_wind_speed(s, d, DACHEN_ISLAND), rel=1e-12, abs=1e-12)


@given(speeds, speeds, directions)
def test_order_preserved(s1, s2, d):
    lo, hi = sorted((s1, s2))
    assert correct_wind_speed(lo, d, DINGHAI) <= correct_wind_speed(hi, d, DINGHAI)
