import numpy as np
import pandas as pd
import pytest

from windclime.errors import ConfigError
from windclime.ingest import format_canonical_csv, frame_to_records
from windclime.storms import extract_candidate_windows, segment_storms
from windclime.synth import (SynthSpec, format_truth_csv, generate_synthetic_station,
                             labels_from_truth, parse_truth_csv)


def small(**counts):
    return SynthSpec(years=3, storms_per_year={"typhoon": 0, "monsoon": 0, "other": 0, **counts})


def test_deterministic_bytes():
    spec = small(typhoon=2, monsoon=3, other=2)
    a = generate_synthetic_station(spec, seed=4)
    b = generate_synthetic_station(spec, seed=4)
    assert format_canonical_csv(frame_to_records(a.frame)) == format_canonical_csv(frame_to_records(b.frame))
    assert format_truth_csv(a.truth) == format_truth_csv(b.truth)
    c = generate_synthetic_station(spec, seed=5)
    assert not a.frame.equals(c.frame)


def test_zero_storms_background_only():
    st = generate_synthetic_station(small(), seed=1)
    assert st.truth == []
    assert extract_candidate_windows(st.frame) == []
    assert st.frame["wind_speed_ms"].max() < 10.0


def test_truth_count():
    st = generate_synthetic_station(SynthSpec(years=10, storms_per_year={"typhoon": 2}), seed=2)
    assert len(st.truth) == 20
    assert {t.label for t in st.truth} == {"typhoon"}


def test_too_dense_rejected():
    with pytest.raises(ConfigError):
        generate_synthetic_station(SynthSpec(years=1, storms_per_year={"typhoon": 40, "monsoon": 40}))


def test_peaks_below_threshold_rejected():
    with pytest.raises(ConfigError):
        SynthSpec(other_peak=(11.0, 15.0))
    with pytest.raises(ConfigError):
        SynthSpec(storms_per_year={"hurricane": 1})


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_every_planted_storm_recovered(seed):
    st = generate_synthetic_station(SynthSpec(years=4), seed=seed)
    windows = extract_candidate_windows(st.frame)
    found = np.array([w.peak_time.value for w in windows])
    assert len(windows) == len(st.truth)
    for t in st.truth:
        assert np.min(np.abs(found - t.peak_time.value)) <= pd.Timedelta(hours=3).value
    spacing = np.diff(sorted(t.peak_time for t in st.truth))
    assert min(spacing) >= pd.Timedelta(hours=120)


def test_background_quiet_away_from_storms():
    st = generate_synthetic_station(SynthSpec(years=2), seed=6)
    quiet = np.ones(len(st.frame), bool)
    for t in st.truth:
        quiet &= ~((st.frame.index >= t.peak_time - pd.Timedelta(hours=60))
                   & (st.frame.index <= t.peak_time + pd.Timedelta(hours=60)))
    assert st.frame["wind_speed_ms"].to_numpy()[quiet].max() < 10.0


def test_truth_csv_and_labels():
    st = generate_synthetic_station(SynthSpec(years=2), seed=3)
    text = format_truth_csv(st.truth)
    assert text.splitlines()[0] == "storm_id,label,start,end"
    back = parse_truth_csv(text)
    assert [t.peak_time for t in back] == [t.peak_time for t in st.truth]
    storms = segment_storms(st.frame)
    labels = labels_from_truth(storms, back)
    assert len(labels) == len(storms) == len(st.truth)
    assert sorted(labels.values()) == sorted(t.label for t in st.truth)
