"""Parse station records and cut them into independent storms.

Run: python demos/segment_storms.py
"""
from pathlib import Path

import numpy as np

from windclime.ingest import parse_isd_lite, quality_filter, records_to_frame
from windclime.storms import bg_segment, segment_storms
from windclime.synth import SynthSpec, generate_synthetic_station
from windclime.terrain import DACHEN_ISLAND, correct_wind_speed

# A raw ISD-Lite fixture: 50 hourly-ish lines with duplicates, gaps and trace rain.
fixture = Path(__file__).resolve().parents[1] / "tests" / "data" / "isd_lite_sample.txt"
records = parse_isd_lite(fixture.read_text())
grid = records_to_frame(quality_filter(records))
print(f"{len(records)} raw lines -> {len(grid)} slots on the 3 h grid")
print(grid.head(4))

# Exposure correction is a per-sector factor; 45 deg falls in the 60 deg sector.
print("10 m/s from 45 deg at Dachen ->", correct_wind_speed(10.0, 45.0, DACHEN_ISLAND), "m/s")

# A clean step in a 33-point window is found where it was planted.
rng = np.random.default_rng(0)
window = np.r_[rng.normal(8, 1, 14), rng.normal(14, 1, 19)]
print("planted step at 14, cuts found:", bg_segment(window))

# On two synthetic years every planted storm comes back as one segment.
station = generate_synthetic_station(SynthSpec(years=2), seed=1)
storms = segment_storms(station.frame)
print(f"{len(station.truth)} planted storms, {len(storms)} segments")
for s in storms[:5]:
    print(f"  {s.storm_id}: {s.start:%Y-%m-%d %H}h .. {s.end:%Y-%m-%d %H}h, "
          f"{s.n_points} points, peak {s.peak_speed:.1f} m/s")
