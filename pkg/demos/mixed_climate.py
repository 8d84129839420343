"""Per-type extreme fits, the mixture curve and the commingled reference.

Run: python demos/mixed_climate.py
"""
import warnings

import numpy as np

from windclime.evt import (DEFAULT_GRID, GpdFit, GumbelFit, build_return_curves, build_type_samples,
                           commingled_annual_max, fit_type_models, return_level)
from windclime.ingest import StationMeta
from windclime.storms import segment_storms
from windclime.synth import SynthSpec, generate_synthetic_station, labels_from_truth

# Closed forms: an exponential tail over 12 m/s seen 10 times a year, and an annual Gumbel.
print("GPD(0, 4) over 12 m/s, N=10, T=50:", round(return_level(GpdFit(0.0, 4.0, 12.0), 10, 50), 4))
print("Gumbel(30, 3), N=1, T=2:", round(return_level(GumbelFit(30.0, 3.0), 1, 2), 4))

station = generate_synthetic_station(SynthSpec(years=10), seed=11)
storms = segment_storms(station.frame)
labels = labels_from_truth(storms, station.truth)
samples = build_type_samples(storms, labels, StationMeta("SYN", 30.0, 122.0, 10.0))
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)  # bounded synthetic peaks clamp the GPD shape
    components = fit_type_models(samples)
for kind, (fit, rate) in components.items():
    print(f"{kind:8s} {samples.count(kind):4d} samples, {rate:.1f}/yr, {fit}")

maxima, commingled = commingled_annual_max(station.frame)
curve = build_return_curves(components, commingled)
print("\n    T   typhoon  monsoon   other  commingled  mixture")
for i in range(0, len(DEFAULT_GRID), 4):
    row = [curve.columns[k][i] for k in ("typhoon", "monsoon", "other", "commingled", "mixture")]
    print(f"{DEFAULT_GRID[i]:6.1f}  " + "  ".join("    -  " if np.isnan(v) else f"{v:7.2f}" for v in row))

# The mixture never drops below any single type; the annual-max fit can.
below = DEFAULT_GRID[curve.columns["commingled"] < curve.columns["mixture"]]
print(f"\ncommingled curve below the mixture at {len(below)} of {len(DEFAULT_GRID)} return periods")
