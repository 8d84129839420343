"""Exit-criteria suite: one test (and one printed PASS/FAIL line) per criterion."""
import hashlib
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from windclime.cli import main
from windclime.evt import (DEFAULT_GRID, GpdFit, GumbelFit, build_return_curves, build_type_samples,
                           commingled_annual_max, fit_gpd, fit_gumbel, fit_type_models, mixture_curve,
                           return_level)
from windclime.features import CLASSES, N_FEATURES, featurize_storm, series_stats
from windclime.ingest import (StationMeta, format_canonical_csv, format_isd_lite, parse_canonical_csv,
                              parse_isd_lite)
from windclime.learn import (KINDS, Dataset, kfold_cross_validate, predict_scores, roc_curve_auc,
                             train_classifier)
from windclime.learn.models import KNearestNeighbors
from windclime.storms import bg_segment, extract_candidate_windows, segment_storms
from windclime.synth import SynthSpec, generate_synthetic_station, labels_from_truth

pytestmark = pytest.mark.acceptance

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def climate():
    """Ten synthetic years, 100 storms per class, segmented and labelled."""
    st = generate_synthetic_station(SynthSpec(years=10), seed=11)
    storms = segment_storms(st.frame)
    labels = labels_from_truth(storms, st.truth)
    meta = StationMeta("SYN", 30.0, 122.0, 10.0)
    return st, storms, labels, meta


# 1 ------------------------------------------------------------------------


def test_criterion_1_parser_fixture(criterion):
    t0 = time.perf_counter()
    text = (DATA / "isd_lite_sample.txt").read_text()
    golden_text = (DATA / "isd_lite_sample.golden.csv").read_text()
    records = parse_isd_lite(text)
    exact = records == parse_canonical_csv(golden_text) and format_canonical_csv(records) == golden_text
    trip = parse_isd_lite(format_isd_lite(records)) == records \
        and parse_canonical_csv(format_canonical_csv(records)) == records
    dt = time.perf_counter() - t0
    ok = len(records) == 50 and exact and trip and dt < 1.0
    assert criterion(1, ok, f"50-line fixture golden={exact} round-trip={trip} in {dt:.3f}s")


# 2 ------------------------------------------------------------------------


def test_criterion_2_bg_recovery(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(100):
        step = int(rng.integers(8, 26))  # both sides at least l0 long
        sigma = rng.uniform(0.5, 2.0)
        x = rng.normal(10.0, sigma, 33)
        x[step:] += 3.0 * sigma
        cuts = bg_segment(x)
        hits += any(abs(c - step) <= 2 for c in cuts)
    quiet = sum(bg_segment(np.full(33, rng.uniform(0, 30))) == [] for _ in range(100))
    dt = time.perf_counter() - t0
    ok = hits >= 95 and quiet == 100 and dt < 5.0
    assert criterion(2, ok, f"step recovered {hits}/100, constant windows uncut {quiet}/100, "
                            f"{dt:.2f}s")


# 3 ------------------------------------------------------------------------


def _peak_gaps_ok(frame):
    hours = np.array([w.peak_time.value // 3_600_000_000_000 for w in extract_candidate_windows(frame)])
    diff = np.abs(hours[:, None] - hours[None, :])
    np.fill_diagonal(diff, 10 ** 9)
    return len(hours), bool(np.all(diff >= 96))


def test_criterion_3_peak_independence(criterion, climate):
    streams = [climate[0].frame]
    rng = np.random.default_rng(3)
    for i in range(200):
        n = int(rng.integers(10, 600))
        speed = rng.gamma(2.0, rng.uniform(2, 8), n)  # dense exceedances
        idx = pd.date_range("2001-01-01", periods=n, freq="3h", name="timestamp")
        streams.append(pd.DataFrame({"wind_dir_deg": 90.0, "wind_speed_ms": speed, "pressure_hpa": 1000.0,
                                     "temperature_c": 20.0, "precip_mm": 0.0}, index=idx))
    results = [_peak_gaps_ok(f) for f in streams]
    ok = all(r for _, r in results)
    n_peaks = sum(n for n, _ in results)
    assert criterion(3, ok, f"{len(streams)} streams, {n_peaks} peaks, all pairs >= 96 h apart: {ok}")


# 4 ------------------------------------------------------------------------


def test_criterion_4_features(criterion, climate):
    _, storms, _, meta = climate
    shapes = {featurize_storm(s, meta).shape for s in storms}
    const = featurize_storm(
        _constant_storm([45.0, 13.0, 1001.5, 22.0, 0.0]), meta)
    zero_second_order = all(const[8 * k + 1:8 * k + 4].tolist() == [0.0, 0.0, 0.0] and const[8 * k + 6] == 0
                            for k in range(5)) and np.all(const[40:80] == 0)
    s = series_stats([1, 2, 3, 4])
    hand = (2.5, math.sqrt(1.25), 0.0, -1.36, 4.0, 1.0, 3.0, 2.5)
    worked = np.allclose(s.as_tuple(), hand, rtol=0, atol=1e-9)
    s = series_stats([0, 0, 3])
    worked &= abs(s.skew - 2 / 2 ** 1.5) <= 1e-9 and abs(s.kurt + 1.5) <= 1e-9
    ok = shapes == {(N_FEATURES,)} and N_FEATURES == 82 and zero_second_order and worked
    assert criterion(4, ok, f"{len(storms)} storms -> shapes {sorted(shapes)}, constant-channel zeros "
                            f"{zero_second_order}, worked examples {worked}")


def _constant_storm(values):
    from windclime.ingest import CHANNELS
    from windclime.storms import StormSegment
    idx = pd.date_range("2005-08-10", periods=6, freq="3h", name="timestamp")
    frame = pd.DataFrame([values] * 6, index=idx, columns=list(CHANNELS))
    return StormSegment(frame, idx[0], idx[-1], idx[0], values[1], "C1")


# 5 ------------------------------------------------------------------------


def _knn_brute(X, y, q, k):
    d = sorted((sum((int(a) - int(b)) ** 2 for a, b in zip(row, q)), i) for i, row in enumerate(X))
    votes = [sum(y[i] == c for _, i in d[:min(k, len(X))]) for c in range(3)]
    return votes.index(max(votes)), [v / min(k, len(X)) for v in votes]


def _concordance(scores, labels):
    pos = [s for s, t in zip(scores, labels) if t]
    neg = [s for s, t in zip(scores, labels) if not t]
    return sum(2 if p > n else 1 if p == n else 0 for p in pos for n in neg) / (2 * len(pos) * len(neg))


def test_criterion_5_classifier_oracles(criterion):
    rng = np.random.default_rng(5)
    knn_ok = True
    for _ in range(300):
        n, d = int(rng.integers(1, 13)), int(rng.integers(1, 5))
        X = rng.integers(-3, 4, (n, d)).astype(float)
        y = rng.integers(0, 3, n)
        k = int(rng.integers(1, 8))
        Q = rng.integers(-3, 4, (4, d)).astype(float)
        S = KNearestNeighbors().fit(X, y, 3, {"k": k}, None).scores(Q)
        for row, q in zip(S, Q):
            label, votes = _knn_brute(X, y, q, k)
            knn_ok &= int(np.argmax(row)) == label and np.allclose(row, votes, rtol=0, atol=1e-12)

    nb = train_classifier("NB", Dataset(np.array([[0, 0], [2, 4], [4, 1], [6, 3]], float),
                                        ["typhoon", "typhoon", "monsoon", "monsoon"]),
                          {"var_smoothing": 0.0})

    def log_gauss(x, m, v):
        return -0.5 * math.log(2 * math.pi * v) - (x - m) ** 2 / (2 * v)

    la = log_gauss(3, 1, 1) + log_gauss(2, 2, 4)
    lb = log_gauss(3, 5, 1) + log_gauss(2, 2, 1)
    hand = 1 / (1 + math.exp(lb - la))
    nb_ok = abs(predict_scores(nb, np.array([[3.0, 2.0]]))[0][CLASSES.index("typhoon")] - hand) <= 1e-9

    X = np.vstack([rng.normal(0, 0.5, (15, 5)), rng.normal(10, 0.5, (15, 5))])
    toy = Dataset(X, ["typhoon"] * 15 + ["other"] * 15)
    svm_acc = float(np.mean(np.argmax(predict_scores(train_classifier("SVM", toy), X), 1) == toy.y))

    auc_ok, done = True, 0
    while done < 200:
        n = int(rng.integers(2, 21))
        t = rng.integers(0, 2, n)
        if t.min() == t.max():
            continue
        s = rng.integers(0, 6, n) / 5.0
        auc_ok &= roc_curve_auc(s, t)[1] == _concordance(s, t)
        done += 1
    ok = bool(knn_ok and nb_ok and svm_acc == 1.0 and auc_ok)
    assert criterion(5, ok, f"KNN brute-force {knn_ok}, NB posterior {nb_ok}, SVM train acc {svm_acc:.3f}, "
                            f"AUC concordance {auc_ok}")


# 6 ------------------------------------------------------------------------


def test_criterion_6_end_to_end_classification(criterion, climate):
    t0 = time.perf_counter()
    st, _, _, meta = climate
    storms = segment_storms(st.frame)
    labels = labels_from_truth(storms, st.truth)
    kept = [s for s in storms if s.storm_id in labels]
    X = np.vstack([featurize_storm(s, meta) for s in kept])
    data = Dataset(X, [labels[s.storm_id] for s in kept], [s.storm_id for s in kept], CLASSES, "SYN")
    per_class = {c: int(np.sum(data.y == i)) for i, c in enumerate(CLASSES)}
    reports = {kind: kfold_cross_validate(data, 10, kind, seed=0) for kind in KINDS}
    dt = time.perf_counter() - t0
    table = ", ".join(f"{k} {r.mean_accuracy:.3f}+/-{r.std_accuracy:.3f}" for k, r in reports.items())
    print(table)
    ok = min(per_class.values()) >= 100 and reports["SVM"].mean_accuracy >= 0.90 \
        and all(len(r.fold_accuracies) == 10 and math.isfinite(r.std_accuracy) for r in reports.values()) \
        and dt < 120.0
    assert criterion(6, ok, f"{per_class}; {table}; {dt:.1f}s")


# 7 ------------------------------------------------------------------------


def test_criterion_7_distribution_recovery(criterion):
    t0 = time.perf_counter()
    u = np.random.default_rng(7).random(2000)
    g = fit_gumbel(30.0 - 3.0 * np.log(-np.log(u)))
    q = np.random.default_rng(70).random(5000)
    p = fit_gpd(12.0 + 5.0 / 0.1 * (q ** -0.1 - 1.0), 12.0)
    dt = time.perf_counter() - t0
    ok = abs(g.loc - 30) <= 0.3 and abs(g.scale - 3) <= 0.3 and abs(p.shape - 0.1) <= 0.05 \
        and abs(p.scale - 5) <= 0.3 and dt < 5.0
    assert criterion(7, ok, f"Gumbel mu={g.loc:.3f} beta={g.scale:.3f}; GPD xi={p.shape:.4f} "
                            f"sigma={p.scale:.3f}; {dt:.2f}s")


# 8 ------------------------------------------------------------------------


def test_criterion_8_closed_forms(criterion):
    a = return_level(GpdFit(0.0, 4.0, 12.0), 10.0, 50.0)
    b = return_level(GumbelFit(30.0, 3.0), 1.0, 2.0)
    ok = abs(a - 36.8584) <= 1e-4 and abs(a - (12 + 4 * math.log(500))) <= 1e-6 \
        and abs(b - (30 - 3 * math.log(math.log(2)))) <= 1e-6 and abs(b - 31.0995) <= 1e-4
    assert criterion(8, ok, f"GPD(0,4,u=12),N=10,T=50 -> {a:.6f}; Gumbel(30,3),N=1,T=2 -> {b:.6f}")


# 9 ------------------------------------------------------------------------


def test_criterion_9_mixture(criterion, climate):
    st, storms, labels, meta = climate
    samples = build_type_samples(storms, labels, meta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # bounded synthetic peaks clamp the GPD shape
        comps = fit_type_models(samples)
    _, commingled = commingled_annual_max(st.frame)
    curve = build_return_curves(comps, commingled)
    mix = curve.columns["mixture"]

    checked, dominant = 0, True
    for i in range(len(DEFAULT_GRID)):
        vals = [curve.columns[k][i] for k in comps if np.isfinite(curve.columns[k][i])]
        if vals:
            checked += 1
            dominant &= bool(np.isfinite(mix[i]) and mix[i] >= max(vals))

    worst = 0.0
    for k, (fit, rate) in comps.items():
        single = mixture_curve({k: (fit, rate)})
        for T, v in zip(DEFAULT_GRID, single):
            if T >= 10 and T * rate > 1:
                worst = max(worst, abs(v / return_level(fit, rate, T) - 1))

    below = [T for T, c, m in zip(DEFAULT_GRID, curve.columns["commingled"], mix)
             if np.isfinite(c) and np.isfinite(m) and c < m]
    ok = sorted(comps) == sorted(CLASSES) and checked == len(DEFAULT_GRID) - 1 and dominant \
        and worst <= 0.02 and len(below) > 0
    assert criterion(9, ok, f"dominance on {checked}/30 points {dominant} (T=1 undefined); single-type "
                            f"max rel. diff {worst:.4%}; commingled below mixture at "
                            f"{len(below)} points (T {min(below, default=0):.3g}..{max(below, default=0):.3g})")


# 10 -----------------------------------------------------------------------


STAGES = ["synth", "ingest", "segment", "featurize", "label-assist", "train", "evaluate", "cross-station",
          "evt", "curves", "report"]

CONFIG = """\
[station]
id = DET
latitude = 29.0
longitude = 121.5

[roughness]
preset = dachen_island

[paths]
input = out/synth_records.csv
truth = out/truth.csv

[run]
seed = 21

[synth]
years = 3
typhoon = 8
monsoon = 8
other = 8

[evaluate]
cv_folds = 4

[cross-station]
features = out/features.csv
labels = out/labels_assisted.csv

[evt]
min_years = 3
"""


def _digest(d: Path) -> dict:
    return {str(p.relative_to(d)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(d.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(criterion, tmp_path):
    codes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        # two independent project directories, then a rerun in place over the first
        for run in ("a", "b", "a"):
            cfg = tmp_path / run / "det.ini"
            cfg.parent.mkdir(exist_ok=True)
            cfg.write_text(CONFIG)
            codes += [main([s, "--config", str(cfg), "-q"]) for s in STAGES]
    a, b = _digest(tmp_path / "a" / "out"), _digest(tmp_path / "b" / "out")
    ok = set(codes) == {0} and a == b and len(a) >= 30
    assert criterion(10, ok, f"{len(STAGES)} stages x 3 runs, exit codes {sorted(set(codes))}, "
                             f"{len(a)} artifacts hash-identical: {a == b}")
