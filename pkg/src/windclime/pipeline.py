"""File-based pipeline stages.

Every stage reads its inputs from the config and the output directory,
computes all of its artifacts in memory and only then writes them (each via
a temporary file and an atomic rename). A failing stage therefore leaves no
partial outputs behind. Stages depend only on their input files, the config
and the seed, so reruns produce byte-identical artifacts.

Artifacts (all inside the output directory):

============== ==========================================================
stage          writes
============== ==========================================================
synth          synth_records.csv, truth.csv
ingest         records.csv, record_meta.csv
segment        storms.csv
featurize      features.csv
label-assist   labels_assisted.csv
train          model.json, split.csv
evaluate       metrics.csv, confusion.csv, roc.csv, cv_summary.csv, cv_folds.csv
cross-station  cross_metrics.csv, cross_confusion.csv, cross_roc.csv
evt            samples.csv, fits.csv, annual_maxima.csv
curves         curves.csv
report         report/ (summary.txt and plot-ready CSVs)
============== ==========================================================
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from .config import PipelineConfig
from .errors import ConfigError, DegenerateSampleError, WindclimeError
from .evt import (build_return_curves, build_type_samples, commingled_annual_max,
                  fit_type_models, format_curves_csv, format_fits_csv, parse_fits_csv)
from .features import (CLASSES, featurize_storm, format_features_csv, format_labels_csv,
                       label_by_track, parse_features_csv, parse_labels_csv, parse_tracks_csv)
from .ingest import (GRID_HOURS, apply_roughness, format_canonical_csv, format_float,
                     format_timestamp, frame_to_records, quality_filter, read_records,
                     records_to_frame)
from .learn import (KINDS, Dataset, cross_station_evaluate, evaluate, format_confusion_csv,
                    format_cv_csv, format_metrics_csv, format_roc_csv, kfold_cross_validate,
                    load_model, model_to_dict, stratified_split, train_classifier)
from .storms import format_storms_csv, parse_storms_csv, segment_storms, storms_from_rows
from .synth import generate_synthetic_station, labels_from_truth, parse_truth_csv, format_truth_csv
from .terrain import sector_of

log = logging.getLogger(__name__)


class MissingArtifactError(WindclimeError, FileNotFoundError):
    """An upstream artifact or input file is absent."""


def _csv(rows) -> str:
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerows(rows)
    return out.getvalue()


def _read(path: Path, what: str) -> str:
    if not path.is_file():
        raise MissingArtifactError(f"missing {what}: {path}")
    return path.read_text()


def write_outputs(out_dir: Path, outputs: dict) -> list[Path]:
    """Write ``{relative name: text}`` atomically, one rename per file."""
    written = []
    for name, text in outputs.items():
        target = out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        written.append(target)
    return written


# ---------------------------------------------------------------------------
# shared loaders


def _frame(cfg: PipelineConfig):
    return records_to_frame(read_records(_existing(cfg.out_dir / "records.csv", "records (run ingest)")))


def _existing(path: Path, what: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(f"missing {what}: {path}")
    return path


def _record_years(cfg: PipelineConfig) -> float:
    if cfg.record_years is not None:
        return cfg.record_years
    text = _read(cfg.out_dir / "record_meta.csv", "record metadata (run ingest)")
    meta = {r["key"]: r["value"] for r in csv.DictReader(io.StringIO(text))}
    return float(meta["record_years"])


def _storms(cfg: PipelineConfig, frame):
    rows = parse_storms_csv(_read(cfg.out_dir / "storms.csv", "storms (run segment)"))
    return storms_from_rows(frame, rows)


def _labels(cfg: PipelineConfig) -> dict:
    path = cfg.resolve("labels", required=False) or cfg.out_dir / "labels_assisted.csv"
    return parse_labels_csv(_read(path, "labels ([paths] labels or run label-assist)"))


def _dataset(features_path: Path, labels: dict, station_id: str) -> Dataset:
    ids, X = parse_features_csv(_read(features_path, "features (run featurize)"))
    keep = [i for i, sid in enumerate(ids) if sid in labels]
    if not keep:
        raise ConfigError(f"no labelled storms among {len(ids)} feature rows")
    return Dataset(X[keep], [labels[ids[i]] for i in keep], [ids[i] for i in keep],
                   CLASSES, station_id)


# ---------------------------------------------------------------------------
# stages


def stage_synth(cfg: PipelineConfig) -> dict:
    st = generate_synthetic_station(cfg.synth, cfg.seed)
    return {"synth_records.csv": format_canonical_csv(frame_to_records(st.frame)),
            "truth.csv": format_truth_csv(st.truth)}


def stage_ingest(cfg: PipelineConfig) -> dict:
    path = cfg.resolve("input")
    _existing(path, "station input")
    records = quality_filter(read_records(path))
    if not records:
        raise ConfigError(f"no usable records in {path}")
    frame = apply_roughness(records_to_frame(records), cfg.roughness)
    n = len(frame)
    years = n * GRID_HOURS / (365.25 * 24)
    meta = [("key", "value"), ("station_id", cfg.station_id),
            ("first", format_timestamp(frame.index[0])), ("last", format_timestamp(frame.index[-1])),
            ("n_slots", n), ("n_valid_speed", int(frame["wind_speed_ms"].notna().sum())),
            ("record_years", format_float(years))]
    return {"records.csv": format_canonical_csv(frame_to_records(frame)), "record_meta.csv": _csv(meta)}


def stage_segment(cfg: PipelineConfig) -> dict:
    storms = segment_storms(_frame(cfg), cfg.threshold, cfg.segmentation, cfg.span_hours)
    return {"storms.csv": format_storms_csv(storms)}


def stage_featurize(cfg: PipelineConfig) -> dict:
    frame = _frame(cfg)
    station = cfg.station(_record_years(cfg))
    storms = _storms(cfg, frame)
    vectors = [featurize_storm(s, station) for s in storms]
    return {"features.csv": format_features_csv([s.storm_id for s in storms], vectors)}


def stage_label_assist(cfg: PipelineConfig) -> dict:
    """Suggest labels from typhoon tracks (or from synthetic truth).

    With tracks, a storm matched by a track is a typhoon. An unmatched storm
    keeps its manual label when one is given and is not "typhoon"; otherwise
    it becomes "other". Disagreements with manual labels are logged.
    """
    frame = _frame(cfg)
    storms = _storms(cfg, frame)
    truth_path = cfg.resolve("truth", required=False)
    tracks_path = cfg.resolve("tracks", required=False)
    if tracks_path is not None:
        station = cfg.station(_record_years(cfg))
        tracks = parse_tracks_csv(_read(tracks_path, "typhoon tracks"))
        manual_path = cfg.resolve("labels", required=False)
        manual = parse_labels_csv(_read(manual_path, "labels")) if manual_path else {}
        labels, conflicts = {}, 0
        for s in storms:
            hit = label_by_track(s, tracks, station, cfg.radius_km)
            given = manual.get(s.storm_id)
            if hit:
                lab = "typhoon"
            else:
                lab = given if given not in (None, "typhoon") else "other"
            conflicts += given is not None and given != lab
            labels[s.storm_id] = lab
        if conflicts:
            log.warning("%d storms disagree with their manual label", conflicts)
    elif truth_path is not None:
        labels = labels_from_truth(storms, parse_truth_csv(_read(truth_path, "truth")))
        missing = len(storms) - len(labels)
        if missing:
            log.warning("%d storms matched no planted storm and stay unlabelled", missing)
    else:
        raise ConfigError("label-assist needs [paths] tracks or [paths] truth")
    return {"labels_assisted.csv": format_labels_csv(labels)}


def stage_train(cfg: PipelineConfig) -> dict:
    data = _dataset(cfg.out_dir / "features.csv", _labels(cfg), cfg.station_id)
    train, test = stratified_split(data, cfg.split_ratio, cfg.seed)
    model = train_classifier(cfg.kind, train, cfg.hyperparams, cfg.seed)
    split = [("storm_id", "set")] + [(i, "train") for i in train.ids] + [(i, "test") for i in test.ids]
    return {"model.json": json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n",
            "split.csv": _csv(split)}


def stage_evaluate(cfg: PipelineConfig) -> dict:
    model = load_model(_existing(cfg.out_dir / "model.json", "model (run train)"))
    data = _dataset(cfg.out_dir / "features.csv", _labels(cfg), cfg.station_id)
    split_text = _read(cfg.out_dir / "split.csv", "split (run train)")
    test_ids = {r["storm_id"] for r in csv.DictReader(io.StringIO(split_text)) if r["set"] == "test"}
    rows = [i for i, sid in enumerate(data.ids) if sid in test_ids]
    report = evaluate(model, data.subset(rows))
    cv = [kfold_cross_validate(data, cfg.cv_folds, kind,
                               cfg.hyperparams if kind == cfg.kind else None, cfg.seed)
          for kind in cfg.cv_kinds]
    summary, folds = format_cv_csv(cv)
    return {"metrics.csv": format_metrics_csv(report), "confusion.csv": format_confusion_csv(report),
            "roc.csv": format_roc_csv(report), "cv_summary.csv": summary, "cv_folds.csv": folds}


def stage_cross_station(cfg: PipelineConfig) -> dict:
    if "features" not in cfg.cross or "labels" not in cfg.cross:
        raise ConfigError("[cross-station] needs features and labels paths")
    model = load_model(_existing(cfg.out_dir / "model.json", "model (run train)"))
    labels = parse_labels_csv(_read(cfg.base_dir / cfg.cross["labels"], "station B labels"))
    other = _dataset(cfg.base_dir / cfg.cross["features"], labels, cfg.cross.get("station_id", ""))
    report = cross_station_evaluate(model, other)
    return {"cross_metrics.csv": format_metrics_csv(report),
            "cross_confusion.csv": format_confusion_csv(report),
            "cross_roc.csv": format_roc_csv(report)}


def stage_evt(cfg: PipelineConfig) -> dict:
    frame = _frame(cfg)
    station = cfg.station(_record_years(cfg))
    storms = _storms(cfg, frame)
    samples = build_type_samples(storms, _labels(cfg), station, cfg.evt_threshold)
    components = fit_type_models(samples)
    try:
        maxima, commingled = commingled_annual_max(frame, cfg.min_years)
    except DegenerateSampleError as exc:
        log.warning("commingled fit skipped: %s", exc)
        maxima, commingled = None, None
    rows = [("storm_id", "type", "peak_speed_ms", "direction_deg")]
    for kind in CLASSES:
        for sid, v, d in zip(samples.ids[kind], samples.speeds[kind], samples.directions[kind]):
            rows.append((sid, kind, format_float(v), format_float(d)))
    annual = [("year", "max_speed_ms")]
    if maxima is not None:
        annual += [(y, format_float(v)) for y, v in maxima.items()]
    return {"samples.csv": _csv(rows), "fits.csv": format_fits_csv(components, samples, commingled),
            "annual_maxima.csv": _csv(annual)}


def stage_curves(cfg: PipelineConfig) -> dict:
    components, commingled = parse_fits_csv(_read(cfg.out_dir / "fits.csv", "fits (run evt)"))
    if not components and commingled is None:
        raise ConfigError("fits.csv holds no fitted distribution")
    curve = build_return_curves(components, commingled, upper=cfg.curve_upper)
    return {"curves.csv": format_curves_csv(curve)}


def emit_report(out_dir: Path, labels_path=None) -> tuple[dict, list[str]]:
    """Plot-ready CSVs plus a text summary from whatever artifacts exist.

    Returns ``({relative name: text}, notices)``; missing inputs produce a
    notice instead of an error unless nothing at all can be reported. The
    class histogram counts ``labels_path`` (default: the label-assist output)
    and falls back to the extreme samples.
    """
    out_dir = Path(out_dir)
    files, notices, summary = {}, [], []

    def present(name):
        p = out_dir / name
        if p.is_file():
            return p.read_text()
        notices.append(f"{name} not found; dependent report files skipped")
        return None

    labels_path = Path(labels_path) if labels_path else out_dir / "labels_assisted.csv"
    labels_text = labels_path.read_text() if labels_path.is_file() else None
    samples_text = present("samples.csv")
    if labels_text is not None or samples_text is not None:
        counts = {c: 0 for c in CLASSES}
        if labels_text is not None:
            for lab in parse_labels_csv(labels_text).values():
                counts[lab] += 1
        else:
            for r in csv.DictReader(io.StringIO(samples_text)):
                counts[r["type"]] += 1
        files["report/class_histogram.csv"] = _csv([("class", "count")] + list(counts.items()))
        summary.append("storms per class: " + ", ".join(f"{c}={n}" for c, n in counts.items()))

    folds_text = present("cv_folds.csv")
    if folds_text is not None:
        acc = {}
        for r in csv.DictReader(io.StringIO(folds_text)):
            acc.setdefault(r["kind"], []).append(float(r["accuracy"]))
        rows = [("kind", "min", "q1", "median", "q3", "max", "mean", "std")]
        for kind in [k for k in KINDS if k in acc] + sorted(set(acc) - set(KINDS)):
            a = np.array(acc[kind])
            q = np.percentile(a, [0, 25, 50, 75, 100])
            rows.append((kind, *(format_float(v) for v in q), format_float(a.mean()),
                         format_float(a.std())))
            summary.append(f"{kind}: CV accuracy {a.mean():.4f} +/- {a.std():.4f}")
        files["report/cv_box.csv"] = _csv(rows)
        files["report/cv_folds.csv"] = folds_text

    for prefix in ("", "cross_"):
        roc_text = (out_dir / f"{prefix}roc.csv").read_text() if (out_dir / f"{prefix}roc.csv").is_file() \
            else None
        if roc_text is None:
            if not prefix:
                notices.append("roc.csv not found; ROC files skipped")
            continue
        per_class = {}
        for r in csv.DictReader(io.StringIO(roc_text)):
            per_class.setdefault(r["class"], []).append((r["fpr"], r["tpr"]))
        for c, pts in per_class.items():
            files[f"report/{prefix}roc_{c}.csv"] = _csv([("fpr", "tpr")] + pts)
        metrics = out_dir / f"{prefix}metrics.csv"
        if metrics.is_file():
            for r in csv.DictReader(io.StringIO(metrics.read_text())):
                if r["class"] in ("macro", "accuracy"):
                    summary.append(f"{prefix or 'test '}{r['class']}: {r['auc']}")

    if samples_text is not None:
        by_type = {c: [] for c in CLASSES}
        for r in csv.DictReader(io.StringIO(samples_text)):
            d = float(r["direction_deg"]) if r["direction_deg"] else float("nan")
            sector = sector_of(d) if np.isfinite(d) else ""
            by_type[r["type"]].append((r["storm_id"], r["direction_deg"], sector, r["peak_speed_ms"]))
        for c, rows in by_type.items():
            files[f"report/windrose_{c}.csv"] = _csv([("storm_id", "direction_deg", "sector",
                                                       "speed_ms")] + rows)
            summary.append(f"{c}: {len(rows)} extreme samples")

    curves_text = present("curves.csv")
    if curves_text is not None:
        files["report/return_curves.csv"] = curves_text
        for r in csv.DictReader(io.StringIO(curves_text)):
            T = float(r["return_period_years"])
            if abs(T - 100.0) < 1e-6 or abs(T - 1000.0) < 1e-6:
                mix, comm = (f"{float(r[c]):.2f}" if r[c] else "-" for c in ("v_mixture", "v_commingled"))
                summary.append(f"T={T:g} yr: mixture {mix} m/s, commingled {comm} m/s")
    if not files:
        raise MissingArtifactError(f"no evaluation or evt artifacts in {out_dir}")
    text = "windclime report\n\n" + "\n".join(summary) + "\n"
    if notices:
        text += "\nnotices:\n" + "\n".join(f"- {n}" for n in notices) + "\n"
    files["report/summary.txt"] = text
    return files, notices


def stage_report(cfg: PipelineConfig) -> dict:
    files, notices = emit_report(cfg.out_dir, cfg.resolve("labels", required=False))
    for n in notices:
        log.warning(n)
    return files


STAGE_FUNCTIONS: dict[str, Callable[[PipelineConfig], dict]] = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "segment": stage_segment,
    "featurize": stage_featurize,
    "label-assist": stage_label_assist,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "cross-station": stage_cross_station,
    "evt": stage_evt,
    "curves": stage_curves,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig) -> list[Path]:
    """Run one stage and write its artifacts; returns the written paths."""
    if stage not in STAGE_FUNCTIONS:
        raise ConfigError(f"unknown stage {stage!r}; choose from {sorted(STAGE_FUNCTIONS)}")
    outputs = STAGE_FUNCTIONS[stage](cfg)
    return write_outputs(Path(cfg.out_dir), outputs)
