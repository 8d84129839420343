"""Pipeline configuration (INI file, one section per stage).

Example::

    [station]
    id = DINGHAI
    latitude = 30.03
    longitude = 122.11
    # record_years = 27   (default: span of the ingested record)

    [roughness]
    preset = dinghai      # or twelve entries 30 = 0.895 ... 360 = 0.920

    [paths]
    input = data/58477.isd
    labels = labels.csv

    [train]
    kind = SVM
    hp.C = 1.0

Relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ingest import StationMeta
from .learn.classifier import KINDS, resolve_hyperparams
from .storms import SegmentationConfig
from .synth import SynthSpec
from .terrain import STATION_TABLES, RoughnessTable

STAGES = ("synth", "ingest", "segment", "featurize", "label-assist", "train", "evaluate",
          "cross-station", "evt", "curves", "report")


def _value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        low = text.strip().lower()
        if low in ("none", "null"):
            return None
        if low in ("true", "false"):
            return low == "true"
        return text.strip()


@dataclass
class PipelineConfig:
    path: Path
    base_dir: Path
    out_dir: Path
    seed: int
    station_id: str
    latitude: float
    longitude: float
    record_years: Optional[float]
    roughness: RoughnessTable
    paths: dict
    threshold: float = 12.0
    span_hours: float = 96.0
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    radius_km: float = 500.0
    kind: str = "SVM"
    hyperparams: dict = field(default_factory=dict)
    split_ratio: float = 0.7
    cv_folds: int = 10
    cv_kinds: tuple = KINDS
    cross: dict = field(default_factory=dict)
    evt_threshold: float = 12.0
    min_years: int = 10
    curve_upper: float = 200.0
    synth: SynthSpec = field(default_factory=SynthSpec)

    def station(self, record_years: Optional[float] = None) -> StationMeta:
        years = self.record_years if self.record_years is not None else record_years
        if years is None:
            raise ConfigError("record_years unknown: set [station] record_years or run ingest")
        return StationMeta(self.station_id, self.latitude, self.longitude, years, self.roughness)

    def resolve(self, key: str, required: bool = True) -> Optional[Path]:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise ConfigError(f"[paths] {key} is not set")
            return None
        return (self.base_dir / value).resolve()


def load_config(path, seed: Optional[int] = None, out: Optional[str] = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    base = path.parent.resolve()

    def get(section, key, default, conv=float):
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                return conv(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"[{section}] {key}: cannot read {raw!r}") from None
        return default

    if not cp.has_section("station"):
        raise ConfigError("missing [station] section")
    st = cp["station"]
    try:
        station_id = st["id"]
        lat, lon = float(st["latitude"]), float(st["longitude"])
    except KeyError as exc:
        raise ConfigError(f"[station] missing {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"[station] {exc}") from None
    if not -90 <= lat <= 90 or not -180 <= lon <= 180:
        raise ConfigError("station latitude/longitude out of range")
    record_years = get("station", "record_years", None)
    if record_years is not None and not record_years > 0:
        raise ConfigError("record_years must be > 0")

    if cp.has_section("roughness"):
        entries = dict(cp["roughness"])
        preset = entries.pop("preset", None)
        if preset is not None:
            if preset.lower() not in STATION_TABLES:
                raise ConfigError(f"unknown roughness preset {preset!r}; have {sorted(STATION_TABLES)}")
            table = STATION_TABLES[preset.lower()]
            if entries:
                table = RoughnessTable({**table.factors, **{int(k): float(v) for k, v in entries.items()}})
        else:
            table = RoughnessTable.from_entries(entries)
    else:
        table = RoughnessTable.identity()

    paths = dict(cp["paths"]) if cp.has_section("paths") else {}
    run_seed = get("run", "seed", 0, int)
    out_dir = out if out is not None else (base / cp.get("run", "out", fallback="out"))

    seg = SegmentationConfig(p0=get("segment", "p0", 0.7), l0=get("segment", "l0", 8, int))

    kind = get("train", "kind", "SVM", str).upper()
    if kind not in KINDS:
        raise ConfigError(f"[train] kind must be one of {KINDS}")
    hp = {}
    if cp.has_section("train"):
        for k, v in cp["train"].items():
            if k.startswith("hp."):
                hp[k[3:]] = _value(v)
    try:
        resolve_hyperparams(kind, hp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ratio = get("train", "split_ratio", 0.7)
    if not 0 < ratio < 1:
        raise ConfigError("[train] split_ratio must lie in (0, 1)")

    folds = get("evaluate", "cv_folds", 10, int)
    if folds < 2:
        raise ConfigError("[evaluate] cv_folds must be >= 2")
    kinds = tuple(k.strip().upper() for k in get("evaluate", "cv_kinds", ",".join(KINDS), str).split(",")
                  if k.strip())
    if any(k not in KINDS for k in kinds):
        raise ConfigError(f"[evaluate] cv_kinds must be drawn from {KINDS}")

    threshold = get("segment", "threshold", 12.0)
    if not threshold > 0:
        raise ConfigError("[segment] threshold must be positive")
    radius = get("label-assist", "radius_km", 500.0)
    if not radius > 0:
        raise ConfigError("[label-assist] radius_km must be positive")

    synth = SynthSpec()
    if cp.has_section("synth"):
        s = cp["synth"]
        counts = {c: int(s.get(c, synth.storms_per_year[c])) for c in ("typhoon", "monsoon", "other")}
        synth = SynthSpec(years=int(s.get("years", synth.years)),
                          start_year=int(s.get("start_year", synth.start_year)),
                          storms_per_year=counts)

    return PipelineConfig(
        path=path, base_dir=base, out_dir=Path(out_dir), seed=int(seed if seed is not None else run_seed),
        station_id=station_id, latitude=lat, longitude=lon, record_years=record_years,
        roughness=table, paths=paths, threshold=threshold,
        span_hours=get("segment", "span_hours", 96.0), segmentation=seg, radius_km=radius,
        kind=kind, hyperparams=hp, split_ratio=ratio, cv_folds=folds, cv_kinds=kinds,
        cross=dict(cp["cross-station"]) if cp.has_section("cross-station") else {},
        evt_threshold=get("evt", "threshold", threshold), min_years=get("evt", "min_years", 10, int),
        curve_upper=get("curves", "upper", 200.0), synth=synth,
    )


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Problems with referenced paths; empty when every path resolves.

    Paths inside the output directory are stage artifacts and may not exist yet.
    """
    problems = []
    out = cfg.out_dir.resolve()
    refs = [(f"[paths] {k}", cfg.resolve(k)) for k in cfg.paths]
    for k in ("features", "labels"):
        if k in cfg.cross:
            refs.append((f"[cross-station] {k}", (cfg.base_dir / cfg.cross[k]).resolve()))
    for name, p in refs:
        if p.exists() or out in p.parents:
            continue
        problems.append(f"{name}: {p} does not exist")
    return problems
