import csv
import hashlib
import io
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from windclime.cli import EXIT_CONVERGENCE, EXIT_INPUT, EXIT_OK, main
from windclime.pipeline import MissingArtifactError, emit_report
from windclime.storms import parse_storms_csv
from windclime.synth import parse_truth_csv

PIPELINE = ["synth", "ingest", "segment", "featurize", "label-assist", "train", "evaluate",
            "cross-station", "evt", "curves", "report"]

CONFIG = """\
[station]
id = SYN
latitude = 30.0
longitude = 122.0

[paths]
input = out/synth_records.csv
truth = out/truth.csv

[run]
seed = 7
out = out

[synth]
years = 4
typhoon = 8
monsoon = 8
other = 8

[evaluate]
cv_folds = 5
cv_kinds = svm, knn, nb

[cross-station]
features = out/features.csv
labels = out/labels_assisted.csv
station_id = SYN-B

[evt]
min_years = 3
"""


def digest(directory: Path) -> dict:
    return {str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.rglob("*")) if p.is_file()}


def run_all(config: Path, *extra) -> None:
    for stage in PIPELINE:
        assert main([stage, "--config", str(config), "-q", *extra]) == EXIT_OK, stage


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.ini"
    config.write_text(CONFIG)
    run_all(config)
    return root, config


def test_segment_finds_planted_storms(project):
    root, _ = project
    truth = parse_truth_csv((root / "out/truth.csv").read_text())
    storms = parse_storms_csv((root / "out/storms.csv").read_text())
    assert len(truth) == 4 * 24
    assert len(storms) == len(truth)


def test_full_pipeline_outputs(project):
    root, _ = project
    out = root / "out"
    for name in ["records.csv", "record_meta.csv", "features.csv", "labels_assisted.csv", "model.json",
                 "split.csv", "metrics.csv", "confusion.csv", "roc.csv", "cv_summary.csv",
                 "cv_folds.csv", "cross_metrics.csv", "samples.csv", "fits.csv", "curves.csv"]:
        assert (out / name).is_file(), name
    report = out / "report"
    for name in ["class_histogram.csv", "cv_box.csv", "return_curves.csv", "summary.txt",
                 "windrose_typhoon.csv", "windrose_monsoon.csv", "windrose_other.csv",
                 "roc_typhoon.csv", "cross_roc_typhoon.csv"]:
        assert (report / name).is_file(), name
    assert "notices" not in (report / "summary.txt").read_text()


def test_windrose_rows_equal_sample_counts(project):
    root, _ = project
    samples = list(csv.DictReader(io.StringIO((root / "out/samples.csv").read_text())))
    for kind in ("typhoon", "monsoon", "other"):
        rows = list(csv.DictReader(io.StringIO((root / f"out/report/windrose_{kind}.csv").read_text())))
        assert len(rows) == sum(r["type"] == kind for r in samples)
        assert [r["storm_id"] for r in rows] == [r["storm_id"] for r in samples if r["type"] == kind]


def test_rerun_is_hash_identical(project, tmp_path):
    root, config = project
    run_all(config, "--out", str(tmp_path / "again"))
    assert digest(tmp_path / "again") == digest(root / "out")


def test_seed_override_changes_synth(project, tmp_path):
    _, config = project
    assert main(["synth", "--config", str(config), "--seed", "8", "--out", str(tmp_path), "-q"]) == 0
    root, _ = project
    assert (tmp_path / "truth.csv").read_bytes() != (root / "out/truth.csv").read_bytes()


def test_missing_upstream_artifact(project, tmp_path, capsys):
    _, config = project
    code = main(["featurize", "--config", str(config), "--out", str(tmp_path / "empty")])
    assert code == EXIT_INPUT
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "empty").exists() or not any((tmp_path / "empty").iterdir())


def test_report_with_evaluation_only(project, tmp_path):
    root, _ = project
    for name in ("roc.csv", "metrics.csv", "cv_folds.csv"):
        shutil.copy(root / "out" / name, tmp_path / name)
    files, notices = emit_report(tmp_path)
    assert "report/roc_typhoon.csv" in files and "report/cv_box.csv" in files
    assert "report/return_curves.csv" not in files
    assert any("curves.csv" in n for n in notices)
    assert "curves.csv not found" in files["report/summary.txt"]


def test_report_with_nothing(tmp_path):
    with pytest.raises(MissingArtifactError):
        emit_report(tmp_path)


def test_convergence_failure_exit_code(project, tmp_path):
    root, _ = project
    config = tmp_path / "tight.ini"
    config.write_text(CONFIG + "\n[curves]\nupper = 12.5\n")
    (tmp_path / "out").mkdir()
    shutil.copy(root / "out/fits.csv", tmp_path / "out/fits.csv")
    assert main(["curves", "--config", str(config), "-q"]) == EXIT_CONVERGENCE
    assert not (tmp_path / "out/curves.csv").exists()


def test_validate_config(project, tmp_path, capsys):
    _, config = project
    assert main(["--validate-config", "--config", str(config)]) == EXIT_OK
    bad = tmp_path / "bad.ini"
    bad.write_text(CONFIG.replace("latitude = 30.0", "latitude = 95.0"))
    assert main(["--validate-config", "--config", str(bad)]) == EXIT_INPUT
    missing = tmp_path / "missing.ini"
    missing.write_text(CONFIG.replace("input = out/synth_records.csv", "input = nowhere.csv"))
    assert main(["--validate-config", "--config", str(missing)]) == EXIT_INPUT
    assert "nowhere.csv" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["segment"]) == EXIT_INPUT
    assert main(["--config", str(tmp_path / "x.ini")]) == EXIT_INPUT
    assert main(["segment", "--config", str(tmp_path / "x.ini")]) == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["explode", "--config", "x"])
    assert exc.value.code == 2  # argparse usage error


def test_version_subprocess():
    res = subprocess.run([sys.executable, "-m", "windclime.cli", "--version"], capture_output=True,
                         text=True, check=True)
    assert res.stdout.strip() == "windclime 0.1.0"
