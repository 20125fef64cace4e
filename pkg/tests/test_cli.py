import json

import pandas as pd
import pytest

from app.cdlab.check import ScanResult, euclidean_suite
from app.cli.reports import REPORT_MODELS
from app.cli.runner import main
from app.config.settings import CDOptions


def read(path):
    return json.loads(path.read_text())


def test_flag(tmp_path):
    assert main(["flag", "--structure", "grushin", "--point", "0,0", "--out", str(tmp_path)]) == 0
    report = read(tmp_path / "flag.json")
    assert report["growth"] == [1, 2]
    assert report["weights"] == [1, 2]
    manifest = read(tmp_path / "manifest.json")
    assert manifest["command"] == "flag"
    assert manifest["artifacts"] == ["flag.json"]
    assert manifest["config"]["run"]["output_dir"] == str(tmp_path)


def test_point_dimension_is_a_config_error(tmp_path):
    assert main(["flag", "--structure", "grushin", "--point", "0,0,0", "--out", str(tmp_path)]) == 2
    assert read(tmp_path / "error.json")["error"] == "DimensionError"


def test_unparseable_point(tmp_path):
    assert main(["flag", "--point", "a,b", "--out", str(tmp_path)]) == 2


def test_bad_override(tmp_path):
    assert main(["gate", "--set", "distance.segments=-1", "--out", str(tmp_path)]) == 2
    assert read(tmp_path / "error.json")["exit_code"] == 2


def test_undecided_flag_is_non_convergence(tmp_path):
    argv = ["flag", "--structure", "martinet", "--point", "0,0,0", "--set", "structure.max_depth=2"]
    assert main(argv + ["--out", str(tmp_path)]) == 3
    assert read(tmp_path / "error.json")["error"] == "HormanderUndecided"


def test_gate(tmp_path):
    assert main(["gate", "--k", "2", "--alpha", "1", "--out", str(tmp_path)]) == 0
    report = read(tmp_path / "gate.json")
    assert report["m"] == 11
    assert report["positive"]


def test_gate_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["gate", "--out", str(first)]) == 0
    assert main(["gate", "--out", str(second)]) == 0
    assert (first / "gate.json").read_text() == (second / "gate.json").read_text()


def test_hausdorff(tmp_path):
    assert main(["hausdorff", "--alpha", "3", "--out", str(tmp_path)]) == 0
    report = read(tmp_path / "hausdorff.json")
    assert report["slope"] == pytest.approx(4.0, abs=0.2)
    assert (tmp_path / "hausdorff_fit.csv").exists()


def test_schemas(tmp_path):
    assert main(["schemas", "--out", str(tmp_path)]) == 0
    written = sorted(p.name for p in (tmp_path / "schemas").iterdir())
    assert len(written) == len(REPORT_MODELS)
    assert "GateReport.schema.json" in written


def test_library(tmp_path):
    assert main(["library", "--out", str(tmp_path)]) == 0
    assert "grushin" in read(tmp_path / "library.json")["structures"]


def test_lift(tmp_path):
    assert main(["lift", "--steps", "200", "--samples", "10", "--out", str(tmp_path)]) == 0
    report = read(tmp_path / "lift.json")
    assert report["convention"] == "left"
    assert report["passed"]


def test_euclidean_cd_suite(tmp_path):
    argv = ["cd-check", "--suite", "euclidean", "--set", "cd.times=[0.5]", "--out", str(tmp_path)]
    assert main(argv) == 0
    report = read(tmp_path / "cd_check.json")
    assert [r["verdict"] for r in report["reports"]] == ["consistent"] * 3
    assert report["witness"] is None


def test_grushin_scan_without_violation_is_inconclusive(tmp_path, monkeypatch):
    consistent = euclidean_suite(CDOptions(times=(0.5,)), per_axis=3)
    monkeypatch.setattr("app.cli.runner.scan_grushin_violation", lambda opts: ScanResult(pd.DataFrame(), consistent))
    assert main(["cd-check", "--suite", "grushin", "--out", str(tmp_path)]) == 3
    report = read(tmp_path / "cd_check.json")
    assert report["witness"] is None
    assert report["verdict"] == "no violation found"
    assert report["note"].startswith("No configuration violated")
