import json

import pytest
from pydantic import ValidationError

from app.config.settings import OUTPUT_DIR_ENV, CDOptions, apply_overrides, load_settings
from app.errors import ConfigError


def test_defaults():
    settings = load_settings()
    assert settings.run.seed == 20240611
    assert settings.distance.segments == 40
    assert settings.distance.seed == settings.run.seed
    assert settings.cone.threads == settings.run.threads
    assert settings.cd.times == (0.25, 0.5, 0.75)


def test_overrides_are_json_parsed():
    settings = load_settings(overrides=["distance.segments=12", "cd.times=[0.5]", "logging.level=DEBUG"])
    assert settings.distance.segments == 12
    assert settings.cd.times == (0.5,)
    assert settings.logging.level == "DEBUG"


def test_seed_propagates_unless_set():
    settings = load_settings(overrides=["run.seed=5", "shooting.seed=9"])
    assert settings.distance.seed == 5
    assert settings.shooting.seed == 9


@pytest.mark.parametrize("item", ["segments=3", "distance.segments", "distance.segments=-1", "distance.nope=1"])
def test_bad_override(item):
    with pytest.raises(ConfigError):
        load_settings(overrides=[item])


def test_config_file_is_merged(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"cone": {"nodes": 16}, "run": {"seed": 3}}))
    settings = load_settings(str(path))
    assert settings.cone.nodes == 16
    assert settings.cone.starts == 4
    assert settings.cone.seed == 3


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(str(tmp_path / "missing.json"))


def test_invalid_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_settings(str(path))


def test_output_dir_from_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "runs"))
    assert load_settings().output_dir == tmp_path / "runs"


def test_sections_are_frozen():
    settings = load_settings()
    with pytest.raises(ValidationError):
        settings.distance.segments = 3


def test_violation_threshold():
    assert CDOptions(tolerance=1e-2, budget=2e-3).violation_threshold == pytest.approx(1.2e-2)


def test_apply_overrides_leaves_input_untouched():
    doc = {"run": {"seed": 1}}
    out = apply_overrides(doc, ["run.seed=2"])
    assert doc["run"]["seed"] == 1
    assert out["run"]["seed"] == 2
