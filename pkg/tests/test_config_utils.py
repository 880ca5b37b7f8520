import hashlib
import os

import pytest
from pydantic import ValidationError

from config_utils import (
    config_digest,
    get_data_dir,
    get_jobs,
    get_log_level,
    load_experiment_spec,
    load_grid_spec,
    load_sim_config,
    load_yaml_config,
)
from experiments import SweepTemplate
from sim_engine import ConfigError

REPO_CONFIG = os.path.join(os.path.dirname(__file__), "..", "config.yaml")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("MANET_IDS_JOBS", "MANET_IDS_LOG_LEVEL", "MANET_IDS_DATA_DIR"):
        monkeypatch.delenv(name, raising=False)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="없습니다"):
        load_yaml_config(str(tmp_path / "nope.yaml"))


def test_broken_yaml_is_config_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("simulation: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="형식"):
        load_yaml_config(str(path))


def test_overrides_skip_none(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("simulation:\n  node_count: 10\n  duration: 100.0\n", encoding="utf-8")
    config = load_sim_config(str(path), {"node_count": None, "rng_seed": 5})
    assert config.node_count == 10
    assert config.duration == 100.0
    assert config.rng_seed == 5


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("simulation:\n  nodes: 10\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_sim_config(str(path))


def test_invariant_violation_surfaces(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("simulation:\n  duration: 25.0\n  sampling_interval: 10.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duration % sampling_interval"):
        load_sim_config(str(path))


def test_repository_config_loads():
    spec = load_experiment_spec(REPO_CONFIG)
    assert spec.template is SweepTemplate.INTERVAL
    assert spec.base.node_count == 50
    assert spec.grid.folds == 10
    assert spec.data_dir is None
    assert load_grid_spec(REPO_CONFIG).cs == [1.0, 10.0, 100.0, 1000.0]
    assert load_sim_config(None).duration == 700.0


def test_experiment_overrides_and_data_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("MANET_IDS_DATA_DIR", str(tmp_path))
    spec = load_experiment_spec(REPO_CONFIG, {"template": "pause", "reduced_grid": None})
    assert spec.template is SweepTemplate.PAUSE
    assert spec.reduced_grid is True
    assert spec.data_dir == str(tmp_path)


def test_jobs_from_environment(monkeypatch):
    assert get_jobs() == 1
    monkeypatch.setenv("MANET_IDS_JOBS", "4")
    assert get_jobs() == 4
    monkeypatch.setenv("MANET_IDS_JOBS", "0")
    assert get_jobs(default=2) == 2
    monkeypatch.setenv("MANET_IDS_JOBS", "many")
    with pytest.raises(ConfigError, match="MANET_IDS_JOBS"):
        get_jobs()


def test_log_level_and_data_dir(monkeypatch):
    assert get_log_level() == "INFO"
    assert get_data_dir() is None
    monkeypatch.setenv("MANET_IDS_LOG_LEVEL", "debug")
    monkeypatch.setenv("MANET_IDS_DATA_DIR", "/tmp/scenarios")
    assert get_log_level() == "DEBUG"
    assert get_data_dir() == "/tmp/scenarios"


def test_config_digest(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_bytes(b"simulation: {}\n")
    assert config_digest(str(path)) == hashlib.sha256(b"simulation: {}\n").hexdigest()
    assert config_digest(None) is None
    assert config_digest(str(tmp_path / "missing.yaml")) is None
