"""
공통 설정 로딩 유틸리티.

- `config.yaml` 에서 시뮬레이션/그리드/실험 설정 로드
- `.env` 에서 프로세스 설정(병렬 수, 로그 레벨, 데이터 캐시 경로) 로드
"""

import hashlib
import os
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from evaluation import GridSpec
from experiments import ExperimentSpec
from sim_engine import ConfigError, SimConfig

DEFAULT_CONFIG_PATH = "config.yaml"


def load_yaml_config(config_path: str = DEFAULT_CONFIG_PATH) -> Dict[str, Any]:
    """`config.yaml` 전체를 dict 로 로드. 파일이 없거나 형식이 틀리면 ConfigError."""
    if not os.path.exists(config_path):
        raise ConfigError(f"설정 파일이 없습니다: {config_path}")
    with open(config_path, "r", encoding="utf-8") as f:
        try:
            cfg = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"설정 파일 형식 오류 ({config_path}): {e}") from e
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"설정 파일 최상위는 mapping 이어야 합니다: {config_path}")
    return cfg


def _section(cfg: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = cfg.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"설정 섹션 '{name}' 은 mapping 이어야 합니다")
    return dict(section)


def load_sim_config(
    config_path: Optional[str] = DEFAULT_CONFIG_PATH,
    overrides: Optional[Dict[str, Any]] = None,
) -> SimConfig:
    """`simulation` 섹션 + 명령행 덮어쓰기(None 값은 무시)로 SimConfig 생성."""
    values = _section(load_yaml_config(config_path), "simulation") if config_path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return SimConfig(**values)


def load_grid_spec(config_path: Optional[str] = DEFAULT_CONFIG_PATH) -> GridSpec:
    values = _section(load_yaml_config(config_path), "grid") if config_path else {}
    return GridSpec(**values)


def load_experiment_spec(
    config_path: Optional[str] = DEFAULT_CONFIG_PATH,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentSpec:
    """`experiment` 섹션. base 시나리오는 `simulation` 섹션, 그리드는 `grid` 섹션을 쓴다."""
    cfg = load_yaml_config(config_path) if config_path else {}
    values = _section(cfg, "experiment")
    values["base"] = SimConfig(**_section(cfg, "simulation"))
    values["grid"] = GridSpec(**_section(cfg, "grid"))
    if get_data_dir() and not values.get("data_dir"):
        values["data_dir"] = get_data_dir()
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentSpec(**values)


def config_digest(config_path: Optional[str]) -> Optional[str]:
    """설정 파일 내용의 SHA-256. 파일을 쓰지 않았으면 None."""
    if not config_path or not os.path.exists(config_path):
        return None
    with open(config_path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def get_jobs(default: int = 1) -> int:
    """환경변수(.env)의 기본 병렬 작업 수."""
    load_dotenv()
    value = os.getenv("MANET_IDS_JOBS")
    if not value:
        return default
    try:
        jobs = int(value)
    except ValueError:
        raise ConfigError(f"MANET_IDS_JOBS 는 정수여야 합니다: {value!r}") from None
    return jobs if jobs != 0 else default


def get_log_level(default: str = "INFO") -> str:
    load_dotenv()
    return os.getenv("MANET_IDS_LOG_LEVEL", default).upper()


def get_data_dir() -> Optional[str]:
    """실험용 시나리오 데이터셋 캐시 디렉터리."""
    load_dotenv()
    return os.getenv("MANET_IDS_DATA_DIR") or None
