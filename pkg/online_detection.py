"""
온라인 탐지: 시뮬레이션 중 구간 경계마다 각 정상 노드가 자기 특성 벡터를 분류하고,
정상이 아니면 Local/Global 경보를 기록한다. 경보는 시뮬레이션 동작에 영향을 주지 않는다.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np
import pandas as pd

from feature_pipeline import FEATURE_NAMES, Label, snapshot_features
from sim_engine import SimConfig, Simulator
from trained_model import TrainedModel

logger = logging.getLogger(__name__)


class AlarmScope(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"


@dataclass(frozen=True)
class AlarmRecord:
    time: float
    node: int
    scope: AlarmScope
    predicted_label: str


def check_model_compatible(config: SimConfig, model: TrainedModel) -> None:
    """샘플링 구간과 특성 스키마가 다르면 ValueError."""
    if abs(model.sampling_interval - config.sampling_interval) > 1e-9:
        raise ValueError(
            f"샘플링 구간 불일치: 모델 {model.sampling_interval}, 시나리오 {config.sampling_interval}"
        )
    if tuple(model.feature_names) != FEATURE_NAMES:
        raise ValueError(f"특성 스키마 불일치: {list(model.feature_names)}")


def run_online_detection(config: SimConfig, model: TrainedModel) -> List[AlarmRecord]:
    """시나리오를 돌리며 경계마다 직전 구간을 분류한다."""
    check_model_compatible(config, model)
    sim = Simulator(config)
    alarms: List[AlarmRecord] = []
    legit = [n for n in range(config.node_count) if n not in sim.malicious_ids]

    def on_boundary(boundary: int, now: float) -> None:
        interval = boundary - 1
        rows = np.array([snapshot_features(sim.log, node, interval).features() for node in legit])
        for node, label in zip(legit, model.predict_rows(rows)):
            if label == Label.NORMAL.value:
                continue
            alarms.append(AlarmRecord(now, node, AlarmScope.LOCAL, label))
            alarms.append(AlarmRecord(now, node, AlarmScope.GLOBAL, label))

    sim.boundary_hooks.append(on_boundary)
    sim.run()
    logger.info("%s: 경보 %d건", config.scenario_id, len(alarms))
    return alarms


def alarms_to_frame(alarms: List[AlarmRecord]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [(a.time, a.node, a.scope.value, a.predicted_label) for a in alarms],
        columns=["time", "node", "scope", "predicted_label"],
    )


def write_alarms(alarms: List[AlarmRecord], path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    alarms_to_frame(alarms).to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
