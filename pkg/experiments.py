"""
스윕 실험: 샘플링 구간 / 악성 노드 수 / 정지 시간 축을 따라
(모델 종류 x 작업 모드) 열 가지 모델을 학습하고 평가한다.

학습 데이터는 dt 마다 모든 공격 x 악성 노드 수 x 정지 시간 시나리오(+정상)를 합치고,
테스트 데이터는 별도 시드로 셀마다 새로 만든다.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from classifiers import LabelTask, ModelKind, TaskMode, default_hyperparameters
from evaluation import EvalReport, GridSpec, evaluate_model, grid_search
from feature_pipeline import Dataset, DatasetError, merge_datasets, read_dataset, simulate_dataset, write_dataset
from sim_engine import TIME_EPS, AttackKind, ConfigError, SimConfig
from trained_model import TrainedModel, train_model

logger = logging.getLogger(__name__)

ATTACKS = [AttackKind.BLACKHOLE, AttackKind.FORGING, AttackKind.DROPPING, AttackKind.FLOODING]


class SweepTemplate(str, Enum):
    INTERVAL = "interval"
    MALICIOUS = "malicious"
    PAUSE = "pause"


AXIS_COLUMN = {
    SweepTemplate.INTERVAL: "dt",
    SweepTemplate.MALICIOUS: "malicious_count",
    SweepTemplate.PAUSE: "pause_time",
}


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    template: SweepTemplate = SweepTemplate.INTERVAL
    base: SimConfig = Field(default_factory=SimConfig)
    attacks: List[AttackKind] = Field(default_factory=lambda: list(ATTACKS))
    sampling_intervals: List[float] = Field(default_factory=lambda: [5.0, 10.0, 15.0, 30.0])
    malicious_counts: List[int] = Field(default_factory=lambda: [5, 15, 25])
    pause_times: List[float] = Field(default_factory=lambda: [0.0, 200.0, 400.0, 700.0])
    fixed_sampling_interval: float = 15.0
    fixed_malicious_count: int = 15
    fixed_pause_time: float = 200.0
    train_seeds: List[int] = Field(default_factory=lambda: [1])
    test_seeds: List[int] = Field(default_factory=lambda: [1001, 1002, 1003])
    models: List[ModelKind] = Field(default_factory=lambda: list(ModelKind))
    modes: List[TaskMode] = Field(default_factory=lambda: list(TaskMode))
    tune: bool = True
    reduced_grid: bool = True
    grid: GridSpec = Field(default_factory=GridSpec)
    tuning_seed: int = 0
    data_dir: Optional[str] = None
    simulate_missing: bool = True

    def axis_values(self) -> List[float]:
        if self.template is SweepTemplate.INTERVAL:
            return list(self.sampling_intervals)
        if self.template is SweepTemplate.MALICIOUS:
            return list(self.malicious_counts)
        return list(self.pause_times)

    def sampling_interval_for(self, axis_value) -> float:
        return float(axis_value) if self.template is SweepTemplate.INTERVAL else self.fixed_sampling_interval

    def effective_grid(self) -> GridSpec:
        return self.grid.reduced() if self.reduced_grid else self.grid


def aligned_duration(duration: float, dt: float) -> float:
    """duration 이하에서 dt 의 가장 큰 배수 (예: 700s, dt=15 → 690s)."""
    count = int(math.floor(duration / dt + TIME_EPS))
    if count < 1:
        raise ConfigError(f"duration({duration}) 이 샘플링 구간({dt})보다 짧습니다")
    return count * dt


def scenario_config(
    base: SimConfig, attack: AttackKind, malicious: int, pause: float, dt: float, seed: int
) -> SimConfig:
    """스윕 셀 하나의 시나리오. duration 은 dt 의 배수로 맞춘다."""
    if attack is AttackKind.NONE:
        malicious = 0
    return base.with_changes(
        duration=aligned_duration(base.duration, dt),
        attack_kind=attack,
        malicious_count=malicious,
        pause_time=pause,
        sampling_interval=dt,
        rng_seed=seed,
    )


def training_configs(spec: ExperimentSpec, dt: float) -> List[SimConfig]:
    """dt 하나의 학습 시나리오: 공격 x 악성 수 x 정지 시간 x 시드 + 정상 x 정지 시간 x 시드."""
    configs = []
    for seed in spec.train_seeds:
        for pause in spec.pause_times:
            configs.append(scenario_config(spec.base, AttackKind.NONE, 0, pause, dt, seed))
            for attack in spec.attacks:
                for m in spec.malicious_counts:
                    configs.append(scenario_config(spec.base, attack, m, pause, dt, seed))
    return configs


def testing_configs(spec: ExperimentSpec, axis_value, attack: AttackKind) -> List[SimConfig]:
    """셀 하나의 테스트 시나리오 (정상 시나리오 포함)."""
    dt = spec.sampling_interval_for(axis_value)
    if spec.template is SweepTemplate.INTERVAL:
        pairs = [(m, p) for m in spec.malicious_counts for p in spec.pause_times]
        pauses = list(spec.pause_times)
    elif spec.template is SweepTemplate.MALICIOUS:
        pairs = [(int(axis_value), spec.fixed_pause_time)]
        pauses = [spec.fixed_pause_time]
    else:
        pairs = [(spec.fixed_malicious_count, float(axis_value))]
        pauses = [float(axis_value)]
    configs = []
    for seed in spec.test_seeds:
        for pause in pauses:
            configs.append(scenario_config(spec.base, AttackKind.NONE, 0, pause, dt, seed))
        for m, pause in pairs:
            configs.append(scenario_config(spec.base, attack, m, pause, dt, seed))
    return configs


class ScenarioStore:
    """시나리오 데이터셋 캐시 (메모리 + 선택적으로 data_dir 의 CSV)."""

    def __init__(self, data_dir: Optional[str] = None, simulate_missing: bool = True):
        self.data_dir = data_dir
        self.simulate_missing = simulate_missing
        self._memory: Dict[SimConfig, Dataset] = {}

    def path(self, config: SimConfig) -> Optional[str]:
        if not self.data_dir:
            return None
        return os.path.join(self.data_dir, f"{config.scenario_id}.csv")

    def _load(self, config: SimConfig) -> Optional[Dataset]:
        path = self.path(config)
        if path is None or not os.path.exists(path):
            return None
        try:
            dataset = read_dataset(path)
        except DatasetError as e:
            logger.warning("캐시 데이터셋을 읽을 수 없음 %s: %s", path, e)
            return None
        if dataset.provenance != [config]:
            logger.info("캐시 데이터셋 설정이 달라 다시 생성: %s", path)
            return None
        return dataset

    def prefetch(self, configs: Iterable[SimConfig], jobs: int = 1) -> None:
        """없는 시나리오를 병렬로 시뮬레이션해 채운다."""
        missing = []
        for config in dict.fromkeys(configs):
            if config in self._memory:
                continue
            loaded = self._load(config)
            if loaded is not None:
                self._memory[config] = loaded
            elif self.simulate_missing:
                missing.append(config)
        if not missing:
            return
        logger.info("시나리오 %d개 시뮬레이션 (jobs=%d)", len(missing), jobs)
        datasets = Parallel(n_jobs=jobs)(delayed(simulate_dataset)(cfg) for cfg in missing)
        for config, dataset in zip(missing, datasets):
            self._memory[config] = dataset
            path = self.path(config)
            if path is not None:
                write_dataset(dataset, path)

    def put(self, config: SimConfig, dataset: Dataset) -> None:
        self._memory[config] = dataset

    def get(self, config: SimConfig) -> Optional[Dataset]:
        return self._memory.get(config)

    def merged(self, configs: Sequence[SimConfig]) -> Optional[Dataset]:
        """모든 시나리오가 있을 때만 합친다. 하나라도 없으면 None."""
        datasets = [self.get(cfg) for cfg in configs]
        if not datasets or any(d is None for d in datasets):
            return None
        return merge_datasets(datasets)


@dataclass
class ExperimentResult:
    template: SweepTemplate
    reports: List[EvalReport] = field(default_factory=list)
    absent: List[Dict[str, object]] = field(default_factory=list)

    def summary(self) -> pd.DataFrame:
        return summarize_reports(self.reports, AXIS_COLUMN[self.template])

    def table(self) -> pd.DataFrame:
        return reports_to_table(self.reports)


def _cell(spec: ExperimentSpec, axis_value, attack: AttackKind, kind: ModelKind, mode: TaskMode) -> Dict[str, object]:
    dt = spec.sampling_interval_for(axis_value)
    cell: Dict[str, object] = {"dt": dt, "malicious_count": None, "pause_time": None}
    if spec.template is SweepTemplate.MALICIOUS:
        cell.update(malicious_count=int(axis_value), pause_time=spec.fixed_pause_time)
    elif spec.template is SweepTemplate.PAUSE:
        cell.update(malicious_count=spec.fixed_malicious_count, pause_time=float(axis_value))
    cell.update(attack=attack.value, model=kind.value, task=mode.value)
    return cell


def _train_models(spec: ExperimentSpec, train_set: Dataset, jobs: int) -> Dict[Tuple[ModelKind, TaskMode], TrainedModel]:
    models = {}
    grid = spec.effective_grid()
    for kind in spec.models:
        for mode in spec.modes:
            task = LabelTask.for_mode(mode).restricted_to(train_set.labels())
            if spec.tune:
                hp = grid_search(kind, train_set, task, grid, spec.tuning_seed, jobs).best
            else:
                hp = default_hyperparameters(kind)
            models[(kind, mode)] = train_model(kind, train_set, task, hp, spec.tuning_seed)
    return models


def run_experiment(spec: ExperimentSpec, jobs: int = 1, store: Optional[ScenarioStore] = None) -> ExperimentResult:
    """
    스윕 템플릿 하나를 실행한다.

    셀 하나 = (축 값, 공격, 모델 종류, 작업 모드). 데이터셋이 없는 셀은 absent 로 남기고 계속한다.
    """
    store = store or ScenarioStore(spec.data_dir, spec.simulate_missing)
    result = ExperimentResult(spec.template)
    if not spec.models or not spec.modes:
        return result

    trained: Dict[float, Dict[Tuple[ModelKind, TaskMode], TrainedModel]] = {}
    for axis_value in spec.axis_values():
        dt = spec.sampling_interval_for(axis_value)
        cells_configs = {attack: testing_configs(spec, axis_value, attack) for attack in spec.attacks}
        needed = list(training_configs(spec, dt)) if dt not in trained else []
        for configs in cells_configs.values():
            needed.extend(configs)
        store.prefetch(needed, jobs)

        if dt not in trained:
            train_set = store.merged(training_configs(spec, dt))
            trained[dt] = _train_models(spec, train_set, jobs) if train_set is not None else {}
            if train_set is None:
                logger.warning("dt=%g 학습 데이터셋이 없어 해당 셀을 건너뜀", dt)

        for attack in spec.attacks:
            test_set = store.merged(cells_configs[attack])
            for kind in spec.models:
                for mode in spec.modes:
                    cell = _cell(spec, axis_value, attack, kind, mode)
                    model = trained[dt].get((kind, mode))
                    if test_set is None or model is None:
                        logger.warning("셀 누락: %s", cell)
                        result.absent.append(cell)
                        continue
                    result.reports.append(evaluate_model(model, test_set, cell))
        logger.info("%s=%s 완료 (보고서 누적 %d개)", AXIS_COLUMN[spec.template], axis_value, len(result.reports))
    return result


METRICS = ("error", "detection_rate", "false_alarm")


def _report_records(reports: Sequence[EvalReport]) -> pd.DataFrame:
    records = []
    for report in reports:
        record = dict(report.cell)
        record.setdefault("dt", report.sampling_interval)
        record.setdefault("model", report.kind.value)
        record.setdefault("task", report.mode.value)
        record.update(error=report.error, detection_rate=report.detection_rate, false_alarm=report.false_alarm)
        records.append(record)
    return pd.DataFrame.from_records(records)


def summarize_reports(reports: Sequence[EvalReport], axis: str) -> pd.DataFrame:
    """(축 값, 모델, 작업)별로 공격 시나리오에 걸친 평균/최소/최대."""
    if not reports:
        return pd.DataFrame(columns=[axis, "model", "task"])
    frame = _report_records(reports)
    frame[list(METRICS)] = frame[list(METRICS)].astype(float)
    summary = frame.groupby([axis, "model", "task"], sort=True)[list(METRICS)].agg(["mean", "min", "max"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    return summary.reset_index()


TABLE_COLUMNS = ["dt", "malicious_count", "pause_time", "attack", "model", "task", "metric", "value"]


def reports_to_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """그림 축 기준의 긴(long) 형식 표. 정의되지 않은 지표는 행을 만들지 않는다."""
    rows = []
    for report in reports:
        cell = report.cell
        key = {
            "dt": cell.get("dt", report.sampling_interval),
            "malicious_count": cell.get("malicious_count"),
            "pause_time": cell.get("pause_time"),
            "attack": cell.get("attack"),
            "model": report.kind.value,
            "task": report.mode.value,
        }
        metrics = {"error": report.error, "dr": report.detection_rate, "fa": report.false_alarm}
        metrics.update({f"dr_{attack}": value for attack, value in sorted(report.per_attack.items())})
        for metric, value in metrics.items():
            if value is not None:
                rows.append({**key, "metric": metric, "value": value})
    return pd.DataFrame.from_records(rows, columns=TABLE_COLUMNS)
