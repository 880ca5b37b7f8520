"""
CounterLog → 특성 벡터 → 데이터셋(CSV).

정상 노드 x 샘플링 구간마다 8개 특성을 만든다:
  rreq_sent, rreq_recv, rrep_sent, rerr_sent, rerr_recv, num_neighbors, pcr, pch

CSV 옆에는 `<파일>.meta.yaml` 을 두어 샘플링 구간, 스키마 버전, 생성 설정을 남긴다.
"""

from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from sklearn.preprocessing import StandardScaler

from sim_engine import CounterLog, SimConfig, run_simulation

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

FEATURE_NAMES: Tuple[str, ...] = (
    "rreq_sent",
    "rreq_recv",
    "rrep_sent",
    "rerr_sent",
    "rerr_recv",
    "num_neighbors",
    "pcr",
    "pch",
)
CSV_COLUMNS: Tuple[str, ...] = FEATURE_NAMES + ("label", "node", "interval", "scenario")
INT_COLUMNS: Tuple[str, ...] = FEATURE_NAMES[:6] + ("node", "interval")


class DatasetError(ValueError):
    """데이터셋 파일/병합 오류. 가능하면 줄 번호를 포함한다."""


class Label(str, Enum):
    NORMAL = "normal"
    BLACKHOLE = "blackhole"
    FORGING = "forging"
    DROPPING = "dropping"
    FLOODING = "flooding"


# 클래스 인덱스 순서 (동률 판정에도 쓰인다)
LABEL_ORDER: Tuple[Label, ...] = (
    Label.NORMAL,
    Label.BLACKHOLE,
    Label.DROPPING,
    Label.FLOODING,
    Label.FORGING,
)
ATTACK_LABELS: Tuple[Label, ...] = LABEL_ORDER[1:]


def label_for(config: SimConfig) -> Label:
    """시나리오의 정상 노드 행에 붙는 라벨."""
    if not config.attack_active:
        return Label.NORMAL
    return Label(config.attack_kind.value)


@dataclass(frozen=True)
class FeatureVector:
    rreq_sent: int
    rreq_recv: int
    rrep_sent: int
    rerr_sent: int
    rerr_recv: int
    num_neighbors: int
    pcr: float
    pch: float
    label: Label
    node: int
    interval: int
    scenario: str
    # 0 나눗셈 가드가 쓰였는지 (메모리에서만, CSV 에는 저장하지 않음)
    pcr_guarded: bool = field(default=False, compare=False)
    pch_guarded: bool = field(default=False, compare=False)

    def features(self) -> Tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in FEATURE_NAMES)


def compute_pcr(before: Iterable[int], after: Iterable[int]) -> float:
    """경로 집합 변화율: 대칭차 크기 / 이전 집합 크기. 이전이 비면 0 또는 새 경로 수."""
    s1, s2 = frozenset(before), frozenset(after)
    changed = len(s1 ^ s2)
    if not s1:
        return float(len(s2))
    return changed / len(s1)


def compute_pch(before: int, after: int) -> float:
    """hop 합 변화율: (H2 - H1) / H1. H1 == 0 이면 0 또는 H2."""
    if before == 0:
        return float(after)
    return (after - before) / before


def snapshot_features(log: CounterLog, node: int, interval: int) -> FeatureVector:
    """한 정상 노드의 한 구간 특성. 구간이 끝나야(경계가 기록돼야) 계산할 수 있다."""
    if node in log.malicious_ids:
        raise ValueError(f"악성 노드 {node} 의 특성은 만들지 않습니다")
    if not 0 <= interval < log.config.interval_count:
        raise ValueError(f"구간 번호 범위 밖: {interval}")
    if interval + 1 >= log.boundaries_recorded:
        raise ValueError(f"구간 {interval} 이 아직 끝나지 않았습니다")

    before, after = log.route_sets[interval][node], log.route_sets[interval + 1][node]
    h1, h2 = int(log.hop_sums[interval, node]), int(log.hop_sums[interval + 1, node])
    counts = log.counters(node, interval)
    return FeatureVector(
        **counts,
        num_neighbors=log.neighbor_count(node, interval),
        pcr=compute_pcr(before, after),
        pch=compute_pch(h1, h2),
        label=label_for(log.config),
        node=node,
        interval=interval,
        scenario=log.config.scenario_id,
        pcr_guarded=not before,
        pch_guarded=h1 == 0,
    )


@dataclass
class Dataset:
    rows: List[FeatureVector]
    sampling_interval: float
    provenance: List[SimConfig] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __len__(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.array([r.features() for r in self.rows], dtype=float)

    def labels(self) -> List[Label]:
        return [r.label for r in self.rows]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.rows[i] for i in indices], self.sampling_interval, list(self.provenance))

    def label_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.rows:
            counts[r.label.value] = counts.get(r.label.value, 0) + 1
        return counts

    def to_frame(self) -> pd.DataFrame:
        records = []
        for r in self.rows:
            record = {name: getattr(r, name) for name in FEATURE_NAMES}
            # float 는 repr 로 써야 읽었을 때 비트 단위로 같다
            record["pcr"] = repr(float(r.pcr))
            record["pch"] = repr(float(r.pch))
            record.update(label=r.label.value, node=r.node, interval=r.interval, scenario=r.scenario)
            records.append(record)
        return pd.DataFrame.from_records(records, columns=list(CSV_COLUMNS))


def extract_dataset(log: CounterLog) -> Dataset:
    """구간 순서, 그 안에서 노드 id 순서로 모든 정상 노드 행을 만든다."""
    rows = []
    for k in range(log.config.interval_count):
        for node in range(log.config.node_count):
            if node in log.malicious_ids:
                continue
            rows.append(snapshot_features(log, node, k))
    guarded = sum(r.pcr_guarded or r.pch_guarded for r in rows)
    logger.debug("%s: %d행 추출 (0 나눗셈 가드 %d행)", log.config.scenario_id, len(rows), guarded)
    return Dataset(rows, log.config.sampling_interval, [log.config])


def simulate_dataset(config: SimConfig) -> Dataset:
    return extract_dataset(run_simulation(config))


def merge_datasets(datasets: Sequence[Dataset]) -> Dataset:
    """같은 샘플링 구간의 데이터셋만 이어 붙인다."""
    if not datasets:
        raise DatasetError("병합할 데이터셋이 없습니다")
    base = datasets[0]
    rows: List[FeatureVector] = []
    provenance: List[SimConfig] = []
    for d in datasets:
        if not math.isclose(d.sampling_interval, base.sampling_interval):
            raise DatasetError(
                f"샘플링 구간 불일치: {base.sampling_interval} vs {d.sampling_interval}"
            )
        if d.schema_version != base.schema_version:
            raise DatasetError(f"스키마 버전 불일치: {base.schema_version} vs {d.schema_version}")
        rows.extend(d.rows)
        provenance.extend(d.provenance)
    return Dataset(rows, base.sampling_interval, provenance, base.schema_version)


# ---------------------------------------------------------------------- #
# 파일 입출력
# ---------------------------------------------------------------------- #
def _meta_path(path: str) -> str:
    return f"{path}.meta.yaml"


def write_dataset(dataset: Dataset, path: str) -> None:
    """CSV(정확한 헤더) + 메타데이터 YAML 저장."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    dataset.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    meta = {
        "schema_version": dataset.schema_version,
        "sampling_interval": dataset.sampling_interval,
        "rows": len(dataset),
        "provenance": [cfg.model_dump(mode="json") for cfg in dataset.provenance],
    }
    with open(_meta_path(path), "w", encoding="utf-8") as f:
        yaml.safe_dump(meta, f, sort_keys=True, allow_unicode=True)
    logger.info("데이터셋 저장: %s (%d행)", path, len(dataset))


def _parse_int(text, column: str, line: int) -> int:
    if not isinstance(text, str) or not re.fullmatch(r"-?[0-9]+", text):
        raise DatasetError(f"{line}행 {column}: 정수가 아닙니다 ({text!r})")
    return int(text)


def _parse_float(text, column: str, line: int) -> float:
    if not isinstance(text, str) or text != text.strip():
        raise DatasetError(f"{line}행 {column}: 실수가 아닙니다 ({text!r})")
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"{line}행 {column}: 실수가 아닙니다 ({text!r})") from None
    if not math.isfinite(value):
        raise DatasetError(f"{line}행 {column}: 유한한 값이 아닙니다 ({text!r})")
    return value


def _parse_row(record: Dict[str, object], line: int) -> FeatureVector:
    values: Dict[str, object] = {}
    for column in INT_COLUMNS:
        values[column] = _parse_int(record[column], column, line)
    for column in ("pcr", "pch"):
        values[column] = _parse_float(record[column], column, line)
    label = record["label"]
    try:
        values["label"] = Label(label)
    except ValueError:
        raise DatasetError(f"{line}행 label: 알 수 없는 라벨 {label!r}") from None
    scenario = record["scenario"]
    if not isinstance(scenario, str):
        raise DatasetError(f"{line}행 scenario: 값이 없습니다")
    values["scenario"] = scenario
    return FeatureVector(**values)


def _read_meta(path: str) -> Dict:
    meta_path = _meta_path(path)
    if not os.path.exists(meta_path):
        raise DatasetError(f"메타데이터 파일이 없습니다: {meta_path}")
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = yaml.safe_load(f) or {}
    if "sampling_interval" not in meta:
        raise DatasetError(f"메타데이터에 sampling_interval 이 없습니다: {meta_path}")
    return meta


def read_dataset(path: str) -> Dataset:
    """CSV 를 엄격하게 읽는다. 형식 오류는 줄 번호가 담긴 DatasetError."""
    meta = _read_meta(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        raise DatasetError(f"{path}: CSV 형식 오류 ({e})") from e
    except pd.errors.EmptyDataError:
        raise DatasetError(f"1행: 헤더가 없습니다 ({path})") from None

    if tuple(frame.columns) != CSV_COLUMNS:
        raise DatasetError(f"1행: 헤더 불일치 {list(frame.columns)}")

    rows = [_parse_row(record, i + 2) for i, record in enumerate(frame.to_dict(orient="records"))]
    provenance = [SimConfig(**cfg) for cfg in meta.get("provenance", [])]
    schema_version = int(meta.get("schema_version", SCHEMA_VERSION))
    if schema_version != SCHEMA_VERSION:
        raise DatasetError(f"지원하지 않는 스키마 버전: {schema_version}")
    return Dataset(rows, float(meta["sampling_interval"]), provenance, schema_version)


def write_counter_trace(log: CounterLog, path: str) -> None:
    """노드 x 구간 카운터 원본을 CSV 로 남긴다."""
    log.to_frame().to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


# ---------------------------------------------------------------------- #
# 표준화
# ---------------------------------------------------------------------- #
@dataclass
class Standardizer:
    """학습 데이터 통계로만 만든 z-score 변환. 분산 0 인 열은 scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> Dict[str, List[float]]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, List[float]]) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["scale"], dtype=float))


def fit_standardizer(train: Union[Dataset, np.ndarray]) -> Standardizer:
    X = train.matrix() if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    if len(X) == 0:
        raise ValueError("빈 데이터로 표준화 통계를 만들 수 없습니다")
    scaler = StandardScaler().fit(X)
    return Standardizer(scaler.mean_.copy(), scaler.scale_.copy())


def apply_standardizer(standardizer: Standardizer, X: np.ndarray) -> np.ndarray:
    return standardizer.apply(X)
