"""
학습된 모델 묶음: 학습기 + 표준화 통계 + 라벨 작업 + 하이퍼파라미터.

JSON 으로 저장/복원하며, 복원한 모델의 예측은 원본과 같다.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from classifiers import Hyperparameters, LabelTask, ModelKind, Prediction, TrainingError, predict
from feature_pipeline import FEATURE_NAMES, Dataset, Standardizer, fit_standardizer
from gmm import GmmModel, train_gmm, train_naive_bayes
from mlp import MlpModel, train_mlp
from svm import SvmModel, train_svm

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

LearnerModel = Union[MlpModel, GmmModel, SvmModel]


def fit_learner(
    kind: ModelKind,
    X: np.ndarray,
    y: np.ndarray,
    task: LabelTask,
    hp: Hyperparameters,
    seed: int,
) -> LearnerModel:
    """표준화된 X 와 클래스 인덱스 y 로 학습기 하나를 학습한다."""
    kind = ModelKind(kind)
    if kind is ModelKind.MLP:
        hp.require("learning_rate", "iterations", "hidden_units")
        return train_mlp(X, y, task.classes, hp.learning_rate, hp.iterations, hp.hidden_units, seed)
    if kind is ModelKind.LINEAR:
        hp.require("learning_rate", "iterations")
        return train_mlp(X, y, task.classes, hp.learning_rate, hp.iterations, 0, seed)
    if kind is ModelKind.GMM:
        hp.require("threshold", "iterations", "components")
        return train_gmm(X, y, task.classes, hp.components, hp.iterations, hp.threshold, seed)
    if kind is ModelKind.NAIVE_BAYES:
        return train_naive_bayes(X, y, task.classes)
    hp.require("sigma", "c")
    return train_svm(X, y, task.classes, hp.sigma, hp.c)


def _learner_from_dict(kind: ModelKind, data: dict) -> LearnerModel:
    if kind in (ModelKind.MLP, ModelKind.LINEAR):
        return MlpModel.from_dict(data)
    if kind in (ModelKind.GMM, ModelKind.NAIVE_BAYES):
        return GmmModel.from_dict(data)
    return SvmModel.from_dict(data)


@dataclass
class TrainedModel:
    kind: ModelKind
    task: LabelTask
    hyperparameters: Hyperparameters
    standardizer: Standardizer
    learner: LearnerModel
    sampling_interval: float
    seed: int = 0
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    training_scenarios: List[str] = field(default_factory=list)

    def predict_one(self, x: Sequence[float]) -> Prediction:
        """원본(표준화 전) 특성 벡터 하나를 분류."""
        row = np.asarray(x, dtype=float)
        if row.shape != (len(self.feature_names),):
            raise ValueError(f"특성 차원 불일치: 입력 {row.shape}, 모델 {len(self.feature_names)}")
        return predict(self.learner, self.standardizer.apply(row), self.task.classes)

    def predict_rows(self, X: np.ndarray) -> List[str]:
        """원본 특성 행렬 (n, d) 의 예측 라벨."""
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            return []
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"특성 차원 불일치: 입력 {X.shape}, 모델 {len(self.feature_names)}")
        return self.task.decode(self.learner.predict_indices(self.standardizer.apply(X)))

    def predict_dataset(self, dataset: Dataset) -> List[str]:
        return self.predict_rows(dataset.matrix())

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind.value,
            "task": self.task.to_dict(),
            "hyperparameters": self.hyperparameters.model_dump(exclude_none=True),
            "standardizer": self.standardizer.to_dict(),
            "sampling_interval": self.sampling_interval,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "training_scenarios": list(self.training_scenarios),
            "learner": self.learner.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        kind = ModelKind(data["kind"])
        return cls(
            kind=kind,
            task=LabelTask.from_dict(data["task"]),
            hyperparameters=Hyperparameters(**data["hyperparameters"]),
            standardizer=Standardizer.from_dict(data["standardizer"]),
            learner=_learner_from_dict(kind, data["learner"]),
            sampling_interval=float(data["sampling_interval"]),
            seed=int(data.get("seed", 0)),
            feature_names=tuple(data.get("feature_names", FEATURE_NAMES)),
            training_scenarios=list(data.get("training_scenarios", [])),
        )


def train_model(
    kind: ModelKind,
    dataset: Dataset,
    task: LabelTask,
    hp: Hyperparameters,
    seed: int = 0,
    standardizer: Optional[Standardizer] = None,
) -> TrainedModel:
    """
    데이터셋으로 표준화 통계를 만들고 학습기를 학습한다.

    Raises:
        TrainingError: 학습 데이터가 비었거나 필요한 클래스가 없을 때, 학습 발산
    """
    if len(dataset) == 0:
        raise TrainingError("학습 데이터셋이 비어 있습니다")
    X_raw = dataset.matrix()
    try:
        y = task.encode(dataset.labels())
    except ValueError as e:
        raise TrainingError(str(e)) from e
    standardizer = standardizer or fit_standardizer(X_raw)
    learner = fit_learner(kind, standardizer.apply(X_raw), y, task, hp, seed)
    scenarios = sorted({cfg.scenario_id for cfg in dataset.provenance})
    logger.info(
        "%s/%s 학습 완료: %d행, 하이퍼파라미터 %s",
        ModelKind(kind).value, task.mode.value, len(dataset), hp.model_dump(exclude_none=True),
    )
    return TrainedModel(
        kind=ModelKind(kind),
        task=task,
        hyperparameters=hp,
        standardizer=standardizer,
        learner=learner,
        sampling_interval=dataset.sampling_interval,
        seed=seed,
        training_scenarios=scenarios,
    )


def save_model(model: TrainedModel, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)


def load_model(path: str) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"지원하지 않는 모델 파일 형식: {data.get('format_version')}")
    return TrainedModel.from_dict(data)
