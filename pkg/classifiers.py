"""
분류기 공통 타입: 모델 종류, 라벨 작업(이진/다중), 하이퍼파라미터, 예측.

학습기 구현은 mlp.py / gmm.py / svm.py, 학습된 모델 묶음은 trained_model.py 에 있다.
학습기 모델 객체는 모두 predict_scores(X), predict_indices(X), n_features 를 제공한다.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from feature_pipeline import LABEL_ORDER, Label


class TrainingError(RuntimeError):
    """학습이 발산했거나(비유한 손실) 수렴하지 못했을 때."""


class ModelKind(str, Enum):
    MLP = "mlp"
    LINEAR = "linear"
    GMM = "gmm"
    NAIVE_BAYES = "naive_bayes"
    SVM = "svm"


class TaskMode(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


ATTACK_CLASS = "attack"


@dataclass(frozen=True)
class LabelTask:
    """
    원본 라벨(5종)을 학습 클래스로 옮기는 규칙.

    BINARY: normal → "normal", 나머지 → "attack"
    MULTICLASS: 5개 라벨 그대로 (LABEL_ORDER 순서)
    classes 를 직접 주면 그 부분집합만 학습한다 (예: 정상 한 클래스).
    """

    mode: TaskMode
    classes: Tuple[str, ...]

    @classmethod
    def binary(cls) -> "LabelTask":
        return cls(TaskMode.BINARY, (Label.NORMAL.value, ATTACK_CLASS))

    @classmethod
    def multiclass(cls) -> "LabelTask":
        return cls(TaskMode.MULTICLASS, tuple(label.value for label in LABEL_ORDER))

    @classmethod
    def for_mode(cls, mode: Union[TaskMode, str]) -> "LabelTask":
        return cls.binary() if TaskMode(mode) is TaskMode.BINARY else cls.multiclass()

    def restricted_to(self, labels: Iterable[Union[Label, str]]) -> "LabelTask":
        """학습 데이터에 실제로 있는 클래스만 남긴다 (순서 유지)."""
        present = {self.map_label(label) for label in labels}
        return LabelTask(self.mode, tuple(c for c in self.classes if c in present))

    def map_label(self, label: Union[Label, str]) -> str:
        value = Label(label).value
        if self.mode is TaskMode.BINARY:
            return Label.NORMAL.value if value == Label.NORMAL.value else ATTACK_CLASS
        return value

    def encode(self, labels: Iterable[Union[Label, str]]) -> np.ndarray:
        mapped = [self.map_label(label) for label in labels]
        unknown = sorted(set(mapped) - set(self.classes))
        if unknown:
            raise ValueError(f"작업 클래스에 없는 라벨: {unknown}")
        index = {name: i for i, name in enumerate(self.classes)}
        return np.array([index[m] for m in mapped], dtype=np.int64)

    def decode(self, indices: Iterable[int]) -> list:
        return [self.classes[int(i)] for i in indices]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, data: dict) -> "LabelTask":
        return cls(TaskMode(data["mode"]), tuple(data["classes"]))


class Hyperparameters(BaseModel):
    """
    모델 종류별로 쓰는 값만 채운다.

    MLP/linear: learning_rate, iterations, hidden_units
    GMM/naive bayes: threshold, iterations, components
    SVM: sigma, c
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: Optional[float] = Field(None, gt=0)
    iterations: Optional[int] = Field(None, ge=1)
    hidden_units: Optional[int] = Field(None, ge=0)
    threshold: Optional[float] = Field(None, gt=0)
    components: Optional[int] = Field(None, ge=1)
    sigma: Optional[float] = Field(None, gt=0)
    c: Optional[float] = Field(None, gt=0)

    def sort_key(self, kind: ModelKind) -> tuple:
        """동률일 때 더 작은 값을 고르기 위한 키."""
        if kind in (ModelKind.MLP, ModelKind.LINEAR):
            return (self.learning_rate, self.iterations, self.hidden_units)
        if kind in (ModelKind.GMM, ModelKind.NAIVE_BAYES):
            return (self.threshold or 0.0, self.iterations or 0, self.components)
        return (self.sigma, self.c)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"하이퍼파라미터 누락: {missing}")


def default_hyperparameters(kind: ModelKind) -> Hyperparameters:
    kind = ModelKind(kind)
    if kind is ModelKind.MLP:
        return Hyperparameters(learning_rate=0.01, iterations=100, hidden_units=20)
    if kind is ModelKind.LINEAR:
        return Hyperparameters(learning_rate=0.01, iterations=100, hidden_units=0)
    if kind is ModelKind.GMM:
        return Hyperparameters(threshold=1e-3, iterations=100, components=20)
    if kind is ModelKind.NAIVE_BAYES:
        return Hyperparameters(components=1)
    return Hyperparameters(sigma=10.0, c=10.0)


class Prediction(NamedTuple):
    label: str
    scores: np.ndarray


def predict(model, x: Sequence[float], classes: Optional[Sequence[str]] = None) -> Prediction:
    """
    특성 벡터 하나를 분류한다.

    Args:
        model: 학습기 모델 (MlpModel, GmmModel, SvmModel)
        x: 표준화된 특성 벡터
        classes: 클래스 이름. None 이면 인덱스 문자열

    Returns:
        (예측 라벨, 클래스별 점수: MLP/GMM 은 확률, SVM 은 득표수)
    """
    row = np.asarray(x, dtype=float)
    if row.ndim != 1 or row.shape[0] != model.n_features:
        raise ValueError(f"특성 차원 불일치: 입력 {row.shape}, 모델 {model.n_features}")
    X = row[None, :]
    index = int(model.predict_indices(X)[0])
    scores = model.predict_scores(X)[0]
    label = classes[index] if classes is not None else str(index)
    return Prediction(label, scores)
