"""
tanh 은닉층 하나 + softmax 출력 MLP, cross-entropy 손실, 미니배치 SGD.

hidden_units == 0 이면 은닉층 없는 선형 softmax 분류기(같은 코드 경로).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from classifiers import TrainingError

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 32


@dataclass
class MlpModel:
    hidden_weights: Optional[np.ndarray]  # (d, nh), 선형 모델이면 None
    hidden_bias: Optional[np.ndarray]  # (nh,)
    output_weights: np.ndarray  # (nh 또는 d, C)
    output_bias: np.ndarray  # (C,)
    loss_history: List[float] = field(default_factory=list)

    @property
    def hidden_units(self) -> int:
        return 0 if self.hidden_weights is None else self.hidden_weights.shape[1]

    @property
    def n_features(self) -> int:
        if self.hidden_weights is not None:
            return self.hidden_weights.shape[0]
        return self.output_weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.output_weights.shape[1]

    def forward(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(은닉 활성값, 출력 logit). 선형 모델의 은닉 활성값은 입력 그대로."""
        if self.hidden_weights is None:
            Z = X
        else:
            Z = np.tanh(X @ self.hidden_weights + self.hidden_bias)
        return Z, Z @ self.output_weights + self.output_bias

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        _, logits = self.forward(np.asarray(X, dtype=float))
        return softmax(logits, axis=1)

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_scores(X), axis=1)

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {"output_weights": self.output_weights, "output_bias": self.output_bias}
        if self.hidden_weights is not None:
            params["hidden_weights"] = self.hidden_weights
            params["hidden_bias"] = self.hidden_bias
        return params

    def to_dict(self) -> dict:
        data = {name: value.tolist() for name, value in self.parameters().items()}
        data["loss_history"] = list(self.loss_history)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "MlpModel":
        def arr(name):
            return np.asarray(data[name], dtype=float) if name in data else None

        return cls(
            hidden_weights=arr("hidden_weights"),
            hidden_bias=arr("hidden_bias"),
            output_weights=arr("output_weights"),
            output_bias=arr("output_bias"),
            loss_history=list(data.get("loss_history", [])),
        )


def init_mlp(n_features: int, n_classes: int, hidden_units: int, rng: np.random.Generator) -> MlpModel:
    if hidden_units == 0:
        return MlpModel(None, None, np.zeros((n_features, n_classes)), np.zeros(n_classes))
    return MlpModel(
        hidden_weights=rng.normal(0.0, 1.0 / np.sqrt(n_features), (n_features, hidden_units)),
        hidden_bias=np.zeros(hidden_units),
        output_weights=rng.normal(0.0, 1.0 / np.sqrt(hidden_units), (hidden_units, n_classes)),
        output_bias=np.zeros(n_classes),
    )


def cross_entropy(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    _, logits = model.forward(X)
    return float(-np.mean(log_softmax(logits, axis=1)[np.arange(len(y)), y]))


def loss_and_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """평균 cross-entropy 와 모든 파라미터의 해석적 기울기."""
    n = len(y)
    Z, logits = model.forward(X)
    log_p = log_softmax(logits, axis=1)
    loss = float(-np.mean(log_p[np.arange(n), y]))

    delta = np.exp(log_p)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = {
        "output_weights": Z.T @ delta,
        "output_bias": delta.sum(axis=0),
    }
    if model.hidden_weights is not None:
        d_hidden = (delta @ model.output_weights.T) * (1.0 - Z**2)
        grads["hidden_weights"] = X.T @ d_hidden
        grads["hidden_bias"] = d_hidden.sum(axis=0)
    return loss, grads


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    classes: Sequence[str],
    learning_rate: float,
    epochs: int,
    hidden_units: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MlpModel:
    """
    미니배치 SGD 학습.

    Args:
        X: 표준화된 특성 (n, d)
        y: 클래스 인덱스 (n,)
        classes: 클래스 이름 (출력 차원)
        learning_rate: η
        epochs: T (에폭 수)
        hidden_units: nh (0 이면 선형)
        seed: 초기화/셔플 시드

    Raises:
        TrainingError: 손실이 NaN/inf 가 되면 (에폭 번호 포함)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise TrainingError("학습 데이터가 비어 있습니다")
    rng = np.random.default_rng(seed)
    model = init_mlp(X.shape[1], len(classes), hidden_units, rng)
    params = model.parameters()

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, epochs + 1):
            order = rng.permutation(len(X))
            for start in range(0, len(X), batch_size):
                batch = order[start : start + batch_size]
                _, grads = loss_and_gradients(model, X[batch], y[batch])
                for name, value in params.items():
                    value -= learning_rate * grads[name]
            loss = cross_entropy(model, X, y)
            if not np.isfinite(loss):
                raise TrainingError(f"에폭 {epoch} 에서 손실이 발산했습니다 (loss={loss})")
            model.loss_history.append(loss)

    logger.debug(
        "MLP 학습 완료: nh=%d η=%g T=%d 최종 손실 %.6f", hidden_units, learning_rate, epochs, model.loss_history[-1]
    )
    return model


def train_linear(
    X: np.ndarray,
    y: np.ndarray,
    classes: Sequence[str],
    learning_rate: float,
    epochs: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MlpModel:
    return train_mlp(X, y, classes, learning_rate, epochs, 0, seed, batch_size)
