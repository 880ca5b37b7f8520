"""
클래스별 대각 공분산 가우시안 혼합(GMM) 분류기, EM 학습.

p(x | y) = Σ_k π_k N(x | μ_k, diag(σ²_k))
P(y | x) ∝ p(x | y) P(y)

components == 1 이면 Naive Bayes 와 같다. Naive Bayes 의 닫힌 해는 책임도를 모두 1 로 둔
같은 M-step 으로 계산하므로 GMM(ng=1) 과 비트 단위로 같은 모델이 된다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from classifiers import TrainingError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR_RATIO = 1e-6
VARIANCE_FLOOR_MIN = 1e-9
# 이보다 작은 유효 개수의 성분은 비었다고 보고 이전 파라미터를 유지
EMPTY_COMPONENT = 1e-10


def variance_floor(X: np.ndarray) -> np.ndarray:
    """특성별 분산 하한: 1e-6 x 학습 데이터 분산, 최소 1e-9."""
    return np.maximum(VARIANCE_FLOOR_RATIO * np.var(X, axis=0), VARIANCE_FLOOR_MIN)


@dataclass
class ClassMixture:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d)
    log_likelihood_history: List[float] = field(default_factory=list)

    @property
    def components(self) -> int:
        return len(self.weights)

    def component_log_density(self, X: np.ndarray) -> np.ndarray:
        """(n, k) log π_k + log N(x | μ_k, σ²_k)."""
        d = X.shape[1]
        log_det = np.sum(np.log(self.variances), axis=1)
        maha = np.stack(
            [np.sum((X - mu) ** 2 / var, axis=1) for mu, var in zip(self.means, self.variances)],
            axis=1,
        )
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return log_w[None, :] - 0.5 * (d * np.log(2 * np.pi) + log_det[None, :] + maha)

    def log_likelihood(self, X: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_log_density(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_likelihood_history": list(self.log_likelihood_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassMixture":
        return cls(
            np.asarray(data["weights"], dtype=float),
            np.asarray(data["means"], dtype=float),
            np.asarray(data["variances"], dtype=float),
            list(data.get("log_likelihood_history", [])),
        )


def m_step(
    X: np.ndarray,
    resp: np.ndarray,
    floor: np.ndarray,
    previous: Optional[ClassMixture] = None,
) -> ClassMixture:
    """책임도 resp (n, k) 로 가중치/평균/분산을 다시 추정한다."""
    n = X.shape[0]
    nk = resp.sum(axis=0)
    weights = nk / n
    k, d = resp.shape[1], X.shape[1]
    means = np.zeros((k, d))
    variances = np.zeros((k, d))
    for j in range(k):
        if nk[j] < EMPTY_COMPONENT and previous is not None:
            means[j] = previous.means[j]
            variances[j] = previous.variances[j]
            continue
        means[j] = (resp[:, j] @ X) / nk[j]
        variances[j] = np.maximum((resp[:, j] @ (X - means[j]) ** 2) / nk[j], floor)
    return ClassMixture(weights, means, variances)


def e_step(mixture: ClassMixture, X: np.ndarray) -> Tuple[np.ndarray, float]:
    """(책임도, 전체 로그우도)."""
    log_prob = mixture.component_log_density(X)
    lse = logsumexp(log_prob, axis=1, keepdims=True)
    return np.exp(log_prob - lse), float(np.sum(lse))


def distinct_row_count(X: np.ndarray) -> int:
    return len(np.unique(X, axis=0))


def _initial_resp(X: np.ndarray, components: int, seed: int) -> np.ndarray:
    """k-means++ 초기 할당. 빈 군집은 버린다 (열 수가 components 보다 적을 수 있음)."""
    if components == 1:
        return np.ones((len(X), 1))
    km = KMeans(n_clusters=components, init="k-means++", n_init=1, random_state=seed % 2**32).fit(X)
    used = np.unique(km.labels_)
    resp = np.zeros((len(X), len(used)))
    resp[np.arange(len(X)), np.searchsorted(used, km.labels_)] = 1.0
    return resp


def _check_finite(mixture: ClassMixture) -> None:
    for name in ("weights", "means", "variances"):
        if not np.all(np.isfinite(getattr(mixture, name))):
            raise TrainingError(f"EM 파라미터 {name} 에 유한하지 않은 값이 있습니다")
    if not np.all(np.isfinite(mixture.log_likelihood_history)):
        raise TrainingError("EM 로그우도가 유한하지 않습니다")


def fit_class_mixture(
    X: np.ndarray,
    components: int,
    iterations: int,
    threshold: float,
    floor: np.ndarray,
    seed: int,
) -> ClassMixture:
    """
    한 클래스 행들에 EM 을 돌린다.

    iterations 번 반복하거나 로그우도의 상대 개선이 threshold 보다 작아지면 멈춘다.
    """
    mixture = m_step(X, _initial_resp(X, components, seed), floor)
    history: List[float] = []
    previous_ll: Optional[float] = None
    for _ in range(iterations):
        resp, ll = e_step(mixture, X)
        history.append(ll)
        if previous_ll is not None and (ll - previous_ll) < threshold * abs(previous_ll):
            break
        previous_ll = ll
        mixture = m_step(X, resp, floor, previous=mixture)
    mixture.log_likelihood_history = history
    _check_finite(mixture)
    return mixture


@dataclass
class GmmModel:
    priors: np.ndarray  # (C,)
    mixtures: List[ClassMixture]
    floor: np.ndarray
    reductions: Dict[int, int] = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.mixtures[0].means.shape[1]

    def class_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.stack([m.log_likelihood(X) for m in self.mixtures], axis=1)

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        """사후확률 P(y | x) (n, C)."""
        with np.errstate(divide="ignore"):
            joint = self.class_log_likelihood(X) + np.log(self.priors)[None, :]
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "floor": self.floor.tolist(),
            "mixtures": [m.to_dict() for m in self.mixtures],
            "reductions": {str(k): v for k, v in self.reductions.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmModel":
        return cls(
            np.asarray(data["priors"], dtype=float),
            [ClassMixture.from_dict(m) for m in data["mixtures"]],
            np.asarray(data["floor"], dtype=float),
            {int(k): int(v) for k, v in data.get("reductions", {}).items()},
        )


def _class_rows(X: np.ndarray, y: np.ndarray, classes: Sequence[str]) -> List[np.ndarray]:
    groups = []
    for index, name in enumerate(classes):
        rows = X[y == index]
        if len(rows) == 0:
            raise TrainingError(f"클래스 '{name}' 의 학습 행이 없습니다")
        groups.append(rows)
    return groups


def train_gmm(
    X: np.ndarray,
    y: np.ndarray,
    classes: Sequence[str],
    components: int,
    iterations: int,
    threshold: float,
    seed: int,
) -> GmmModel:
    """
    클래스마다 GMM 을 학습한다.

    Args:
        components: ng (클래스 행 수보다 많으면 행 수로 줄이고 기록)
        iterations: T
        threshold: θ (상대 로그우도 개선 기준)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    groups = _class_rows(X, y, classes)
    floor = variance_floor(X)
    mixtures = []
    reductions: Dict[int, int] = {}
    for index, rows in enumerate(groups):
        distinct = distinct_row_count(rows)
        mixture = fit_class_mixture(rows, min(components, distinct), iterations, threshold, floor, seed)
        if mixture.components < components:
            reductions[index] = mixture.components
            logger.warning(
                "클래스 '%s': 서로 다른 행 %d개 (전체 %d행) < ng=%d, 성분 수를 %d 로 줄임",
                classes[index], distinct, len(rows), components, mixture.components,
            )
        mixtures.append(mixture)
    priors = np.array([len(rows) for rows in groups], dtype=float) / len(X)
    return GmmModel(priors, mixtures, floor, reductions)


def train_naive_bayes(X: np.ndarray, y: np.ndarray, classes: Sequence[str]) -> GmmModel:
    """클래스별 평균/분산 닫힌 해 (성분 하나)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    groups = _class_rows(X, y, classes)
    floor = variance_floor(X)
    mixtures = []
    for rows in groups:
        mixture = m_step(rows, np.ones((len(rows), 1)), floor)
        _, ll = e_step(mixture, rows)
        mixture.log_likelihood_history = [ll]
        mixtures.append(mixture)
    priors = np.array([len(rows) for rows in groups], dtype=float) / len(X)
    return GmmModel(priors, mixtures, floor)
