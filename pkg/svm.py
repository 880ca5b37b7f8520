"""
가우시안 커널 soft-margin SVM, SMO(2차 작업 집합 선택) 솔버, one-vs-one 다중 분류.

커널: k(x, x') = 1 / (sqrt(2π) σ) · exp(-||x - x'||² / σ²)
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics.pairwise import euclidean_distances

from classifiers import TrainingError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-3
SUPPORT_THRESHOLD = 1e-8
# 2차 선택에서 곡률이 0 이하일 때 쓰는 값
TAU = 1e-12
CACHE_BYTES = 256 * 1024 * 1024


def kernel_prefactor(sigma: float, normalized: bool = True) -> float:
    return 1.0 / (math.sqrt(2 * math.pi) * sigma) if normalized else 1.0


def kernel_eval(xi: Sequence[float], xj: Sequence[float], sigma: float, normalized: bool = True) -> float:
    sq = float(np.sum((np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)) ** 2))
    return kernel_prefactor(sigma, normalized) * math.exp(-sq / sigma**2)


def gaussian_kernel_matrix(A: np.ndarray, B: np.ndarray, sigma: float, normalized: bool = True) -> np.ndarray:
    sq = euclidean_distances(np.atleast_2d(A), np.atleast_2d(B), squared=True)
    return kernel_prefactor(sigma, normalized) * np.exp(-sq / sigma**2)


class KernelRows:
    """커널 행 LRU 캐시."""

    def __init__(self, X: np.ndarray, sigma: float, normalized: bool, capacity: Optional[int] = None):
        self.X = X
        self.sigma = sigma
        self.normalized = normalized
        n = max(len(X), 1)
        self.capacity = capacity if capacity is not None else max(2, CACHE_BYTES // (8 * n))
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        row = gaussian_kernel_matrix(self.X[i], self.X, self.sigma, self.normalized)[0]
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


@dataclass
class SolverResult:
    alpha: np.ndarray
    rho: float
    residual: float
    iterations: int


def _kkt_residual(y: np.ndarray, G: np.ndarray, alpha: np.ndarray, c: float) -> Tuple[float, int, float]:
    """(Gmax - Gmin, i, Gmax). i 는 위반 쌍의 첫 인덱스 (-1 이면 후보 없음)."""
    minus_yG = -y * G
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    if not up.any() or not low.any():
        return 0.0, -1, -math.inf
    masked = np.where(up, minus_yG, -np.inf)
    i = int(np.argmax(masked))
    g_max = masked[i]
    g_min = float(np.min(minus_yG[low]))
    return float(g_max - g_min), i, float(g_max)


def _compute_rho(y: np.ndarray, G: np.ndarray, alpha: np.ndarray, c: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(np.mean(yG[free]))
    upper = alpha >= c
    lower = alpha <= 0
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = float(np.min(yG[ub_mask])) if ub_mask.any() else math.inf
    lb = float(np.max(yG[lb_mask])) if lb_mask.any() else -math.inf
    return (ub + lb) / 2


def solve_binary_svm(
    X: np.ndarray,
    y: np.ndarray,
    sigma: float,
    c: float,
    tol: float = DEFAULT_TOLERANCE,
    max_iter: Optional[int] = None,
    normalized: bool = True,
) -> SolverResult:
    """
    쌍대 문제 min ½αᵀQα - eᵀα, 0 ≤ α ≤ c, yᵀα = 0 을 SMO 로 푼다.

    Args:
        y: ±1 라벨
    Raises:
        TrainingError: 반복 한도 안에 KKT 잔차가 tol 아래로 내려가지 않으면
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    rows = KernelRows(X, sigma, normalized)
    diag = np.full(n, kernel_prefactor(sigma, normalized))
    alpha = np.zeros(n)
    G = -np.ones(n)

    iterations = 0
    residual, i, g_max = _kkt_residual(y, G, alpha, c)
    while residual >= tol:
        if iterations >= max_iter:
            raise TrainingError(f"SMO 가 {max_iter}회 안에 수렴하지 않았습니다 (KKT 잔차 {residual:.3e})")
        K_i = rows.row(i)
        minus_yG = -y * G
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        b = g_max - minus_yG
        candidates = low & (b > 0)
        if not candidates.any():
            break
        a = diag[i] + diag - 2.0 * K_i
        a = np.where(a > 0, a, TAU)
        objective = np.where(candidates, -(b * b) / a, np.inf)
        j = int(np.argmin(objective))
        K_j = rows.row(j)

        old_ai, old_aj = alpha[i], alpha[j]
        Q_ij = y[i] * y[j] * K_i[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2 * Q_ij
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            elif alpha[j] > c:
                alpha[j] = c
                alpha[i] = c + diff
        else:
            quad = diag[i] + diag[j] - 2 * Q_ij
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
            elif alpha[j] < 0:
                alpha[j] = 0
                alpha[i] = total
            if total > c:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = total

        d_i = alpha[i] - old_ai
        d_j = alpha[j] - old_aj
        G += y * (y[i] * K_i * d_i + y[j] * K_j * d_j)
        iterations += 1
        residual, i, g_max = _kkt_residual(y, G, alpha, c)

    logger.debug(
        "SMO 종료: n=%d 반복 %d 잔차 %.3e 캐시 적중 %d/%d",
        n, iterations, residual, rows.hits, rows.hits + rows.misses,
    )
    return SolverResult(alpha, _compute_rho(y, G, alpha, c), residual, iterations)


@dataclass
class BinarySvm:
    positive: int
    negative: int
    support_vectors: np.ndarray  # (m, d)
    coefficients: np.ndarray  # α_i y_i
    rho: float
    residual: float = 0.0
    iterations: int = 0

    def decision(self, X: np.ndarray, sigma: float, normalized: bool = True) -> np.ndarray:
        """양수면 positive 클래스."""
        if len(self.coefficients) == 0:
            return np.full(len(X), -self.rho)
        K = gaussian_kernel_matrix(X, self.support_vectors, sigma, normalized)
        return K @ self.coefficients - self.rho

    def to_dict(self) -> dict:
        return {
            "positive": self.positive,
            "negative": self.negative,
            "support_vectors": self.support_vectors.tolist(),
            "coefficients": self.coefficients.tolist(),
            "rho": self.rho,
            "residual": self.residual,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinarySvm":
        count = len(data["coefficients"])
        vectors = np.asarray(data["support_vectors"], dtype=float)
        return cls(
            int(data["positive"]),
            int(data["negative"]),
            vectors.reshape(count, -1) if count else np.zeros((0, 0)),
            np.asarray(data["coefficients"], dtype=float),
            float(data["rho"]),
            float(data.get("residual", 0.0)),
            int(data.get("iterations", 0)),
        )


def train_binary_svm(
    X: np.ndarray,
    y_pm: np.ndarray,
    sigma: float,
    c: float,
    positive: int = 0,
    negative: int = 1,
    tol: float = DEFAULT_TOLERANCE,
    normalized: bool = True,
    max_iter: Optional[int] = None,
) -> BinarySvm:
    result = solve_binary_svm(X, y_pm, sigma, c, tol=tol, max_iter=max_iter, normalized=normalized)
    support = result.alpha > SUPPORT_THRESHOLD
    return BinarySvm(
        positive=positive,
        negative=negative,
        support_vectors=np.asarray(X, dtype=float)[support],
        coefficients=result.alpha[support] * np.asarray(y_pm, dtype=float)[support],
        rho=result.rho,
        residual=result.residual,
        iterations=result.iterations,
    )


@dataclass
class SvmModel:
    n_classes: int
    n_features: int
    sigma: float
    c: float
    machines: List[BinarySvm] = field(default_factory=list)
    normalized: bool = True

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.machines:
            return np.zeros((len(X), 0))
        return np.stack([m.decision(X, self.sigma, self.normalized) for m in self.machines], axis=1)

    def _votes(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values = self.decision_values(X)
        votes = np.zeros((values.shape[0], self.n_classes))
        margins = np.zeros_like(votes)
        for col, m in enumerate(self.machines):
            v = values[:, col]
            votes[:, m.positive] += v > 0
            votes[:, m.negative] += v <= 0
            margins[:, m.positive] += v
            margins[:, m.negative] -= v
        return votes, margins

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return self._votes(X)[0]

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        """득표 최다 → 결정값 합 최대 → 라벨 순서 앞쪽."""
        votes, margins = self._votes(X)
        top = votes == votes.max(axis=1, keepdims=True)
        return np.argmax(np.where(top, margins, -np.inf), axis=1)

    @property
    def support_vector_count(self) -> int:
        return sum(len(m.coefficients) for m in self.machines)

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "sigma": self.sigma,
            "c": self.c,
            "normalized": self.normalized,
            "machines": [m.to_dict() for m in self.machines],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SvmModel":
        return cls(
            int(data["n_classes"]),
            int(data["n_features"]),
            float(data["sigma"]),
            float(data["c"]),
            [BinarySvm.from_dict(m) for m in data["machines"]],
            bool(data.get("normalized", True)),
        )


def train_svm(
    X: np.ndarray,
    y: np.ndarray,
    classes: Sequence[str],
    sigma: float,
    c: float,
    tol: float = DEFAULT_TOLERANCE,
    normalized: bool = True,
) -> SvmModel:
    """클래스 쌍마다 이진 SVM 을 학습한다 (one-vs-one)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    for index, name in enumerate(classes):
        if not np.any(y == index):
            raise TrainingError(f"클래스 '{name}' 의 학습 행이 없습니다")
    model = SvmModel(len(classes), X.shape[1], sigma, c, normalized=normalized)
    for a, b in combinations(range(len(classes)), 2):
        mask = (y == a) | (y == b)
        y_pm = np.where(y[mask] == a, 1.0, -1.0)
        model.machines.append(train_binary_svm(X[mask], y_pm, sigma, c, a, b, tol=tol, normalized=normalized))
    logger.debug("SVM 학습 완료: σ=%g c=%g 서포트 벡터 %d개", sigma, c, model.support_vector_count)
    return model
