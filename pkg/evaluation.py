"""
평가: 분류 오류, 혼동 행렬, 탐지율(DR)/오경보율(FA), k-fold 교차검증, 단계별 그리드 탐색.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import KFold

from classifiers import Hyperparameters, LabelTask, ModelKind, TaskMode, TrainingError
from feature_pipeline import ATTACK_LABELS, Dataset, Label, fit_standardizer
from trained_model import TrainedModel, fit_learner

logger = logging.getLogger(__name__)

NORMAL = Label.NORMAL.value


class SearchError(RuntimeError):
    """모든 그리드 후보가 실패했을 때."""


# ---------------------------------------------------------------------- #
# 지표
# ---------------------------------------------------------------------- #
def classification_error(predictions: Sequence[str], labels: Sequence[str]) -> float:
    """틀린 예측 비율. 두 목록 길이가 다르거나 비어 있으면 ValueError."""
    if len(predictions) != len(labels):
        raise ValueError(f"길이 불일치: 예측 {len(predictions)}, 라벨 {len(labels)}")
    if len(labels) == 0:
        raise ValueError("빈 라벨 목록으로 오류율을 계산할 수 없습니다")
    wrong = sum(p != t for p, t in zip(predictions, labels))
    return wrong / len(labels)


@dataclass(frozen=True)
class ConfusionMatrix:
    """행 = 실제 클래스, 열 = 예측 클래스."""

    classes: Tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_labels(cls, true: Sequence[str], predicted: Sequence[str], classes: Sequence[str]) -> "ConfusionMatrix":
        if len(true) != len(predicted):
            raise ValueError(f"길이 불일치: 실제 {len(true)}, 예측 {len(predicted)}")
        if len(true) == 0:
            return cls(tuple(classes), np.zeros((len(classes), len(classes)), dtype=np.int64))
        unknown = sorted(set(true) - set(classes)) + sorted(set(predicted) - set(classes) - set(true))
        if unknown:
            raise ValueError(f"클래스 목록 {list(classes)} 에 없는 라벨: {unknown}")
        counts = confusion_matrix(list(true), list(predicted), labels=list(classes))
        return cls(tuple(classes), counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def errors(self) -> int:
        return int(self.total - np.trace(self.counts))

    def error_rate(self) -> float:
        return self.errors / self.total if self.total else 0.0

    def index(self, name: str) -> int:
        return self.classes.index(name)

    def to_dict(self) -> dict:
        return {"classes": list(self.classes), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ConfusionMatrix":
        return cls(tuple(data["classes"]), np.asarray(data["counts"], dtype=np.int64))


def detection_metrics(matrix: ConfusionMatrix) -> Tuple[Optional[float], Optional[float]]:
    """
    (DR, FA).

    DR = TP / (TP + FN), FA = FP / (TN + FP). normal 이 아닌 예측은 모두 탐지로 본다.
    분모가 0 이면 해당 지표는 None.
    """
    normal = matrix.index(NORMAL)
    attacks = [i for i in range(len(matrix.classes)) if i != normal]
    counts = matrix.counts
    tp = int(counts[np.ix_(attacks, attacks)].sum())
    fn = int(counts[attacks, normal].sum())
    fp = int(counts[normal, attacks].sum())
    tn = int(counts[normal, normal])
    dr = tp / (tp + fn) if tp + fn else None
    fa = fp / (tn + fp) if tn + fp else None
    return dr, fa


def per_attack_dr(matrix: ConfusionMatrix) -> Dict[str, float]:
    """다중 분류 행렬의 공격 라벨별 DR. 테스트에 없는 공격은 키가 없다."""
    normal = matrix.index(NORMAL)
    result = {}
    for i, name in enumerate(matrix.classes):
        if i == normal:
            continue
        row = matrix.counts[i]
        if row.sum() == 0:
            continue
        result[name] = float((row.sum() - row[normal]) / row.sum())
    return result


def per_attack_dr_from_slices(true_labels: Sequence[str], predicted: Sequence[str]) -> Dict[str, float]:
    """원본 공격 라벨로 행을 나눠 각 조각의 DR (이진 모델용)."""
    result = {}
    for attack in ATTACK_LABELS:
        rows = [p for t, p in zip(true_labels, predicted) if t == attack.value]
        if rows:
            result[attack.value] = sum(p != NORMAL for p in rows) / len(rows)
    return result


@dataclass
class EvalReport:
    kind: ModelKind
    mode: TaskMode
    matrix: ConfusionMatrix
    error: float
    detection_rate: Optional[float]
    false_alarm: Optional[float]
    per_attack: Dict[str, float]
    per_attack_source: str
    hyperparameters: Dict[str, float]
    sampling_interval: float
    scenarios: List[str] = field(default_factory=list)
    cell: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_predictions(
        cls,
        model: TrainedModel,
        true_raw: Sequence[str],
        predicted: Sequence[str],
        scenarios: Sequence[str] = (),
        cell: Optional[Dict[str, object]] = None,
    ) -> "EvalReport":
        true_task = [model.task.map_label(t) for t in true_raw]
        matrix = ConfusionMatrix.from_labels(true_task, predicted, model.task.classes)
        dr, fa = detection_metrics(matrix)
        if model.task.mode is TaskMode.MULTICLASS:
            per_attack, source = per_attack_dr(matrix), "matrix"
        else:
            per_attack, source = per_attack_dr_from_slices(true_raw, predicted), "slices"
        return cls(
            kind=model.kind,
            mode=model.task.mode,
            matrix=matrix,
            error=matrix.error_rate(),
            detection_rate=dr,
            false_alarm=fa,
            per_attack=per_attack,
            per_attack_source=source,
            hyperparameters=model.hyperparameters.model_dump(exclude_none=True),
            sampling_interval=model.sampling_interval,
            scenarios=list(scenarios),
            cell=dict(cell or {}),
        )

    def is_consistent(self) -> bool:
        """저장된 DR/FA/오류율이 행렬에서 다시 계산한 값과 같은지."""
        dr, fa = detection_metrics(self.matrix)
        return (dr, fa, self.matrix.error_rate()) == (self.detection_rate, self.false_alarm, self.error)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "mode": self.mode.value,
            "matrix": self.matrix.to_dict(),
            "error": self.error,
            "detection_rate": self.detection_rate,
            "false_alarm": self.false_alarm,
            "per_attack": dict(self.per_attack),
            "per_attack_source": self.per_attack_source,
            "hyperparameters": dict(self.hyperparameters),
            "sampling_interval": self.sampling_interval,
            "scenarios": list(self.scenarios),
            "cell": dict(self.cell),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            kind=ModelKind(data["kind"]),
            mode=TaskMode(data["mode"]),
            matrix=ConfusionMatrix.from_dict(data["matrix"]),
            error=float(data["error"]),
            detection_rate=data.get("detection_rate"),
            false_alarm=data.get("false_alarm"),
            per_attack={k: float(v) for k, v in data.get("per_attack", {}).items()},
            per_attack_source=data.get("per_attack_source", "matrix"),
            hyperparameters=dict(data.get("hyperparameters", {})),
            sampling_interval=float(data["sampling_interval"]),
            scenarios=list(data.get("scenarios", [])),
            cell=dict(data.get("cell", {})),
        )


def evaluate_model(model: TrainedModel, dataset: Dataset, cell: Optional[Dict[str, object]] = None) -> EvalReport:
    """테스트 데이터셋으로 학습된 모델을 평가한다."""
    if abs(model.sampling_interval - dataset.sampling_interval) > 1e-9:
        raise ValueError(
            f"샘플링 구간 불일치: 모델 {model.sampling_interval}, 데이터셋 {dataset.sampling_interval}"
        )
    predicted = model.predict_dataset(dataset)
    true_raw = [label.value for label in dataset.labels()]
    scenarios = sorted({cfg.scenario_id for cfg in dataset.provenance})
    return EvalReport.from_predictions(model, true_raw, predicted, scenarios, cell)


# ---------------------------------------------------------------------- #
# 교차검증 / 그리드 탐색
# ---------------------------------------------------------------------- #
def kfold_split(n_rows: int, k: int = 10, seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """시드로 섞은 k-fold (학습 인덱스, 검증 인덱스) 목록. 앞쪽 n mod k 개 fold 가 한 행씩 더 크다."""
    if k < 2:
        raise ValueError(f"k 는 2 이상이어야 합니다: {k}")
    if n_rows < k:
        raise ValueError(f"행 수({n_rows})가 fold 수({k})보다 적습니다")
    splitter = KFold(n_splits=k, shuffle=True, random_state=seed % 2**32)
    return [(train, val) for train, val in splitter.split(np.arange(n_rows))]


LOG_GRID = [1e-4, 1e-3, 1e-2, 1e-1]
STRUCTURE_GRID = [10, 20, 40, 60, 80, 100, 120, 140, 160, 320]


class GridSpec(BaseModel):
    """모델 종류별 후보 집합. 단계별 탐색 순서는 grid_search 참고."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rates: List[float] = Field(default_factory=lambda: list(LOG_GRID), description="MLP/linear η")
    mlp_iterations: List[int] = Field(default_factory=lambda: [10, 100, 500, 1000], description="MLP/linear T")
    hidden_units: List[int] = Field(default_factory=lambda: list(STRUCTURE_GRID), description="MLP nh")
    thresholds: List[float] = Field(default_factory=lambda: list(LOG_GRID), description="GMM θ")
    gmm_iterations: List[int] = Field(default_factory=lambda: [25, 100, 500, 1000], description="GMM T")
    components: List[int] = Field(default_factory=lambda: list(STRUCTURE_GRID), description="GMM ng")
    sigmas: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0], description="SVM σ")
    cs: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0], description="SVM c")
    folds: int = Field(10, ge=2)
    stage1_hidden_units: int = Field(0, ge=0, description="MLP 1단계에서 고정하는 nh")
    stage1_components: int = Field(20, ge=1, description="GMM 1단계에서 고정하는 ng")

    def reduced(self, iteration_cap: int = 100, structure: Sequence[int] = (10, 20, 40)) -> "GridSpec":
        """반복 수 상한과 작은 구조 후보로 줄인 그리드."""
        return self.model_copy(
            update={
                "mlp_iterations": [t for t in self.mlp_iterations if t <= iteration_cap] or [iteration_cap],
                "gmm_iterations": [t for t in self.gmm_iterations if t <= iteration_cap] or [iteration_cap],
                "hidden_units": list(structure),
                "components": list(structure),
            }
        )


@dataclass
class CandidateScore:
    hyperparameters: Hyperparameters
    stage: int
    fold_errors: List[float] = field(default_factory=list)
    failed: bool = False
    message: str = ""

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.fold_errors)) if self.fold_errors and not self.failed else float("inf")

    def to_record(self) -> dict:
        record = dict(self.hyperparameters.model_dump(exclude_none=True))
        record.update(
            stage=self.stage,
            mean_error=None if self.failed else self.mean_error,
            failed=self.failed,
            message=self.message,
        )
        return record


@dataclass
class SearchResult:
    kind: ModelKind
    best: Hyperparameters
    scores: List[CandidateScore]


def cross_validate(
    kind: ModelKind,
    X: np.ndarray,
    y: np.ndarray,
    task: LabelTask,
    hp: Hyperparameters,
    folds: Sequence[Tuple[np.ndarray, np.ndarray]],
    seed: int,
    stage: int = 1,
) -> CandidateScore:
    """fold 마다 학습 fold 통계로 표준화해 학습/검증한다. 한 fold 라도 실패하면 후보 실격."""
    score = CandidateScore(hp, stage)
    for fold_index, (train, val) in enumerate(folds):
        try:
            standardizer = fit_standardizer(X[train])
            learner = fit_learner(kind, standardizer.apply(X[train]), y[train], task, hp, seed)
            predicted = learner.predict_indices(standardizer.apply(X[val]))
        except (TrainingError, ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
            score.failed = True
            score.message = f"fold {fold_index}: {e}"
            return score
        score.fold_errors.append(float(np.mean(predicted != y[val])))
    return score


def _stage_candidates(kind: ModelKind, grid: GridSpec, stage: int, winner: Optional[Hyperparameters]) -> List[Hyperparameters]:
    if kind in (ModelKind.MLP, ModelKind.LINEAR):
        if stage == 1:
            return [
                Hyperparameters(learning_rate=eta, iterations=t, hidden_units=grid.stage1_hidden_units)
                for eta in grid.learning_rates
                for t in grid.mlp_iterations
            ]
        return [winner.model_copy(update={"hidden_units": nh}) for nh in grid.hidden_units]
    if kind is ModelKind.GMM:
        if stage == 1:
            return [
                Hyperparameters(threshold=theta, iterations=t, components=grid.stage1_components)
                for theta in grid.thresholds
                for t in grid.gmm_iterations
            ]
        return [winner.model_copy(update={"components": ng}) for ng in grid.components]
    if kind is ModelKind.NAIVE_BAYES:
        return [Hyperparameters(components=1)]
    return [Hyperparameters(sigma=s, c=c) for s in grid.sigmas for c in grid.cs]


def _stage_count(kind: ModelKind) -> int:
    return 2 if kind in (ModelKind.MLP, ModelKind.GMM) else 1


def _select(kind: ModelKind, scores: Sequence[CandidateScore]) -> Optional[CandidateScore]:
    valid = [s for s in scores if not s.failed]
    if not valid:
        return None
    return min(valid, key=lambda s: (s.mean_error, s.hyperparameters.sort_key(kind)))


def grid_search(
    kind: ModelKind,
    dataset: Dataset,
    task: LabelTask,
    grid: Optional[GridSpec] = None,
    seed: int = 0,
    jobs: int = 1,
) -> SearchResult:
    """
    평균 k-fold 오류가 가장 작은 하이퍼파라미터를 고른다.

    MLP: 1단계 nh 고정으로 (η, T), 2단계 nh. linear 는 1단계만.
    GMM: 1단계 ng 고정으로 (θ, T), 2단계 ng. SVM: (σ, c) 전체. NB: 후보 하나.
    동률이면 더 작은 값. 후보는 jobs 개 프로세스에서 병렬로 평가한다.

    Raises:
        SearchError: 한 단계의 모든 후보가 실패하면
    """
    kind = ModelKind(kind)
    grid = grid or GridSpec()
    X = dataset.matrix()
    y = task.encode(dataset.labels())
    folds = kfold_split(len(X), grid.folds, seed)

    all_scores: List[CandidateScore] = []
    winner: Optional[Hyperparameters] = None
    for stage in range(1, _stage_count(kind) + 1):
        candidates = _stage_candidates(kind, grid, stage, winner)
        scores = Parallel(n_jobs=jobs)(
            delayed(cross_validate)(kind, X, y, task, hp, folds, seed, stage) for hp in candidates
        )
        for s in scores:
            if s.failed:
                logger.warning("후보 실격 %s: %s", s.hyperparameters.model_dump(exclude_none=True), s.message)
        all_scores.extend(scores)
        best = _select(kind, scores)
        if best is None:
            raise SearchError(f"{kind.value} {stage}단계 후보 {len(candidates)}개가 모두 실패했습니다")
        winner = best.hyperparameters
        logger.info(
            "%s %d단계 선택: %s (평균 오류 %.4f)",
            kind.value, stage, winner.model_dump(exclude_none=True), best.mean_error,
        )
    return SearchResult(kind, winner, all_scores)
