import math

import numpy as np
import pytest

from classifiers import TrainingError
from svm import (
    BinarySvm,
    KernelRows,
    SvmModel,
    gaussian_kernel_matrix,
    kernel_eval,
    kernel_prefactor,
    solve_binary_svm,
    train_binary_svm,
    train_svm,
)


def test_kernel_values():
    assert kernel_eval([1.0, 2.0], [1.0, 2.0], 1.0) == pytest.approx(0.398942, abs=1e-6)
    assert kernel_eval([0.0, 0.0], [3.0, 4.0], 5.0) == pytest.approx(1 / (math.sqrt(2 * math.pi) * 5.0) * math.exp(-1))
    assert kernel_eval([0.0], [10.0], 10.0) == pytest.approx(0.014673, abs=1e-6)


def test_kernel_matrix_matches_pointwise():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    K = gaussian_kernel_matrix(A, B, 2.0)
    assert K.shape == (4, 5)
    assert K[2, 3] == pytest.approx(kernel_eval(A[2], B[3], 2.0))


def test_kernel_row_cache_evicts_oldest():
    X = np.arange(10, dtype=float).reshape(5, 2)
    rows = KernelRows(X, 1.0, True, capacity=2)
    rows.row(0)
    rows.row(1)
    rows.row(0)
    rows.row(2)
    rows.row(1)
    assert (rows.hits, rows.misses) == (1, 4)


def test_two_points_midpoint_is_on_the_boundary():
    X = np.array([[0.0, 0.0], [2.0, 0.0]])
    machine = train_binary_svm(X, np.array([1.0, -1.0]), sigma=1.0, c=10.0)
    assert len(machine.coefficients) == 2
    assert machine.rho == pytest.approx(0.0, abs=1e-12)
    assert machine.decision(np.array([[1.0, 0.0]]), 1.0)[0] == pytest.approx(0.0, abs=1e-12)
    d = machine.decision(X, 1.0)
    assert d[0] > 0.0 > d[1]


def _separable(n=30, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2.0, 0.4, (n, 2)), rng.normal(2.0, 0.4, (n, 2))])
    y = np.array([1.0] * n + [-1.0] * n)
    return X, y


def test_dual_constraints_hold():
    X, y = _separable()
    c = 5.0
    result = solve_binary_svm(X, y, sigma=1.0, c=c)
    assert np.all(result.alpha >= 0.0) and np.all(result.alpha <= c)
    assert abs(float(result.alpha @ y)) < 1e-6
    assert result.residual < 1e-3


def test_separable_set_has_zero_training_error():
    X, y = _separable(seed=1)
    labels = (y < 0).astype(int)
    model = train_svm(X, labels, ("normal", "attack"), sigma=1.0, c=1000.0)
    assert np.array_equal(model.predict_indices(X), labels)


def test_iteration_limit_raises():
    X, y = _separable(seed=2)
    with pytest.raises(TrainingError, match="KKT"):
        solve_binary_svm(X, y, sigma=1.0, c=1000.0, max_iter=1)


def test_one_vs_one_three_classes():
    rng = np.random.default_rng(3)
    centers = [(-4.0, 0.0), (4.0, 0.0), (0.0, 5.0)]
    X = np.vstack([rng.normal(c, 0.5, (15, 2)) for c in centers])
    y = np.repeat([0, 1, 2], 15)
    model = train_svm(X, y, ("a", "b", "c"), sigma=2.0, c=10.0)
    assert len(model.machines) == 3
    assert np.array_equal(model.predict_indices(X), y)
    assert model.predict_scores(X).sum(axis=1).tolist() == [3.0] * len(X)


def test_vote_tie_breaks_on_margin_sum():
    model = SvmModel(n_classes=3, n_features=1, sigma=1.0, c=1.0)
    # 서포트 벡터 없는 기계: 결정값 = -rho. 득표 1:1:1, 마진 합 0.3 / -0.2 / -0.1
    for a, b, rho in ((0, 1, -0.5), (0, 2, 0.2), (1, 2, -0.3)):
        model.machines.append(BinarySvm(a, b, np.zeros((0, 1)), np.zeros(0), rho=rho))
    x = np.zeros((1, 1))
    assert model.predict_scores(x).tolist() == [[1.0, 1.0, 1.0]]
    assert model.predict_indices(x).tolist() == [0]

def test_missing_class_raises():
    X, y = _separable()
    with pytest.raises(TrainingError, match="'c'"):
        train_svm(X, (y < 0).astype(int), ("a", "b", "c"), sigma=1.0, c=1.0)


def test_normalizing_constant_is_absorbed_by_c():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(-0.5, 1.0, (25, 2)), rng.normal(0.5, 1.0, (25, 2))])
    y = np.repeat([0, 1], 25)
    sigma, c = 1.5, 10.0
    scaled = train_svm(X, y, ("normal", "attack"), sigma, c)
    raw = train_svm(X, y, ("normal", "attack"), sigma, c * kernel_prefactor(sigma), normalized=False)
    grid = rng.normal(0.0, 1.5, (40, 2))
    assert np.allclose(scaled.decision_values(grid), raw.decision_values(grid), rtol=1e-6, atol=1e-9)
    assert np.array_equal(scaled.predict_indices(grid), raw.predict_indices(grid))
