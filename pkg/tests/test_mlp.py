import numpy as np
import pytest

from classifiers import TrainingError
from mlp import init_mlp, loss_and_gradients, train_linear, train_mlp

CLASSES = ("normal", "attack")


def _clouds(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2.0, 0.5, (n, 3)), rng.normal(2.0, 0.5, (n, 3))])
    y = np.array([0] * n + [1] * n)
    return X, y


@pytest.mark.parametrize("hidden_units", [0, 4])
def test_gradients_match_finite_differences(hidden_units):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 3))
    y = np.array([0, 1, 2, 1, 0, 2])
    model = init_mlp(3, 3, hidden_units, rng)
    for value in model.parameters().values():
        value += rng.normal(0.0, 0.3, value.shape)

    _, grads = loss_and_gradients(model, X, y)
    step = 1e-5
    for name, value in model.parameters().items():
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + step
            up, _ = loss_and_gradients(model, X, y)
            value[idx] = original - step
            down, _ = loss_and_gradients(model, X, y)
            value[idx] = original
            numeric[idx] = (up - down) / (2 * step)
        rel = np.abs(grads[name] - numeric) / np.maximum(np.abs(grads[name]) + np.abs(numeric), 1e-6)
        assert rel.max() < 1e-4, name


def test_zero_hidden_units_is_the_linear_model():
    X, y = _clouds()
    mlp = train_mlp(X, y, CLASSES, 0.05, 20, 0, seed=3)
    linear = train_linear(X, y, CLASSES, 0.05, 20, seed=3)
    assert mlp.hidden_weights is None and mlp.hidden_units == 0
    assert np.array_equal(mlp.output_weights, linear.output_weights)
    assert np.array_equal(mlp.output_bias, linear.output_bias)


def test_separable_clouds_are_learned():
    X, y = _clouds()
    model = train_mlp(X, y, CLASSES, 0.1, 100, 10, seed=0)
    assert np.array_equal(model.predict_indices(X), y)
    assert model.loss_history[-1] < model.loss_history[0]
    assert np.allclose(model.predict_scores(X).sum(axis=1), 1.0)


def test_divergence_raises_with_epoch():
    X, y = _clouds()
    X = X * 1e200
    with pytest.raises(TrainingError, match="에폭 1"):
        train_mlp(X, y, CLASSES, 1e10, 5, 0, seed=0)


def test_same_seed_same_model():
    X, y = _clouds()
    a = train_mlp(X, y, CLASSES, 0.05, 10, 5, seed=9)
    b = train_mlp(X, y, CLASSES, 0.05, 10, 5, seed=9)
    assert np.array_equal(a.hidden_weights, b.hidden_weights)
    assert a.loss_history == b.loss_history


def _numeric_gradient(model, X, y, value, idx, step=1e-5):
    original = value[idx]
    value[idx] = original + step
    up, _ = loss_and_gradients(model, X, y)
    value[idx] = original - step
    down, _ = loss_and_gradients(model, X, y)
    value[idx] = original
    return (up - down) / (2 * step)


@pytest.mark.parametrize("seed", range(100))
def test_gradient_matches_at_random_coordinate(seed):
    rng = np.random.default_rng(seed)
    d, k = rng.integers(1, 6), rng.integers(2, 5)
    hidden_units = int(rng.choice([0, 1, 3, 8]))
    X = rng.normal(size=(rng.integers(1, 10), d))
    y = rng.integers(0, k, len(X))
    model = init_mlp(d, k, hidden_units, rng)
    for value in model.parameters().values():
        value += rng.normal(0.0, 0.5, value.shape)

    _, grads = loss_and_gradients(model, X, y)
    for name, value in model.parameters().items():
        idx = tuple(int(rng.integers(0, n)) for n in value.shape)
        numeric = _numeric_gradient(model, X, y, value, idx)
        assert abs(grads[name][idx] - numeric) <= 1e-4 * max(abs(grads[name][idx]) + abs(numeric), 1e-5), name
