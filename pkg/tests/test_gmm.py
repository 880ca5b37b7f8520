import numpy as np
import pytest

from classifiers import TrainingError, predict
from scipy.stats import norm

from gmm import ClassMixture, GmmModel, fit_class_mixture, train_gmm, train_naive_bayes, variance_floor

CLASSES = ("normal", "attack")


def _two_class(seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0.0, 1.0, (50, 4)), rng.normal(8.0, 1.0, (30, 4))])
    y = np.array([0] * 50 + [1] * 30)
    return X, y


def test_naive_bayes_is_per_class_mean_and_biased_variance():
    X, y = _two_class()
    model = train_naive_bayes(X, y, CLASSES)
    for index in (0, 1):
        rows = X[y == index]
        mixture = model.mixtures[index]
        assert np.allclose(mixture.means[0], rows.mean(axis=0))
        assert np.allclose(mixture.variances[0], np.maximum(rows.var(axis=0), model.floor))
    assert np.allclose(model.priors, [50 / 80, 30 / 80])


def test_single_component_gmm_equals_naive_bayes_bitwise():
    X, y = _two_class(1)
    nb = train_naive_bayes(X, y, CLASSES)
    gmm = train_gmm(X, y, CLASSES, components=1, iterations=50, threshold=1e-4, seed=0)
    assert np.array_equal(nb.priors, gmm.priors)
    for a, b in zip(nb.mixtures, gmm.mixtures):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.variances, b.variances)
    assert np.array_equal(nb.predict_scores(X), gmm.predict_scores(X))


def test_two_clusters_recovered():
    rng = np.random.default_rng(2)
    centers = np.array([[0.0, 0.0], [10.0, 10.0]])
    X = np.vstack([rng.normal(c, 0.2, (150, 2)) for c in centers])
    model = train_gmm(X, np.zeros(len(X), dtype=int), ("normal",), components=2, iterations=100, threshold=1e-8, seed=0)
    means = model.mixtures[0].means
    means = means[np.argsort(means[:, 0])]
    assert np.all(np.abs(means - centers) < 0.1)


def test_log_likelihood_never_decreases():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0.0, 1.0, (80, 3)), rng.normal(3.0, 0.5, (80, 3)), rng.normal(-4.0, 2.0, (40, 3))])
    model = train_gmm(X, np.zeros(len(X), dtype=int), ("normal",), components=3, iterations=200, threshold=1e-12, seed=1)
    history = np.array(model.mixtures[0].log_likelihood_history)
    assert len(history) > 1
    assert np.all(np.diff(history) >= -1e-9 * np.abs(history[:-1]).clip(min=1.0))


def test_identical_classes_tie_to_first_label():
    mixture = ClassMixture(np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2)))
    model = GmmModel(np.array([0.5, 0.5]), [mixture, mixture], np.full(2, 1e-9))
    scores = model.predict_scores(np.array([[0.3, -0.2]]))
    assert np.allclose(scores, 0.5)
    assert model.predict_indices(np.array([[0.3, -0.2]])).tolist() == [0]


def test_one_class_naive_bayes_always_predicts_it():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 3))
    model = train_naive_bayes(X, np.zeros(20, dtype=int), ("normal",))
    for x in rng.normal(0.0, 10.0, (5, 3)):
        assert predict(model, x, ("normal",)).label == "normal"


def test_far_clusters_centroid_posterior():
    X, y = _two_class(6)
    model = train_naive_bayes(X, y, CLASSES)
    label, scores = predict(model, X[y == 1].mean(axis=0), CLASSES)
    assert label == "attack"
    assert scores[1] > 0.99


def test_components_reduced_to_row_count(caplog):
    X, y = _two_class()
    X, y = X[:53], y[:53]  # 공격 클래스 3행
    model = train_gmm(X, y, CLASSES, components=5, iterations=10, threshold=1e-3, seed=0)
    assert model.reductions == {1: 3}
    assert model.mixtures[1].components == 3
    assert "성분 수를 3" in caplog.text


def test_missing_class_raises():
    X, y = _two_class()
    with pytest.raises(TrainingError, match="attack"):
        train_naive_bayes(X[y == 0], y[y == 0], CLASSES)


def test_variance_floor_has_minimum():
    X = np.ones((10, 2))
    assert np.all(variance_floor(X) == 1e-9)


def test_duplicate_rows_cap_components(caplog):
    base = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 5.0]])
    X = np.repeat(base, [20, 12, 8], axis=0)
    model = train_gmm(X, np.zeros(len(X), dtype=int), ("normal",), components=5, iterations=10, threshold=1e-3, seed=0)
    mixture = model.mixtures[0]
    assert mixture.components == 3
    assert model.reductions == {0: 3}
    assert "서로 다른 행 3개" in caplog.text
    for values in (mixture.weights, mixture.means, mixture.variances, mixture.log_likelihood_history):
        assert np.all(np.isfinite(values))
    assert np.all(np.isfinite(model.predict_scores(base)))


def test_nan_rows_are_training_error():
    X = np.array([[0.0, 1.0], [np.nan, 2.0], [3.0, 4.0], [5.0, 6.0]])
    with pytest.raises(TrainingError, match="유한하지 않은"):
        fit_class_mixture(X, 1, 5, 1e-4, np.full(2, 1e-9), seed=0)


@pytest.mark.parametrize("seed", range(50))
def test_log_likelihood_never_decreases_on_random_data(seed):
    rng = np.random.default_rng(seed)
    n, d, k = rng.integers(30, 100), rng.integers(1, 5), rng.integers(1, 5)
    X = rng.normal(0.0, rng.uniform(0.5, 3.0), (n, d)) + rng.normal(0.0, 4.0, (n, 1)).round()
    model = train_gmm(X, np.zeros(n, dtype=int), ("normal",), components=k, iterations=60, threshold=1e-12, seed=seed)
    history = np.array(model.mixtures[0].log_likelihood_history)
    assert np.all(np.diff(history) >= -1e-9 * np.abs(history[:-1]).clip(min=1.0))


def _explicit_posterior(model, x):
    """Σ_k π_k Π_d N(x_d | μ, σ²) 를 직접 곱해서 정규화."""
    joint = []
    for prior, mixture in zip(model.priors, model.mixtures):
        density = 0.0
        for w, mu, var in zip(mixture.weights, mixture.means, mixture.variances):
            density += w * np.prod(np.exp(-((x - mu) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var))
        joint.append(prior * density)
    joint = np.array(joint)
    return joint / joint.sum()


@pytest.mark.parametrize("seed", range(20))
def test_posterior_matches_explicit_sum(seed):
    rng = np.random.default_rng(seed)
    n_classes, d = rng.integers(2, 5), 3
    mixtures = []
    for _ in range(n_classes):
        k = rng.integers(1, 4)
        mixtures.append(
            ClassMixture(rng.dirichlet(np.ones(k)), rng.normal(0.0, 1.5, (k, d)), rng.uniform(0.5, 2.0, (k, d)))
        )
    model = GmmModel(rng.dirichlet(np.ones(n_classes)), mixtures, np.full(d, 1e-9))
    X = rng.normal(0.0, 1.5, (10, d))
    scores = model.predict_scores(X)
    for x, row in zip(X, scores):
        assert np.allclose(row, _explicit_posterior(model, x), rtol=1e-9, atol=1e-12)


def test_naive_bayes_reaches_bayes_error():
    rng = np.random.default_rng(11)
    shift = np.array([1.0, 1.0])

    def sample(n):
        X = np.vstack([rng.normal(0.0, 1.0, (n, 2)), rng.normal(shift, 1.0, (n, 2))])
        return X, np.array([0] * n + [1] * n)

    model = train_naive_bayes(*sample(5000), CLASSES)
    X_test, y_test = sample(5000)
    error = np.mean(model.predict_indices(X_test) != y_test)
    bayes = norm.cdf(-np.linalg.norm(shift) / 2)
    assert abs(error - bayes) < 0.02
