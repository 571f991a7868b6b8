import numpy as np
import pytest

from lsr.decision.kmeans import ClusteringError, KMeansModel, kmeans_assign, kmeans_fit


@pytest.fixture
def blobs():
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    return np.concatenate([c + rng.normal(0, 0.5, (40, 2)) for c in centers])


def test_recovers_separated_blobs(blobs):
    model = kmeans_fit(blobs, k=3, seed=1)
    labels = model.assign(blobs)
    for start in (0, 40, 80):
        assert len(set(labels[start : start + 40])) == 1
    assert len(set(labels)) == 3


def test_fit_is_deterministic(blobs):
    first = kmeans_fit(blobs, k=3, seed=5)
    second = kmeans_fit(blobs, k=3, seed=5)
    np.testing.assert_array_equal(first.centroids, second.centroids)
    assert first.inertia == second.inertia


def test_assign_ties_go_to_lowest_index():
    model = KMeansModel(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert kmeans_assign(model, np.array([0.0, 0.0])) == 0


def test_single_cluster_is_the_mean(blobs):
    model = kmeans_fit(blobs, k=1)
    np.testing.assert_allclose(model.centroids[0], blobs.mean(axis=0))


def test_identical_points_do_not_fail():
    model = kmeans_fit(np.ones((10, 4)), k=3)
    assert model.k == 3
    assert model.inertia == 0.0


def test_too_few_points():
    with pytest.raises(ClusteringError):
        kmeans_fit(np.zeros((2, 3)), k=3)


def test_assign_checks_dimension():
    model = KMeansModel(np.zeros((2, 32)))
    with pytest.raises(ClusteringError):
        kmeans_assign(model, np.zeros(16))


def test_assignment_ignores_a_common_shift():
    rng = np.random.default_rng(8)
    model = KMeansModel(rng.uniform(0, 1, (6, 32)))
    shifted = KMeansModel(model.centroids + 0.75)
    for descriptor in rng.uniform(0, 1, (100, 32)):
        assert kmeans_assign(shifted, descriptor + 0.75) == kmeans_assign(model, descriptor)


def test_assignment_matches_exhaustive_distances():
    rng = np.random.default_rng(9)
    model = KMeansModel(rng.normal(size=(5, 8)))
    for descriptor in rng.normal(size=(50, 8)):
        distances = [np.sum((descriptor - c) ** 2) for c in model.centroids]
        assert kmeans_assign(model, descriptor) == int(np.argmin(distances))
