import numpy as np
import pytest

from mghga import (
    LabelData,
    ModelParams,
    Surrogate,
    build_knn_hypergraph,
    normalized_operator,
)


def random_instance(seed, n_max=30, d_max=8, h_max=4, c_max=3, k=3):
    """Seeded small instance: features, operator, params, labels.

    Shapes are drawn within the given bounds; the label split always leaves
    both masks non-empty.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, n_max + 1))
    d = int(rng.integers(2, d_max + 1))
    h = int(rng.integers(2, h_max + 1))
    c = int(rng.integers(2, c_max + 1))
    X = rng.random((n, d))
    graph = build_knn_hypergraph(X, min(k, n - 1))
    op = normalized_operator(graph)
    params = ModelParams(
        rng.standard_normal((d, h)) * 0.5,
        rng.standard_normal((h, c)) * 0.5,
    )
    y = rng.integers(0, c, n)
    n_train = int(rng.integers(2, max(3, n // 2)))
    perm = rng.permutation(n)
    train_mask = np.zeros(n, dtype=bool)
    test_mask = np.zeros(n, dtype=bool)
    train_mask[perm[:n_train]] = True
    test_mask[perm[n_train:]] = True
    labels = LabelData(y, train_mask, test_mask, c)
    return X, graph, op, params, labels


@pytest.fixture
def tiny_instance():
    return random_instance(12345)


def trained_surrogate(X, labels, k=3, epochs=60, seed=0):
    from mghga import TrainConfig, train

    graph = build_knn_hypergraph(X, k)
    op = normalized_operator(graph)
    params = train(op, X, labels, TrainConfig(epochs=epochs, seed=seed, hidden_dim=4))
    return Surrogate(params, op, graph)
