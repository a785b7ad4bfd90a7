import numpy as np
import pytest

from dpgnn.data import Dataset, save_dataset, synthesize_planted_graph
from dpgnn.graph import build_graph


def random_graph(rng: np.random.Generator, n: int, edge_prob: float = 0.15):
    """Random undirected graph as (SparseGraph, edge list)."""
    draw = rng.random((n, n))
    src, dst = np.nonzero(np.triu(draw < edge_prob, k=1))
    edges = np.stack([src, dst], axis=1)
    return build_graph(edges, n), edges


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    """8 nodes, 2 classes, two 4-cliques joined by one bridge edge."""
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
             (4, 5), (4, 6), (4, 7), (5, 6), (5, 7), (6, 7),
             (3, 4)]
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    features = np.zeros((8, 2))
    features[np.arange(8), labels] = 1.0
    features += 0.05 * np.random.default_rng(0).standard_normal((8, 2))
    return Dataset(
        graph=build_graph(edges, 8),
        features=features,
        labels=labels,
        num_classes=2,
        name="toy",
    )


@pytest.fixture(scope="session")
def toy_dataset_dir(tmp_path_factory, toy_dataset):
    path = tmp_path_factory.mktemp("data") / "toy"
    save_dataset(toy_dataset, path)
    return path


@pytest.fixture(scope="session")
def planted_dataset() -> Dataset:
    """Well-separated 2-block SBM for training smoke tests."""
    return synthesize_planted_graph(
        nodes_per_class=20,
        num_classes=2,
        intra_edge_prob=0.4,
        inter_edge_prob=0.05,
        feature_noise=0.2,
        rng=np.random.default_rng(7),
    )
