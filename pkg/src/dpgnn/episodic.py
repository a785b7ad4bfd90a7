"""Per-epoch episode sampling and class-prototype computation.

Every epoch, one node per class is held out as the query and the remaining
labeled (or pseudo-labeled) nodes of that class form the support set. The
class prototype is the mean of support-set embeddings. The resulting
classification loss averages exactly one term per class, which is what
balances training between majority and minority classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import InputError


@dataclass
class Episode:
    """Support node lists and the single query node, per class."""

    support: dict[int, np.ndarray]
    query: dict[int, int]

    @property
    def num_classes(self) -> int:
        return len(self.support)

    def query_indices(self) -> np.ndarray:
        """Query node ids in ascending class order."""
        return np.array([self.query[c] for c in sorted(self.query)], dtype=np.int64)


@dataclass
class Prototypes:
    """Per-class mean support embeddings, stacked as a C x d' tensor."""

    matrix: ad.Tensor

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]


def class_node_lists(y: np.ndarray) -> dict[int, np.ndarray]:
    """Map class -> node ids with that one-hot label; zero rows are skipped."""
    labeled = y.sum(axis=1) > 0
    classes = y.argmax(axis=1)
    return {
        c: np.flatnonzero(labeled & (classes == c))
        for c in range(y.shape[1])
    }


def sample_episode(y: np.ndarray, rng: np.random.Generator) -> Episode:
    """Draw one episode from a merged one-hot label matrix (n x C).

    One uniformly random query per class; support is the remainder. A class
    with a single available node reuses it as both support and query.
    """
    per_class = class_node_lists(y)
    support: dict[int, np.ndarray] = {}
    query: dict[int, int] = {}
    for c, nodes in per_class.items():
        if nodes.size == 0:
            raise InputError(f"sample_episode: class {c} has no available nodes")
        if nodes.size == 1:
            query[c] = int(nodes[0])
            support[c] = nodes
            continue
        q = int(nodes[rng.integers(nodes.size)])
        query[c] = q
        support[c] = nodes[nodes != q]
    return Episode(support=support, query=query)


def compute_prototypes(h: ad.Tensor, episode: Episode) -> Prototypes:
    """Differentiable mean of support embeddings for every class.

    The gradient distributes 1/|S_c| to each support row.
    """
    rows = []
    for c in sorted(episode.support):
        idx = episode.support[c]
        if idx.size == 0:
            raise InputError(f"compute_prototypes: empty support set for class {c}")
        rows.append(ad.mean_rows(ad.gather_rows(h, idx)))
    return Prototypes(matrix=ad.concat_rows(rows))
