"""Dataset loading, imbalanced split generation, and synthetic graphs.

Canonical on-disk format (one directory per dataset):
    edges.tsv      one "u<TAB>v" pair per line, 0-based, '#' comments ignored
    features.csv   n rows of d comma-separated reals
    labels.txt     one integer class index per line
    meta.json      optional {"name", "num_nodes", "num_features", "num_classes"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .graph import SparseGraph, build_graph, edge_homophily, read_edge_list

# Minority-class counts for the imitative imbalanced setting, keyed by
# dataset name (citation + social networks; Amazon networks use the
# proportional mode instead).
DEFAULT_MINORITY_CLASSES = {
    "cora": 5,
    "citeseer": 4,
    "pubmed": 2,
    "cora_ml": 5,
    "dblp": 3,
    "twitch_pt": 1,
}


@dataclass
class Dataset:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "unnamed"
    _features_csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.graph.num_nodes
        if self.features.shape[0] != n:
            raise InputError(f"{self.name}: {self.features.shape[0]} feature rows for {n} nodes")
        if self.labels.shape[0] != n:
            raise InputError(f"{self.name}: {self.labels.shape[0]} labels for {n} nodes")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InputError(f"{self.name}: labels outside [0, {self.num_classes})")
        counts = np.bincount(self.labels, minlength=self.num_classes)
        if np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            raise InputError(f"{self.name}: class {empty} has no nodes")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def features_csr(self) -> sp.csr_matrix:
        """Cached sparse view of the feature matrix (fast first-layer matmul)."""
        if self._features_csr is None:
            self._features_csr = sp.csr_matrix(self.features)
        return self._features_csr

    def homophily(self) -> float:
        return edge_homophily(self.graph, self.labels)


@dataclass
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    train_counts: np.ndarray  # per-class train quota actually assigned

    def __post_init__(self):
        parts = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if np.unique(parts).size != parts.size:
            raise InputError("split partitions overlap")

    def save(self, path: str | Path) -> None:
        payload = {
            "train_idx": [int(i) for i in self.train_idx],
            "val_idx": [int(i) for i in self.val_idx],
            "test_idx": [int(i) for i in self.test_idx],
            "train_counts": [int(c) for c in self.train_counts],
        }
        Path(path).write_text(json.dumps(payload) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Split":
        payload = json.loads(Path(path).read_text())
        return cls(
            train_idx=np.asarray(payload["train_idx"], dtype=np.int64),
            val_idx=np.asarray(payload["val_idx"], dtype=np.int64),
            test_idx=np.asarray(payload["test_idx"], dtype=np.int64),
            train_counts=np.asarray(payload["train_counts"], dtype=np.int64),
        )


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    paths = {name: directory / name for name in ("edges.tsv", "features.csv", "labels.txt")}
    for name, p in paths.items():
        if not p.exists():
            raise InputError(f"missing dataset file: {p}")

    features = np.loadtxt(paths["features.csv"], delimiter=",", dtype=np.float64, ndmin=2)
    labels = np.loadtxt(paths["labels.txt"], dtype=np.int64, ndmin=1)
    if labels.shape[0] != features.shape[0]:
        raise InputError(
            f"{directory}: labels.txt has {labels.shape[0]} rows, features.csv has {features.shape[0]}"
        )
    n = features.shape[0]
    edges = read_edge_list(paths["edges.tsv"])
    graph = build_graph(edges, n)

    name = directory.name
    num_classes = int(labels.max()) + 1
    meta_path = directory / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        name = meta.get("name", name)
        num_classes = int(meta.get("num_classes", num_classes))
        for key, actual in (("num_nodes", n), ("num_features", features.shape[1])):
            if key in meta and int(meta[key]) != actual:
                raise InputError(f"{meta_path}: {key}={meta[key]} but files contain {actual}")
    return Dataset(graph=graph, features=features, labels=labels, num_classes=num_classes, name=name)


def save_dataset(ds: Dataset, directory: str | Path) -> None:
    """Write a dataset in the canonical directory format (round-trips exactly)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    src, dst = ds.graph.directed_edges()
    with open(directory / "edges.tsv", "w", encoding="utf-8") as fh:
        for u, v in zip(src, dst):
            if u < v:  # each undirected edge once
                fh.write(f"{u}\t{v}\n")
    np.savetxt(directory / "features.csv", ds.features, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "labels.txt", ds.labels, fmt="%d")
    meta = {
        "name": ds.name,
        "num_nodes": ds.num_nodes,
        "num_features": ds.num_features,
        "num_classes": ds.num_classes,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def make_imbalanced_split(
    ds: Dataset,
    minority_classes: int,
    minority_train: int = 2,
    majority_train: int = 20,
    val: int = 500,
    test: int = 1000,
    rng: np.random.Generator | None = None,
) -> Split:
    """Down-sampled training split: the first `minority_classes` class indices
    get `minority_train` training nodes each, the rest `majority_train`.

    Validation and test nodes are drawn uniformly from the remainder; their
    sizes are capped by what remains.
    """
    rng = rng or np.random.default_rng()
    quotas = np.full(ds.num_classes, majority_train, dtype=np.int64)
    quotas[:minority_classes] = minority_train

    train_parts = []
    for c in range(ds.num_classes):
        pool = np.flatnonzero(ds.labels == c)
        if pool.size < quotas[c]:
            raise InputError(
                f"class {c} has {pool.size} nodes, cannot draw {quotas[c]} training nodes"
            )
        train_parts.append(rng.choice(pool, size=quotas[c], replace=False))
    train_idx = np.sort(np.concatenate(train_parts))

    remainder = np.setdiff1d(np.arange(ds.num_nodes), train_idx)
    rest = rng.permutation(remainder)
    n_val = min(val, rest.size)
    n_test = min(test, rest.size - n_val)
    return Split(
        train_idx=train_idx,
        val_idx=np.sort(rest[:n_val]),
        test_idx=np.sort(rest[n_val : n_val + n_test]),
        train_counts=quotas,
    )


def make_proportional_split(
    ds: Dataset,
    total_train: int,
    val: int = 500,
    test: int = 1000,
    rng: np.random.Generator | None = None,
) -> Split:
    """Training nodes allocated proportionally to the class frequencies
    (the genuinely-imbalanced datasets keep their original ratios).

    Every class receives at least one training node.
    """
    rng = rng or np.random.default_rng()
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    raw = counts / counts.sum() * total_train
    quotas = np.maximum(1, np.floor(raw)).astype(np.int64)
    # distribute the leftover to the largest fractional parts
    leftover = total_train - quotas.sum()
    if leftover > 0:
        order = np.argsort(-(raw - np.floor(raw)))
        quotas[order[:leftover]] += 1

    train_parts = []
    for c in range(ds.num_classes):
        pool = np.flatnonzero(ds.labels == c)
        take = min(quotas[c], pool.size)
        train_parts.append(rng.choice(pool, size=take, replace=False))
    train_idx = np.sort(np.concatenate(train_parts))
    remainder = np.setdiff1d(np.arange(ds.num_nodes), train_idx)
    rest = rng.permutation(remainder)
    n_val = min(val, rest.size)
    n_test = min(test, rest.size - n_val)
    quotas_actual = np.bincount(ds.labels[train_idx], minlength=ds.num_classes)
    return Split(
        train_idx=train_idx,
        val_idx=np.sort(rest[:n_val]),
        test_idx=np.sort(rest[n_val : n_val + n_test]),
        train_counts=quotas_actual,
    )


def synthesize_planted_graph(
    nodes_per_class: int,
    num_classes: int,
    intra_edge_prob: float,
    inter_edge_prob: float,
    feature_noise: float,
    rng: np.random.Generator,
    feature_dim: int | None = None,
) -> Dataset:
    """Stochastic block model with class-indicator features plus Gaussian noise.

    Used by smoke tests and property suites; `feature_dim` pads the indicator
    features with noise-only columns when a wider input is wanted.
    """
    for p in (intra_edge_prob, inter_edge_prob):
        if not 0.0 <= p <= 1.0:
            raise InputError(f"edge probability {p} outside [0, 1]")
    n = nodes_per_class * num_classes
    labels = np.repeat(np.arange(num_classes), nodes_per_class)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, intra_edge_prob, inter_edge_prob)
    draw = rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    src, dst = np.nonzero(upper)
    graph = build_graph(np.stack([src, dst], axis=1), n)

    d = feature_dim if feature_dim is not None else num_classes
    if d < num_classes:
        raise InputError(f"feature_dim {d} smaller than num_classes {num_classes}")
    features = np.zeros((n, d))
    features[np.arange(n), labels] = 1.0
    features += feature_noise * rng.standard_normal((n, d))
    return Dataset(
        graph=graph,
        features=features,
        labels=labels,
        num_classes=num_classes,
        name="synthetic",
    )
