"""Imbalanced label propagation producing hard pseudo labels.

Pipeline: inverse-frequency reweighting of the one-hot training labels,
k-step propagation through the normalized adjacency, a per-node topological
information gain (TIG) score measuring how sharp the propagated label
distribution is, thresholding into hard pseudo labels, and a final merge
that always preserves the original labels on labeled nodes.

Runs once before training: every quantity depends only on the adjacency and
the given labels, not on learned parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .graph import NormalizedAdjacency, spmm


@dataclass
class PropagationConfig:
    k: int = 2  # hop count (power-iteration steps)
    eta: float = 3.0  # TIG threshold, >= 0

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"propagation hop count must be >= 1, got {self.k}")
        if self.eta < 0:
            raise InputError(f"eta must be >= 0, got {self.eta}")


@dataclass
class LabelSet:
    """Label matrices at each stage of the propagation pipeline.

    y: one-hot labels on training nodes, zero rows elsewhere.
    labeled_mask: True exactly on the training nodes.
    Stage outputs (y_tilde, y_hat, tig, y_check, y_bar) are filled in by the
    corresponding operations below.
    """

    y: np.ndarray
    labeled_mask: np.ndarray
    y_tilde: np.ndarray | None = field(default=None)
    y_hat: np.ndarray | None = field(default=None)
    tig: np.ndarray | None = field(default=None)
    y_check: np.ndarray | None = field(default=None)
    y_bar: np.ndarray | None = field(default=None)

    @property
    def num_classes(self) -> int:
        return self.y.shape[1]


def make_label_set(labels: np.ndarray, train_idx: np.ndarray, num_classes: int) -> LabelSet:
    """One-hot training labels with zero rows on every other node."""
    n = labels.shape[0]
    y = np.zeros((n, num_classes))
    y[train_idx, labels[train_idx]] = 1.0
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    return LabelSet(y=y, labeled_mask=mask)


def reweight_labels(labels: LabelSet) -> np.ndarray:
    """Scale each labeled row by |V_l| / (labeled count of its class).

    After reweighting every class contributes the same total label mass, so
    per-class column sums of the result are all |V_l|.
    """
    counts = labels.y[labels.labeled_mask].sum(axis=0)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise InputError(f"reweight_labels: class {missing} has no labeled nodes")
    total = float(labels.labeled_mask.sum())
    gamma = total / counts
    labels.y_tilde = labels.y * gamma  # zero rows stay zero
    return labels.y_tilde


def propagate(adj: NormalizedAdjacency, y_tilde: np.ndarray, k: int) -> np.ndarray:
    """A_hat^k @ y_tilde via k successive sparse products (edge view).

    Never materializes the matrix power.
    """
    if k < 1:
        raise InputError(f"propagate: k must be >= 1, got {k}")
    y_hat = y_tilde
    for _ in range(k):
        y_hat = spmm(adj, y_hat)
    return y_hat


def tig_scores(y_hat: np.ndarray) -> np.ndarray:
    """Topological information gain per node.

    t = (max - mean of the other entries) / (row mean). Rows with zero total
    mass (unreached nodes) get t = 0 by convention.
    """
    n, c = y_hat.shape
    if c < 2:
        raise InputError("tig_scores needs at least 2 classes")
    row_max = y_hat.max(axis=1)
    row_sum = y_hat.sum(axis=1)
    rest_mean = (row_sum - row_max) / (c - 1)
    t = np.zeros(n)
    nz = row_sum != 0
    t[nz] = (row_max[nz] - rest_mean[nz]) / (row_sum[nz] / c)
    return t


def threshold_labels(y_hat: np.ndarray, t: np.ndarray, eta: float, labeled_mask: np.ndarray) -> np.ndarray:
    """Hard pseudo labels: one-hot at argmax where t > eta, zero otherwise.

    Labeled rows are always zero here (they keep their original labels).
    Argmax ties break to the lowest class index.
    """
    n, c = y_hat.shape
    y_check = np.zeros((n, c))
    selected = (~labeled_mask) & (t > eta)
    y_check[selected, y_hat[selected].argmax(axis=1)] = 1.0
    return y_check


def merge_labels(labels: LabelSet) -> np.ndarray:
    """Original labels on labeled nodes, pseudo labels elsewhere."""
    if labels.y_check is None:
        raise InputError("merge_labels: threshold_labels has not been run")
    labels.y_bar = np.where(labels.labeled_mask[:, None], labels.y, labels.y_check)
    return labels.y_bar


def run_label_propagation(adj: NormalizedAdjacency, labels: LabelSet, cfg: PropagationConfig) -> LabelSet:
    """Full pipeline filling every stage of the LabelSet in place."""
    reweight_labels(labels)
    labels.y_hat = propagate(adj, labels.y_tilde, cfg.k)
    labels.tig = tig_scores(labels.y_hat)
    labels.y_check = threshold_labels(labels.y_hat, labels.tig, cfg.eta, labels.labeled_mask)
    merge_labels(labels)
    return labels


def pseudo_label_stats(labels: LabelSet, truths: np.ndarray, eval_idx: np.ndarray) -> dict:
    """Pseudo-label count (all nodes) and accuracy restricted to eval_idx."""
    if labels.y_check is None:
        raise InputError("pseudo_label_stats: threshold_labels has not been run")
    has_pseudo = labels.y_check.sum(axis=1) > 0
    count = int(has_pseudo.sum())
    on_eval = has_pseudo[eval_idx]
    if on_eval.sum() == 0:
        accuracy = float("nan")
    else:
        idx = eval_idx[on_eval]
        accuracy = float(np.mean(labels.y_check[idx].argmax(axis=1) == truths[idx]))
    return {"pseudo_count": count, "pseudo_eval_count": int(on_eval.sum()), "pseudo_accuracy": accuracy}
