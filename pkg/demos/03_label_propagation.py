#!/usr/bin/env python3
"""Imbalanced label propagation: minting pseudo labels from topology.

On a planted two-community graph with a heavily imbalanced training set
(8 labeled nodes for the majority class, 2 for the minority), inverse-
frequency reweighting keeps the minority's vote alive, and the gain
threshold trades pseudo-label quantity against quality.
"""

import numpy as np

from dpgnn.data import synthesize_planted_graph
from dpgnn.graph import normalize
from dpgnn.labelprop import (
    PropagationConfig,
    make_label_set,
    pseudo_label_stats,
    run_label_propagation,
)

rng = np.random.default_rng(4)
ds = synthesize_planted_graph(60, 2, 0.12, 0.01, 0.3, rng)
adj = normalize(ds.graph)

# class 0: 2 training nodes, class 1: 8 -> gamma = 5.0 vs 1.25
train_idx = np.concatenate([np.flatnonzero(ds.labels == 0)[:2], np.flatnonzero(ds.labels == 1)[:8]])
labels = make_label_set(ds.labels, train_idx, 2)
run_label_propagation(adj, labels, PropagationConfig(k=2, eta=0.0))
gamma = labels.y_tilde[train_idx].max(axis=1)
print("reweighting factors per training node:", gamma)
print("per-class reweighted mass:", labels.y_tilde.sum(axis=0), "(balanced by construction)")

unlabeled = ~labels.labeled_mask
print("\npropagated label mass reaches", int((labels.y_hat[unlabeled].sum(axis=1) > 0).sum()),
      "of", int(unlabeled.sum()), "unlabeled nodes after 2 hops")

print("\n eta | pseudo labels | accuracy on all nodes")
eval_idx = np.flatnonzero(unlabeled)
for eta in (0.0, 0.5, 1.0, 1.5, 2.0):
    ls = make_label_set(ds.labels, train_idx, 2)
    run_label_propagation(adj, ls, PropagationConfig(k=2, eta=eta))
    stats = pseudo_label_stats(ls, ds.labels, eval_idx)
    print(f" {eta:3.1f} | {stats['pseudo_count']:13d} | {stats['pseudo_accuracy']:.3f}")
print("\nhigher thresholds keep fewer, sharper, more accurate pseudo labels")
