#!/usr/bin/env python3
"""End-to-end training on a noisy planted partition with a 2-shot minority.

One epoch = one episode: every class contributes exactly one query node to
the loss, no matter how few labeled nodes it has. With weak features and an
imbalanced training set, the plain GCN typically abandons the minority
class entirely; balanced episodes plus pseudo labels recover it.
"""

import numpy as np

from dpgnn.data import make_imbalanced_split, synthesize_planted_graph
from dpgnn.trainer import TrainConfig, train, train_baseline

ds = synthesize_planted_graph(
    nodes_per_class=30, num_classes=4,
    intra_edge_prob=0.12, inter_edge_prob=0.015,
    feature_noise=3.0, rng=np.random.default_rng(11),
)
split = make_imbalanced_split(
    ds, minority_classes=1, minority_train=2, majority_train=10,
    val=20, test=40, rng=np.random.default_rng(2),
)
print(f"{ds.num_nodes} nodes, 4 classes, train counts {list(split.train_counts)} (class 0 has only 2)")

cfg = TrainConfig(epochs=300, hidden_dim=32, dropout=0.5, lambda1=1.0, lambda2=0.1,
                  eta=0.5, k=2, seed=0, eval_every=25)
result = train(ds, split, cfg)

print("\nloss trajectory (total / classification):")
for h in result.history[::75] + [result.history[-1]]:
    print(f"  epoch {h['epoch']:3d}: {h['loss']:8.4f} / {h['loss_class']:.4f}")
print("\npseudo labels minted before training:", result.pseudo_stats)

baseline = train_baseline(ds, split, TrainConfig(epochs=250, hidden_dim=32, dropout=0.5,
                                                 model="gcn", seed=0, eval_every=25))
print(f"\n            F1-macro   per-class F1 (class 0 = minority)")
print(f"this model    {result.report.f1_macro:.3f}    {np.round(result.report.per_class_f1, 2)}")
print(f"plain GCN     {baseline.report.f1_macro:.3f}    {np.round(baseline.report.per_class_f1, 2)}")
print("\nthe plain GCN abandons the 2-shot class; balanced episodes do not")
