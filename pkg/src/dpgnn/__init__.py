"""Distance-wise prototypical graph neural network for imbalanced node
classification: sparse graph core, tape autodiff, episodic training with a
learned distance-metric space, imbalanced label propagation, self-supervised
losses, baselines, and an experiment harness."""

from .data import Dataset, Split, load_dataset, make_imbalanced_split, save_dataset, synthesize_planted_graph
from .graph import NormalizedAdjacency, SparseGraph, build_graph, edge_homophily, normalize, spmm
from .labelprop import LabelSet, PropagationConfig, run_label_propagation
from .metrics import MetricsReport, compute_f1
from .trainer import ModelParams, RunResult, TrainConfig, run_model, train, train_baseline

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Split",
    "load_dataset",
    "make_imbalanced_split",
    "save_dataset",
    "synthesize_planted_graph",
    "SparseGraph",
    "NormalizedAdjacency",
    "build_graph",
    "normalize",
    "spmm",
    "edge_homophily",
    "LabelSet",
    "PropagationConfig",
    "run_label_propagation",
    "MetricsReport",
    "compute_f1",
    "TrainConfig",
    "ModelParams",
    "RunResult",
    "train",
    "train_baseline",
    "run_model",
    "__version__",
]
