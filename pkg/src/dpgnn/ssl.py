"""Self-supervised losses: prototype separation and metric smoothing.

The separation loss is the sum of all off-diagonal cosine similarities
between class prototypes (so it is bounded in [-C(C-1), C(C-1)] and reaches 0
for mutually orthogonal prototypes). The smoothing loss penalizes differences
of degree-scaled metric representations across edges, summed over both
directions of every edge; that double-count equals twice the quadratic form
trace(G^T (I - A_hat) G) and is absorbed into the loss weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .episodic import Prototypes
from .errors import InputError, ShapeError
from .graph import SparseGraph


@dataclass
class SslConfig:
    lambda1: float = 1.0  # prototype-separation weight
    lambda2: float = 1.0  # smoothing weight

    def __post_init__(self):
        for name, v in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and >= 0, got {v}")


def proto_separation_loss(protos: Prototypes) -> Tensor:
    """Sum of off-diagonal pairwise cosine similarities of the prototypes."""
    p = protos.matrix
    sim = ad.cosine_sim_matrix(p)
    c = sim.shape[0]
    off_diag = p.tape.constant(1.0 - np.eye(c))
    return ad.sum_all(ad.mul_elem(sim, off_diag))


def smoothing_loss(g_all: Tensor, graph: SparseGraph) -> Tensor:
    """Edge-wise sum of ||g_i/sqrt(d~_i) - g_j/sqrt(d~_j)||^2, both directions.

    Degrees are the self-loop form d~ = d + 1, consistent with the normalized
    adjacency; self-loop terms are identically zero and skipped.
    """
    if g_all.shape[0] != graph.num_nodes:
        raise ShapeError(
            f"smoothing_loss: {g_all.shape[0]} rows for {graph.num_nodes} nodes"
        )
    inv_sqrt = 1.0 / np.sqrt(graph.self_loop_degrees.astype(np.float64))
    r = g_all.values * inv_sqrt[:, None]
    src, dst = graph.directed_edges()
    diff = r[src] - r[dst]
    loss = float(np.einsum("ij,ij->", diff, diff))
    raw_deg = graph.degrees.astype(np.float64)

    def rule(g: np.ndarray):
        # d/dr_k of the both-direction sum is 4 (deg_k r_k - sum_{j in N_k} r_j)
        dr = 4.0 * (raw_deg[:, None] * r - graph.neighbor_sum(r))
        return (g[0, 0] * dr * inv_sqrt[:, None],)

    return g_all.tape.record(np.array([[loss]]), (g_all,), rule)
