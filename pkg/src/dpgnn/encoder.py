"""Two-layer graph-convolutional encoder producing node embeddings.

Each layer propagates with the normalized self-loop adjacency and applies a
linear transform: A_hat (H W) + b. ReLU and dropout sit between layers only;
the final layer output is left unbounded because it feeds distance
computations downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .errors import InputError, ShapeError
from .graph import NormalizedAdjacency


@dataclass
class EncoderConfig:
    input_dim: int
    hidden_dim: int = 256
    dropout_rate: float = 0.5
    num_layers: int = 2

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise InputError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InputError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class GCNLayer:
    """One graph-convolution layer's persistent parameters."""

    weight: ad.Param
    bias: ad.Param

    @property
    def in_dim(self) -> int:
        return self.weight.value.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.value.shape[1]


def glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    """Glorot-uniform init with bound sqrt(6 / (d_in + d_out))."""
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_in, d_out))


def init_gcn_layer(rng: np.random.Generator, d_in: int, d_out: int, name: str, weight_decay: float = 0.0) -> GCNLayer:
    return GCNLayer(
        weight=ad.Param(f"{name}.weight", glorot(rng, d_in, d_out), weight_decay),
        bias=ad.Param(f"{name}.bias", np.zeros((1, d_out))),
    )


def init_encoder(rng: np.random.Generator, cfg: EncoderConfig, out_dim: int | None = None) -> list[GCNLayer]:
    """Layer stack chaining input_dim -> hidden -> ... -> out_dim.

    Weight decay applies to the first layer only (5e-4), none on later layers.
    """
    dims = [cfg.input_dim] + [cfg.hidden_dim] * (cfg.num_layers - 1)
    dims.append(out_dim if out_dim is not None else cfg.hidden_dim)
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        wd = 5e-4 if i == 0 else 0.0
        layers.append(init_gcn_layer(rng, d_in, d_out, f"gcn{i + 1}", weight_decay=wd))
    return layers


def _dropout_csr(x: sp.csr_matrix, rate: float, rng: np.random.Generator) -> sp.csr_matrix:
    # Dropout of a constant sparse matrix: zeros stay zero, so masking the
    # stored entries reproduces dense dropout exactly. No tape record needed
    # because the features carry no gradient.
    keep = 1.0 - rate
    mask = rng.random(x.data.shape) >= rate
    out = x.copy()
    out.data = np.where(mask, out.data / keep, 0.0)
    return out


def encode(
    tape: ad.Tape,
    adj: NormalizedAdjacency,
    x: np.ndarray | sp.spmatrix,
    layers: list[GCNLayer],
    dropout_rate: float,
    training: bool,
    rng: np.random.Generator,
) -> ad.Tensor:
    """Forward the full stack, returning final-layer embeddings (n x d').

    Dropout is applied to the input features and to each hidden activation
    when training.
    """
    xs = x.tocsr() if sp.issparse(x) else sp.csr_matrix(np.asarray(x, dtype=np.float64))
    if xs.shape[0] != adj.num_nodes:
        raise ShapeError(f"encode: {xs.shape[0]} feature rows for {adj.num_nodes} nodes")
    if xs.shape[1] != layers[0].in_dim:
        raise ShapeError(f"encode: feature dim {xs.shape[1]} vs layer-1 input dim {layers[0].in_dim}")
    for prev, nxt in zip(layers[:-1], layers[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(f"encode: layer dims do not chain ({prev.out_dim} -> {nxt.in_dim})")

    if training and dropout_rate > 0.0:
        xs = _dropout_csr(xs, dropout_rate, rng)
    h = ad.const_csr_matmul(xs, layers[0].weight.bind(tape))
    h = ad.add_bias(ad.spmm_const(adj, h), layers[0].bias.bind(tape))
    for layer in layers[1:]:
        h = ad.relu(h)
        h = ad.dropout(h, dropout_rate, training, rng)
        h = ad.matmul(h, layer.weight.bind(tape))
        h = ad.add_bias(ad.spmm_const(adj, h), layer.bias.bind(tape))
    return h
