"""Distance-metric space: project nodes and prototypes, classify queries.

A node's metric representation is a learned linear map of the concatenated
differences between its embedding and every class prototype,
g = W^T concat_c(h - p_c) + b. Because the concatenation shares h across
blocks, the projection factors into h @ (sum_c W_c) - sum_c p_c @ W_c + b,
which is what the fused op below computes; values and gradients are identical
to the naive concat route but cost O(d' d'') per node instead of O(C d' d'').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Param, Tape, Tensor
from .encoder import glorot
from .episodic import Prototypes
from .errors import NumericError, ShapeError


@dataclass
class DistanceMetricLayer:
    """Learned linear map from concatenated prototype differences (d'C -> d'')."""

    weight: Param  # (d' * C) x d''
    bias: Param  # 1 x d''

    @property
    def metric_dim(self) -> int:
        return self.weight.value.shape[1]


@dataclass
class MetricRepresentations:
    """Metric-space rows for prototypes (G_S), queries (G_Q) and, optionally,
    every node (used by the smoothing loss and test-time inference)."""

    g_support: Tensor
    g_query: Tensor
    g_all: Tensor | None = None


def init_metric_layer(rng: np.random.Generator, embed_dim: int, num_classes: int, metric_dim: int) -> DistanceMetricLayer:
    if metric_dim <= 0:
        raise ShapeError(f"metric_dim must be positive, got {metric_dim}")
    return DistanceMetricLayer(
        weight=Param("metric.weight", glorot(rng, embed_dim * num_classes, metric_dim)),
        bias=Param("metric.bias", np.zeros((1, metric_dim))),
    )


def _project(h: np.ndarray, protos: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Plain-numpy forward of the factored projection (shared with eval)."""
    c, d_in = protos.shape
    w3 = w.reshape(c, d_in, -1)
    w_sum = w3.sum(axis=0)
    offset = np.einsum("cd,cde->e", protos, w3)
    return h @ w_sum - offset + b


def metric_embed(h_rows: Tensor, protos: Prototypes, weight: Tensor, bias: Tensor) -> Tensor:
    """Metric representation of each input row (differentiable in all inputs).

    Concatenation order of the difference blocks is ascending class index.
    """
    p = protos.matrix
    c, d_in = p.shape
    if h_rows.shape[1] != d_in:
        raise ShapeError(f"metric_embed: embedding width {h_rows.shape[1]} vs prototype width {d_in}")
    if weight.shape[0] != c * d_in:
        raise ShapeError(f"metric_embed: weight rows {weight.shape[0]} != C*d' = {c * d_in}")
    d_out = weight.shape[1]
    if bias.shape != (1, d_out):
        raise ShapeError(f"metric_embed: bias shape {bias.shape} vs metric dim {d_out}")

    hv, pv, wv, bv = h_rows.values, p.values, weight.values, bias.values
    w3 = wv.reshape(c, d_in, d_out)
    w_sum = w3.sum(axis=0)
    out = hv @ w_sum - np.einsum("cd,cde->e", pv, w3) + bv

    def rule(g: np.ndarray):
        s = g.sum(axis=0, keepdims=True)  # 1 x d''
        dh = g @ w_sum.T if h_rows.requires_grad else None
        dp = -np.einsum("e,cde->cd", s[0], w3) if p.requires_grad else None
        dw = None
        if weight.requires_grad:
            htg = hv.T @ g  # shared across blocks
            dw = (htg[None, :, :] - pv[:, :, None] * s[0][None, None, :]).reshape(c * d_in, d_out)
        db = s.copy() if bias.requires_grad else None
        return dh, dp, dw, db

    return h_rows.tape.record(out, (h_rows, p, weight, bias), rule)


def classify_queries(g_query: Tensor, g_support: Tensor) -> Tensor:
    """Row-softmax of the query/prototype inner products: F (C x C)."""
    if g_query.shape[1] != g_support.shape[1]:
        raise ShapeError(
            f"classify_queries: metric dims differ ({g_query.shape[1]} vs {g_support.shape[1]})"
        )
    return ad.softmax_rows(ad.matmul(g_query, ad.transpose(g_support)))


def classification_loss(f: Tensor) -> Tensor:
    """Balanced supervised loss: mean over classes of -ln F_cc."""
    c = f.shape[0]
    if f.shape != (c, c):
        raise ShapeError(f"classification_loss: expected square F, got {f.shape}")
    if not np.all(np.isfinite(f.values)):
        raise NumericError("classification_loss: non-finite probability")
    return ad.cross_entropy_rows(f, np.arange(c))


def predict_nodes(h_all: np.ndarray, protos: np.ndarray, layer: DistanceMetricLayer) -> np.ndarray:
    """Class with highest prototype similarity per node; ties break low.

    Pure-numpy evaluation path sharing the fused forward with training.
    """
    g_all = _project(h_all, protos, layer.weight.value, layer.bias.value)
    g_s = _project(protos, protos, layer.weight.value, layer.bias.value)
    scores = g_all @ g_s.T
    # argmax of the logits; the row softmax is monotone so predictions agree
    return scores.argmax(axis=1)
