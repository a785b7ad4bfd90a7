"""Immutable sparse graph representation, normalization, and graph statistics.

Graphs are undirected and unweighted. The raw adjacency A is stored in CSR
form without self-loops; `normalize` derives the symmetrically normalized
self-loop adjacency D~^{-1/2} (A + I) D~^{-1/2} used for propagation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ShapeError


@dataclass(frozen=True)
class SparseGraph:
    """Symmetric CSR adjacency without self-loops.

    indptr/indices follow the usual CSR convention; column indices within each
    row are strictly increasing. `degrees[i]` is the row length of row i and
    `self_loop_degrees[i] = degrees[i] + 1`.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    self_loop_degrees: np.ndarray
    _csr: sp.csr_matrix = field(repr=False, compare=False, default=None)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (each stored twice internally)."""
        return self.indices.size // 2

    def neighbor_sum(self, m: np.ndarray) -> np.ndarray:
        """A @ m over the raw adjacency (no self-loops)."""
        if m.shape[0] != self.num_nodes:
            raise ShapeError(
                f"neighbor_sum: matrix has {m.shape[0]} rows, graph has {self.num_nodes} nodes"
            )
        return self._csr @ m

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) arrays covering both directions of every stored edge."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        return src, self.indices


@dataclass(frozen=True)
class NormalizedAdjacency:
    """CSR matrix of D~^{-1/2} (A + I) D~^{-1/2}, self-loops included.

    Symmetric, every diagonal entry present and equal to 1/self_loop_degree,
    all weights in (0, 1].
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _csr: sp.csr_matrix = field(repr=False, compare=False, default=None)


def build_graph(edge_list: Iterable[Sequence[int]], num_nodes: int) -> SparseGraph:
    """Build a symmetric deduplicated graph from an edge list.

    Duplicate and reversed pairs collapse silently; self-pairs are dropped.
    Raises InputError naming the offending pair on an out-of-range index.
    """
    edges = np.asarray(list(edge_list), dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise InputError("edge list must be a sequence of (u, v) pairs")
    bad = (edges < 0) | (edges >= num_nodes)
    if bad.any():
        u, v = edges[bad.any(axis=1)][0]
        raise InputError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")

    # Symmetrize, drop self-pairs, dedup via a boolean sparse matrix.
    keep = edges[:, 0] != edges[:, 1]
    edges = edges[keep]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.csr_matrix(
        (np.ones(rows.size, dtype=np.float64), (rows, cols)),
        shape=(num_nodes, num_nodes),
    )
    a.data[:] = 1.0  # duplicates summed by coo->csr; collapse back to 0/1
    a.sort_indices()

    degrees = np.diff(a.indptr).astype(np.int64)
    return SparseGraph(
        num_nodes=num_nodes,
        indptr=a.indptr.copy(),
        indices=a.indices.copy(),
        degrees=degrees,
        self_loop_degrees=degrees + 1,
        _csr=a,
    )


def read_edge_list(path: str | Path) -> list[tuple[int, int]]:
    """Parse a `u<TAB>v` edge file. 0-based indices, '#' comment lines ignored."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-integer node index in {line!r}") from None
    return edges


def normalize(g: SparseGraph) -> NormalizedAdjacency:
    """D~^{-1/2} (A + I) D~^{-1/2} in CSR form.

    Isolated nodes keep a unit self-loop so propagation preserves their signal.
    """
    inv_sqrt = 1.0 / np.sqrt(g.self_loop_degrees.astype(np.float64))
    a_tilde = g._csr + sp.identity(g.num_nodes, dtype=np.float64, format="csr")
    d_half = sp.diags(inv_sqrt)
    a_hat = (d_half @ a_tilde @ d_half).tocsr()
    a_hat.sort_indices()
    return NormalizedAdjacency(
        num_nodes=g.num_nodes,
        indptr=a_hat.indptr.copy(),
        indices=a_hat.indices.copy(),
        data=a_hat.data.copy(),
        _csr=a_hat,
    )


def spmm(adj: NormalizedAdjacency, m: np.ndarray) -> np.ndarray:
    """Sparse-dense product A_hat @ m; runtime proportional to (edges + n) * cols."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != adj.num_nodes:
        raise ShapeError(
            f"spmm: expected a matrix with {adj.num_nodes} rows, got shape {m.shape}"
        )
    return adj._csr @ m


def edge_homophily(g: SparseGraph, labels: np.ndarray) -> float:
    """Fraction of undirected edges whose endpoints share a class."""
    labels = np.asarray(labels)
    if labels.shape[0] != g.num_nodes:
        raise ShapeError(
            f"edge_homophily: {labels.shape[0]} labels for {g.num_nodes} nodes"
        )
    if g.num_edges == 0:
        raise InputError("edge_homophily is undefined on a graph with zero edges")
    src, dst = g.directed_edges()
    same = labels[src] == labels[dst]
    # Each undirected edge appears twice; the ratio is unaffected.
    return float(np.count_nonzero(same) / same.size)
