"""Minimal reverse-mode automatic differentiation over dense float64 matrices.

A `Tape` records one forward pass; `backward` replays it in reverse, pushing
adjoints into every tensor that requires a gradient. Tensors are always 2-D.
The op set is exactly what the training objective needs, plus a few generic
helpers (gather/concat/sums) used to assemble episode losses and tests.

Custom differentiable ops living in other modules (the fused distance-metric
projection, the edge-wise smoothing loss) register themselves through
`Tape.record`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NumericError, ShapeError
from .graph import NormalizedAdjacency

Array = np.ndarray
BackwardRule = Callable[[Array], Sequence[Array | None]]


class Tensor:
    """Dense real matrix participating in one tape's computation graph."""

    __slots__ = ("values", "requires_grad", "node_id", "tape")

    def __init__(self, values: Array, requires_grad: bool, node_id: int, tape: "Tape"):
        self.values = values
        self.requires_grad = requires_grad
        self.node_id = node_id
        self.tape = tape

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, id={self.node_id})"


class Tape:
    """Ordered record of operations; inputs always precede their consumers."""

    def __init__(self):
        self._records: list[tuple[int, tuple[int, ...], BackwardRule]] = []
        self._next_id = 0
        self._param_tensors: dict[str, Tensor] = {}

    def _new_tensor(self, values: Array, requires_grad: bool) -> Tensor:
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {values.shape}")
        t = Tensor(values, requires_grad, self._next_id, self)
        self._next_id += 1
        return t

    def variable(self, values: Array) -> Tensor:
        """Leaf tensor that accumulates a gradient."""
        return self._new_tensor(values, requires_grad=True)

    def constant(self, values: Array) -> Tensor:
        """Leaf tensor without a gradient."""
        return self._new_tensor(values, requires_grad=False)

    def record(self, out_values: Array, inputs: Sequence[Tensor], backward: BackwardRule) -> Tensor:
        """Create the output tensor of an op and register its backward rule.

        `backward(upstream)` must return one gradient per input (None for
        inputs that do not require one). Extension point for custom ops.
        """
        for t in inputs:
            if t.tape is not self:
                raise InputError("tensor belongs to a different tape")
        requires_grad = any(t.requires_grad for t in inputs)
        out = self._new_tensor(out_values, requires_grad)
        if requires_grad:
            self._records.append((out.node_id, tuple(t.node_id for t in inputs), backward))
        return out


def backward(tape: Tape, loss: Tensor) -> dict[int, Array]:
    """Gradients of a scalar loss with respect to every grad-requiring tensor.

    Returns a map node_id -> dense gradient matrix. Fan-out accumulates
    additively; each recorded operation is visited exactly once.
    """
    if loss.tape is not tape:
        raise InputError("loss does not belong to this tape")
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got shape {loss.shape}")
    grads: dict[int, Array] = {loss.node_id: np.ones((1, 1))}
    for out_id, input_ids, rule in reversed(tape._records):
        g = grads.get(out_id)
        if g is None:
            continue
        for node_id, ig in zip(input_ids, rule(g)):
            if ig is None:
                continue
            acc = grads.get(node_id)
            grads[node_id] = ig if acc is None else acc + ig
    return grads


def _check(cond: bool, op: str, msg: str) -> None:
    if not cond:
        raise ShapeError(f"{op}: {msg}")


# ---------------------------------------------------------------------------
# core ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape[1] == b.shape[0], "matmul", f"inner dims {a.shape} x {b.shape}")
    av, bv = a.values, b.values

    def rule(g: Array):
        da = g @ bv.T if a.requires_grad else None
        db = av.T @ g if b.requires_grad else None
        return da, db

    return a.tape.record(av @ bv, (a, b), rule)


def spmm_const(adj: NormalizedAdjacency, x: Tensor) -> Tensor:
    """A_hat @ x with the adjacency held constant; grad flows back as A_hat @ g."""
    _check(x.shape[0] == adj.num_nodes, "spmm_const", f"{x.shape[0]} rows vs {adj.num_nodes} nodes")
    csr = adj._csr

    def rule(g: Array):
        return (csr @ g,)  # A_hat^T = A_hat by symmetry

    return x.tape.record(csr @ x.values, (x,), rule)


def const_csr_matmul(x: sp.spmatrix, w: Tensor) -> Tensor:
    """x @ w for a constant sparse matrix x; grad reaches w as x^T @ g."""
    xc = x.tocsr()
    _check(xc.shape[1] == w.shape[0], "const_csr_matmul", f"inner dims {xc.shape} x {w.shape}")

    def rule(g: Array):
        return (xc.T @ g,)

    return w.tape.record(np.asarray(xc @ w.values), (w,), rule)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    _check(b.shape == (1, x.shape[1]), "add_bias", f"bias {b.shape} for input {x.shape}")

    def rule(g: Array):
        db = g.sum(axis=0, keepdims=True) if b.requires_grad else None
        return g, db

    return x.tape.record(x.values + b.values, (x, b), rule)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.values, 0.0)
    mask = x.values > 0.0  # subgradient 0 at the kink

    def rule(g: Array):
        return (g * mask,)

    return x.tape.record(out, (x,), rule)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; the exact identity when not training or rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise InputError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = 1.0 - rate
    scale = (rng.random(x.shape) >= rate) / keep

    def rule(g: Array):
        return (g * scale,)

    return x.tape.record(x.values * scale, (x,), rule)


def row_sub(x: Tensor, v: Tensor) -> Tensor:
    """x_i - v for every row i, v broadcast across rows."""
    _check(v.shape == (1, x.shape[1]), "row_sub", f"row {v.shape} for input {x.shape}")

    def rule(g: Array):
        dv = -g.sum(axis=0, keepdims=True) if v.requires_grad else None
        return g, dv

    return x.tape.record(x.values - v.values, (x, v), rule)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise InputError("concat_cols needs at least one part")
    rows = parts[0].shape[0]
    _check(all(p.shape[0] == rows for p in parts), "concat_cols", "row counts differ")
    widths = [p.shape[1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def rule(g: Array):
        pieces = np.hsplit(g, splits)
        return [piece if p.requires_grad else None for piece, p in zip(pieces, parts)]

    return parts[0].tape.record(np.hstack([p.values for p in parts]), tuple(parts), rule)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise InputError("concat_rows needs at least one part")
    cols = parts[0].shape[1]
    _check(all(p.shape[1] == cols for p in parts), "concat_rows", "column counts differ")
    heights = [p.shape[0] for p in parts]
    splits = np.cumsum(heights)[:-1]

    def rule(g: Array):
        pieces = np.vsplit(g, splits)
        return [piece if p.requires_grad else None for piece, p in zip(pieces, parts)]

    return parts[0].tape.record(np.vstack([p.values for p in parts]), tuple(parts), rule)


def gather_rows(x: Tensor, index: Sequence[int]) -> Tensor:
    """Select rows by index (repeats allowed); backward scatter-adds."""
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows: index must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise InputError(f"gather_rows: index out of range for {x.shape[0]} rows")
    shape = x.shape

    def rule(g: Array):
        dx = np.zeros(shape)
        np.add.at(dx, idx, g)
        return (dx,)

    return x.tape.record(x.values[idx], (x,), rule)


def mean_rows(x: Tensor) -> Tensor:
    """Column means as a 1 x c row; gradient spreads 1/rows to every row."""
    r = x.shape[0]

    def rule(g: Array):
        return (np.repeat(g / r, r, axis=0),)

    return x.tape.record(x.values.mean(axis=0, keepdims=True), (x,), rule)


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape

    def rule(g: Array):
        return (np.full(shape, g[0, 0]),)

    return x.tape.record(np.array([[x.values.sum()]]), (x,), rule)


def mul_elem(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, "mul_elem", f"shapes {a.shape} vs {b.shape}")
    av, bv = a.values, b.values

    def rule(g: Array):
        da = g * bv if a.requires_grad else None
        db = g * av if b.requires_grad else None
        return da, db

    return a.tape.record(av * bv, (a, b), rule)


def transpose(x: Tensor) -> Tensor:
    def rule(g: Array):
        return (g.T,)

    return x.tape.record(x.values.T, (x,), rule)


def softmax_rows(x: Tensor) -> Tensor:
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def rule(g: Array):
        inner = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - inner),)

    return x.tape.record(out, (x,), rule)


def cross_entropy_rows(probs: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean over rows of -ln(probs[i, targets[i]]). Inputs are probabilities."""
    t = np.asarray(targets, dtype=np.int64)
    _check(t.shape == (probs.shape[0],), "cross_entropy_rows", f"{t.size} targets for {probs.shape[0]} rows")
    r = probs.shape[0]
    p_t = probs.values[np.arange(r), t]
    if not np.all(np.isfinite(probs.values)) or np.any(p_t <= 0.0):
        raise NumericError("cross_entropy_rows: probabilities must be finite and positive at targets")
    loss = -np.log(p_t).mean()
    shape = probs.shape

    def rule(g: Array):
        dp = np.zeros(shape)
        dp[np.arange(r), t] = -g[0, 0] / (r * p_t)
        return (dp,)

    return probs.tape.record(np.array([[loss]]), (probs,), rule)


def weighted_cross_entropy_rows(probs: Tensor, targets: Sequence[int], weights: Sequence[float]) -> Tensor:
    """Per-row weighted -ln p[target], normalized by the total weight.

    With equal weights this reduces exactly to `cross_entropy_rows`.
    """
    t = np.asarray(targets, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    _check(t.shape == (probs.shape[0],), "weighted_cross_entropy_rows", "bad target count")
    _check(w.shape == t.shape, "weighted_cross_entropy_rows", "bad weight count")
    r = probs.shape[0]
    p_t = probs.values[np.arange(r), t]
    if not np.all(np.isfinite(probs.values)) or np.any(p_t <= 0.0):
        raise NumericError("weighted_cross_entropy_rows: probabilities must be finite and positive at targets")
    w_total = w.sum()
    loss = -(w * np.log(p_t)).sum() / w_total
    shape = probs.shape

    def rule(g: Array):
        dp = np.zeros(shape)
        dp[np.arange(r), t] = -g[0, 0] * w / (w_total * p_t)
        return (dp,)

    return probs.tape.record(np.array([[loss]]), (probs,), rule)


def cosine_sim_matrix(p: Tensor) -> Tensor:
    """Pairwise cosine similarities of the rows of p (C x C, unit diagonal)."""
    norms = np.linalg.norm(p.values, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise NumericError("cosine_sim_matrix: zero-norm row, similarity undefined")
    q = p.values / norms
    sim = q @ q.T
    pv = p.values

    def rule(g: Array):
        v = g + g.T
        term1 = (v @ q) / norms
        term2 = ((v * sim).sum(axis=1, keepdims=True) / norms**2) * pv
        return (term1 - term2,)

    return p.tape.record(sim, (p,), rule)


def scalar_combine(terms: Sequence[tuple[Tensor, float]]) -> Tensor:
    """Weighted sum of 1x1 tensors: sum_i coeff_i * t_i."""
    if not terms:
        raise InputError("scalar_combine needs at least one term")
    for t, _ in terms:
        _check(t.shape == (1, 1), "scalar_combine", f"term has shape {t.shape}")
    coeffs = [float(c) for _, c in terms]
    total = sum(c * t.values[0, 0] for (t, _), c in zip(terms, coeffs))

    def rule(g: Array):
        return [g * c if t.requires_grad else None for (t, _), c in zip(terms, coeffs)]

    tape = terms[0][0].tape
    return tape.record(np.array([[total]]), tuple(t for t, _ in terms), rule)


# ---------------------------------------------------------------------------
# parameters and the optimizer


@dataclass
class Param:
    """Named persistent parameter; `value` is updated in place by adam_step."""

    name: str
    value: Array
    weight_decay: float = 0.0

    def bind(self, tape: Tape) -> Tensor:
        """Leaf tensor for this parameter, reused if already bound on the tape.

        Reuse keeps fan-out gradients accumulating on a single leaf.
        """
        t = tape._param_tensors.get(self.name)
        if t is None:
            t = tape.variable(self.value)
            tape._param_tensors[self.name] = t
        return t


def param_grads(tape: Tape, grads: dict[int, Array]) -> dict[str, Array]:
    """Re-key a backward() gradient map by the names of bound parameters."""
    return {
        name: grads[t.node_id]
        for name, t in tape._param_tensors.items()
        if t.node_id in grads
    }


@dataclass
class AdamState:
    """First/second moment buffers keyed by parameter name, plus step count."""

    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adam_step(
    params: Sequence[Param],
    grads: dict[str, Array],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update over all params that received a gradient.

    The per-parameter L2 term weight_decay * value is added to the gradient
    before the moment update. Raises NumericError (before touching any state)
    if a gradient is non-finite.
    """
    active = [p for p in params if p.name in grads]
    for p in active:
        if not np.all(np.isfinite(grads[p.name])):
            raise NumericError(f"adam_step: non-finite gradient for {p.name}")
        if grads[p.name].shape != p.value.shape:
            raise ShapeError(f"adam_step: gradient shape mismatch for {p.name}")
    state.step += 1
    t = state.step
    for p in active:
        g = grads[p.name]
        if p.weight_decay:
            g = g + p.weight_decay * p.value
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.value)
        v = state.v.get(p.name)
        if v is None:
            v = state.v[p.name] = np.zeros_like(p.value)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
