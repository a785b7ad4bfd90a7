"""Training loops: the full prototype-driven model and the GCN baselines.

One epoch of the full model: encode all nodes, sample an episode from the
merged labels, compute prototypes, project prototypes / queries / all nodes
into the metric space, assemble the classification + self-supervised losses,
and take one Adam step. Label propagation runs once up front. The best
checkpoint is selected by validation F1-macro.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import AdamState, Param, Tape, Tensor
from .data import Dataset, Split
from .encoder import EncoderConfig, GCNLayer, encode, init_encoder
from .episodic import class_node_lists, compute_prototypes, sample_episode
from .errors import ConfigError, NumericError
from .graph import NormalizedAdjacency, normalize
from .labelprop import (
    LabelSet,
    PropagationConfig,
    make_label_set,
    pseudo_label_stats,
    run_label_propagation,
)
from .metric import (
    DistanceMetricLayer,
    MetricRepresentations,
    classification_loss,
    classify_queries,
    init_metric_layer,
    metric_embed,
    predict_nodes,
)
from .metrics import MetricsReport, compute_f1
from .ssl import proto_separation_loss, smoothing_loss

BASELINES = ("gcn", "gcn_reweight", "gcn_upsample")
MODELS = ("dpgnn",) + BASELINES


@dataclass
class TrainConfig:
    epochs: int = 1000
    learning_rate: float | None = None  # default depends on the model; see resolved_lr
    hidden_dim: int = 256
    metric_dim: int | None = None  # defaults to hidden_dim
    dropout: float = 0.5
    lambda1: float = 1.0
    lambda2: float = 1.0
    eta: float = 3.0
    k: int = 2
    seed: int = 0
    model: str = "dpgnn"
    use_label_prop: bool = True
    use_ssl: bool = True
    use_distance_metric: bool = True
    feature_norm: bool = True  # L1-normalize feature rows before encoding
    eval_every: int = 10

    def __post_init__(self):
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODELS}")
        for name in ("learning_rate", "lambda1", "lambda2", "eta"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v}")
        if self.eval_every <= 0:
            raise ConfigError(f"eval_every must be positive, got {self.eval_every}")

    def resolved_lr(self) -> float:
        """Explicit learning rate, or the per-model default.

        The prototype objective needs gentler steps than a plain GCN: at
        1e-2 the self-supervised terms drive the representations into a
        collapsed fixed point before the classification signal can act.
        """
        if self.learning_rate is not None:
            return self.learning_rate
        return 1e-3 if self.model == "dpgnn" else 1e-2


@dataclass
class ModelParams:
    """Encoder layers plus the distance-metric transform parameters."""

    layers: list[GCNLayer]
    metric: DistanceMetricLayer | None = None

    def all_params(self) -> list[Param]:
        params = []
        for layer in self.layers:
            params.extend([layer.weight, layer.bias])
        if self.metric is not None:
            params.extend([self.metric.weight, self.metric.bias])
        return params

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.all_params()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.all_params():
            p.value[...] = snap[p.name]


@dataclass
class RunResult:
    params: ModelParams
    report: MetricsReport
    history: list[dict]
    best_val_f1: float
    pseudo_stats: dict = field(default_factory=dict)
    wall_clock_sec: float = 0.0


def total_loss(parts: tuple[Tensor, Tensor | None, Tensor | None], cfg: TrainConfig) -> Tensor:
    """L = L_class + lambda1 * L_ssl_p + lambda2 * L_ssl_s.

    Terms whose flag is off are simply absent and contribute exactly zero.
    """
    l_class, l_p, l_s = parts
    terms = [(l_class, 1.0)]
    if cfg.use_ssl:
        if l_p is not None:
            terms.append((l_p, cfg.lambda1))
        if l_s is not None:
            terms.append((l_s, cfg.lambda2))
    for t, _ in terms:
        if not np.isfinite(t.values[0, 0]):
            raise NumericError("total_loss: non-finite loss part")
    return ad.scalar_combine(terms)


def _merged_labels(adj: NormalizedAdjacency, dataset: Dataset, split: Split, cfg: TrainConfig) -> LabelSet:
    labels = make_label_set(dataset.labels, split.train_idx, dataset.num_classes)
    if cfg.use_label_prop:
        run_label_propagation(adj, labels, PropagationConfig(k=cfg.k, eta=cfg.eta))
    else:
        labels.y_check = np.zeros_like(labels.y)
        labels.y_bar = labels.y.copy()
    return labels


def _eval_prototypes(h: np.ndarray, y_bar: np.ndarray) -> np.ndarray:
    """Class prototypes recomputed from all merged-labeled nodes."""
    pools = class_node_lists(y_bar)
    return np.vstack([h[pools[c]].mean(axis=0) for c in sorted(pools)])


def _input_features(dataset: Dataset, cfg: TrainConfig):
    """Sparse feature matrix, L1 row-normalized when configured."""
    x = dataset.features_csr()
    if not cfg.feature_norm:
        return x
    norms = np.asarray(np.abs(x).sum(axis=1)).ravel()
    return sp.diags(1.0 / np.maximum(norms, 1e-12)) @ x


def _predict_all(
    model: ModelParams,
    adj: NormalizedAdjacency,
    x: sp.spmatrix,
    y_bar: np.ndarray,
    cfg: TrainConfig,
) -> np.ndarray:
    """Clean forward pass and per-node class predictions."""
    tape = Tape()
    h = encode(tape, adj, x, model.layers, cfg.dropout, False, np.random.default_rng(0))
    hv = h.values
    protos = _eval_prototypes(hv, y_bar)
    if cfg.use_distance_metric:
        return predict_nodes(hv, protos, model.metric)
    return (hv @ protos.T).argmax(axis=1)


def train(dataset: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    """Run the full model; returns trained params, test metrics, and history."""
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    adj = normalize(dataset.graph)
    labels = _merged_labels(adj, dataset, split, cfg)
    y_bar = labels.y_bar

    enc_cfg = EncoderConfig(
        input_dim=dataset.num_features,
        hidden_dim=cfg.hidden_dim,
        dropout_rate=cfg.dropout,
    )
    model = ModelParams(
        layers=init_encoder(rng, enc_cfg),
        metric=init_metric_layer(
            rng, cfg.hidden_dim, dataset.num_classes, cfg.metric_dim or cfg.hidden_dim
        ),
    )
    params = model.all_params()
    state = AdamState()
    lr = cfg.resolved_lr()
    x = _input_features(dataset, cfg)

    history: list[dict] = []
    best_val = -1.0
    best_snap = model.snapshot()
    for epoch in range(1, cfg.epochs + 1):
        try:
            tape = Tape()
            h = encode(tape, adj, x, model.layers, cfg.dropout, True, rng)
            episode = sample_episode(y_bar, rng)
            protos = compute_prototypes(h, episode)
            h_q = ad.gather_rows(h, episode.query_indices())

            if cfg.use_distance_metric:
                w = model.metric.weight.bind(tape)
                b = model.metric.bias.bind(tape)
                reps = MetricRepresentations(
                    g_support=metric_embed(protos.matrix, protos, w, b),
                    g_query=metric_embed(h_q, protos, w, b),
                    g_all=metric_embed(h, protos, w, b) if cfg.use_ssl else None,
                )
            else:
                reps = MetricRepresentations(
                    g_support=protos.matrix, g_query=h_q, g_all=h if cfg.use_ssl else None
                )
            f = classify_queries(reps.g_query, reps.g_support)
            l_class = classification_loss(f)

            l_p = l_s = None
            if cfg.use_ssl:
                l_p = proto_separation_loss(protos)
                l_s = smoothing_loss(reps.g_all, dataset.graph)

            loss = total_loss((l_class, l_p, l_s), cfg)
            grads = ad.backward(tape, loss)
            ad.adam_step(params, ad.param_grads(tape, grads), state, lr)
        except NumericError as err:
            raise NumericError(f"training diverged at epoch {epoch}: {err}") from err

        history.append(
            {
                "epoch": epoch,
                "loss": float(loss.values[0, 0]),
                "loss_class": float(l_class.values[0, 0]),
                "loss_ssl_p": float(l_p.values[0, 0]) if l_p is not None else 0.0,
                "loss_ssl_s": float(l_s.values[0, 0]) if l_s is not None else 0.0,
            }
        )

        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            preds = _predict_all(model, adj, x, y_bar, cfg)
            val_f1 = compute_f1(preds[split.val_idx], dataset.labels[split.val_idx], dataset.num_classes).f1_macro
            if val_f1 > best_val:
                best_val = val_f1
                best_snap = model.snapshot()

    model.restore(best_snap)
    preds = _predict_all(model, adj, x, y_bar, cfg)
    report = compute_f1(preds[split.test_idx], dataset.labels[split.test_idx], dataset.num_classes)
    stats = pseudo_label_stats(labels, dataset.labels, split.val_idx) if cfg.use_label_prop else {}
    return RunResult(
        params=model,
        report=report,
        history=history,
        best_val_f1=best_val,
        pseudo_stats=stats,
        wall_clock_sec=time.perf_counter() - start,
    )


def _class_weights(labels: np.ndarray, train_idx: np.ndarray, num_classes: int) -> np.ndarray:
    counts = np.bincount(labels[train_idx], minlength=num_classes).astype(np.float64)
    return train_idx.size / counts


def _upsampled_indices(labels: np.ndarray, train_idx: np.ndarray, num_classes: int) -> np.ndarray:
    """Duplicate each class's training indices (cycling) up to the max count."""
    counts = np.bincount(labels[train_idx], minlength=num_classes)
    target = counts.max()
    parts = []
    for c in range(num_classes):
        pool = train_idx[labels[train_idx] == c]
        parts.append(np.resize(pool, target))
    return np.concatenate(parts)


def train_baseline(dataset: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    """Standard 2-layer GCN with softmax cross entropy, optionally re-weighted
    or with minority embeddings duplicated before the loss."""
    if cfg.model not in BASELINES:
        raise ConfigError(f"train_baseline: unknown baseline {cfg.model!r}")
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    adj = normalize(dataset.graph)
    enc_cfg = EncoderConfig(
        input_dim=dataset.num_features,
        hidden_dim=cfg.hidden_dim,
        dropout_rate=cfg.dropout,
    )
    model = ModelParams(layers=init_encoder(rng, enc_cfg, out_dim=dataset.num_classes))
    params = model.all_params()
    state = AdamState()
    lr = cfg.resolved_lr()
    x = _input_features(dataset, cfg)

    train_idx = split.train_idx
    targets = dataset.labels[train_idx]
    weights = None
    if cfg.model == "gcn_reweight":
        weights = _class_weights(dataset.labels, train_idx, dataset.num_classes)[targets]
    elif cfg.model == "gcn_upsample":
        train_idx = _upsampled_indices(dataset.labels, split.train_idx, dataset.num_classes)
        targets = dataset.labels[train_idx]

    def predict() -> np.ndarray:
        tape = Tape()
        logits = encode(tape, adj, x, model.layers, cfg.dropout, False, np.random.default_rng(0))
        return logits.values.argmax(axis=1)

    history: list[dict] = []
    best_val = -1.0
    best_snap = model.snapshot()
    for epoch in range(1, cfg.epochs + 1):
        try:
            tape = Tape()
            logits = encode(tape, adj, x, model.layers, cfg.dropout, True, rng)
            probs = ad.softmax_rows(ad.gather_rows(logits, train_idx))
            if weights is not None:
                loss = ad.weighted_cross_entropy_rows(probs, targets, weights)
            else:
                loss = ad.cross_entropy_rows(probs, targets)
            grads = ad.backward(tape, loss)
            ad.adam_step(params, ad.param_grads(tape, grads), state, lr)
        except NumericError as err:
            raise NumericError(f"training diverged at epoch {epoch}: {err}") from err
        history.append({"epoch": epoch, "loss": float(loss.values[0, 0])})

        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            preds = predict()
            val_f1 = compute_f1(preds[split.val_idx], dataset.labels[split.val_idx], dataset.num_classes).f1_macro
            if val_f1 > best_val:
                best_val = val_f1
                best_snap = model.snapshot()

    model.restore(best_snap)
    preds = predict()
    report = compute_f1(preds[split.test_idx], dataset.labels[split.test_idx], dataset.num_classes)
    return RunResult(
        params=model,
        report=report,
        history=history,
        best_val_f1=best_val,
        wall_clock_sec=time.perf_counter() - start,
    )


def run_model(dataset: Dataset, split: Split, cfg: TrainConfig) -> RunResult:
    """Dispatch to the full model or a baseline based on cfg.model."""
    if cfg.model == "dpgnn":
        return train(dataset, split, cfg)
    return train_baseline(dataset, split, cfg)


def ablation_config(cfg: TrainConfig, variant: str) -> TrainConfig:
    """Configs for the four study variants: full, no_lp, no_ssl, no_lp_ssl."""
    flags = {
        "full": (True, True),
        "no_lp": (False, True),
        "no_ssl": (True, False),
        "no_lp_ssl": (False, False),
    }
    if variant not in flags:
        raise ConfigError(f"unknown ablation variant {variant!r}")
    lp, ssl_on = flags[variant]
    return replace(cfg, model="dpgnn", use_label_prop=lp, use_ssl=ssl_on)
