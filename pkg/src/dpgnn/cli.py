"""Command-line experiment harness: runs, sweeps, and ablations.

Subcommands:
    run          seeded runs of one model over several imbalanced splits
    sweep-eta    threshold sweep: pseudo-label count/accuracy and F1 curve
    sweep-ratio  imbalance-ratio sweep over majority training-node counts
    ablate       full model vs the w/o LP / w/o SSL / w/o both variants

Every command writes JSON-lines records plus a human-readable summary, and
is deterministic given --seed (timestamps live in a separate "timing" field).
Per-run seeds derive from (master seed, run index). The worker pool size is
capped by the DPGNN_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import functools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DEFAULT_MINORITY_CLASSES, Dataset, load_dataset, make_imbalanced_split
from .errors import ConfigError, DpgnnError, NumericError
from .graph import normalize
from .labelprop import PropagationConfig, make_label_set, pseudo_label_stats, run_label_propagation
from .trainer import MODELS, TrainConfig, ablation_config, run_model

DEFAULT_ETA_GRID = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
DEFAULT_RATIO_GRID = [2, 5, 10, 20, 40]


@dataclass
class ExperimentConfig:
    """Experiment-level settings plus the per-run training hyperparameters."""

    dataset: str = ""
    model: str = "dpgnn"
    num_splits: int = 20
    seed: int = 0
    out: str = "results"
    minority_classes: int | None = None  # default inferred from dataset name
    minority_train: int = 2
    majority_train: int = 20
    val_size: int = 500
    test_size: int = 1000
    epochs: int = 1000
    learning_rate: float | None = None  # per-model default when unset
    hidden_dim: int = 256
    metric_dim: int | None = None
    dropout: float = 0.5
    lambda1: float = 1.0
    lambda2: float = 1.0
    eta: float = 3.0
    k: int = 2
    eval_every: int = 10
    use_label_prop: bool = True
    use_ssl: bool = True
    use_distance_metric: bool = True
    feature_norm: bool = True

    def __post_init__(self):
        if self.num_splits < 1:
            raise ConfigError(f"num_splits must be >= 1, got {self.num_splits}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    def train_config(self, model: str, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            hidden_dim=self.hidden_dim,
            metric_dim=self.metric_dim,
            dropout=self.dropout,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            eta=self.eta,
            k=self.k,
            seed=seed,
            model=model,
            use_label_prop=self.use_label_prop,
            use_ssl=self.use_ssl,
            use_distance_metric=self.use_distance_metric,
            feature_norm=self.feature_norm,
            eval_every=self.eval_every,
        )

    def resolved_minority_classes(self, ds: Dataset) -> int:
        if self.minority_classes is not None:
            return self.minority_classes
        return DEFAULT_MINORITY_CLASSES.get(ds.name.lower(), max(1, ds.num_classes // 2))


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def build_config(config_path: str | None, overrides: dict) -> ExperimentConfig:
    """Defaults, then JSON config file values, then CLI-flag overrides."""
    values: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from None
        for key, v in loaded.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            values[key] = v
    for key, v in overrides.items():
        if v is not None:
            values[key] = v
    try:
        return ExperimentConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def derived_seeds(master: int, index: int) -> tuple[np.random.Generator, int]:
    """(split rng, training seed) for one run, deterministic in (master, index)."""
    split_ss, train_ss = np.random.SeedSequence([master, index]).spawn(2)
    return np.random.default_rng(split_ss), int(train_ss.generate_state(1, dtype=np.uint64)[0])


@functools.lru_cache(maxsize=4)
def _load_cached(path: str) -> Dataset:
    return load_dataset(path)


def _downsample(history: list[dict], limit: int = 100) -> list[dict]:
    step = max(1, len(history) // limit)
    return history[::step]


def _run_task(task: dict) -> dict:
    """One seeded run; executes in a worker process."""
    cfg = ExperimentConfig(**task["config"])
    ds = _load_cached(task["dataset_path"])
    split_rng, train_seed = derived_seeds(cfg.seed, task["run_index"])
    split = make_imbalanced_split(
        ds,
        minority_classes=task.get("minority_classes", cfg.resolved_minority_classes(ds)),
        minority_train=cfg.minority_train,
        majority_train=task.get("majority_train", cfg.majority_train),
        val=cfg.val_size,
        test=cfg.test_size,
        rng=split_rng,
    )
    train_cfg = cfg.train_config(task["model"], train_seed)
    for key, v in task.get("train_overrides", {}).items():
        train_cfg = dataclasses.replace(train_cfg, **{key: v})
    started = time.perf_counter()
    record = {
        "run": task["run_index"],
        "model": task["model"],
        "seed": train_seed,
        "config": dataclasses.asdict(train_cfg),
    }
    record.update(task.get("extra_fields", {}))
    try:
        result = run_model(ds, split, train_cfg)
    except NumericError as err:
        record["error"] = str(err)
        wall = time.perf_counter() - started
    else:
        record["metrics"] = result.report.as_dict()
        record["best_val_f1"] = round(result.best_val_f1, 6)
        record["pseudo"] = result.pseudo_stats
        record["loss_history"] = [
            {k: (round(v, 6) if isinstance(v, float) else v) for k, v in h.items()}
            for h in _downsample(result.history)
        ]
        wall = result.wall_clock_sec
    return {"record": record, "timing": {"timestamp": time.time(), "wall_clock_sec": wall}}


def _pool_size(num_tasks: int) -> int:
    threads = os.cpu_count() or 1
    cap = os.environ.get("DPGNN_THREADS")
    if cap is not None:
        threads = min(threads, max(1, int(cap)))
    return max(1, min(threads, num_tasks))


def _execute(tasks: list[dict]) -> list[dict]:
    workers = _pool_size(len(tasks))
    if workers == 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _f1_values(rows: list[dict], metric: str = "f1_macro", **match) -> np.ndarray:
    """Metric values of successful records matching the given record fields."""
    vals = [
        r["record"]["metrics"][metric]
        for r in rows
        if "metrics" in r["record"]
        and all(r["record"].get(k) == v for k, v in match.items())
    ]
    return np.array(vals)


def _summary_table(rows: list[dict], group_keys: tuple[str, ...]) -> str:
    """Aligned-column means over per-run records, grouped by the given keys."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        rec = row["record"]
        key = tuple(rec.get(k) for k in group_keys)
        groups.setdefault(key, []).append(rec)
    header = list(group_keys) + ["runs", "f1_macro", "f1_weighted", "f1_micro"]
    lines = []
    for key, recs in groups.items():
        ok = [r for r in recs if "metrics" in r]
        stats = []
        for metric in ("f1_macro", "f1_weighted", "f1_micro"):
            if ok:
                vals = np.array([r["metrics"][metric] for r in ok])
                stats.append(f"{vals.mean():.4f} +/- {vals.std():.4f}")
            else:
                stats.append("failed")
        lines.append([str(k) for k in key] + [f"{len(ok)}/{len(recs)}"] + stats)
    widths = [max(len(h), *(len(line[i]) for line in lines)) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header)]
    out.extend(fmt.format(*line) for line in lines)
    return "\n".join(out)


def _finish(out_dir: Path, rows: list[dict], summary: str, csv_lines: list[str] | None = None, csv_name: str = "curve.csv") -> None:
    _write_jsonl(out_dir / "results.jsonl", rows)
    (out_dir / "summary.txt").write_text(summary + "\n")
    if csv_lines is not None:
        (out_dir / csv_name).write_text("\n".join(csv_lines) + "\n")
    print(summary)
    print(f"\nwrote {out_dir}/results.jsonl" + (f" and {out_dir}/{csv_name}" if csv_lines else ""))


def cmd_run(cfg: ExperimentConfig) -> int:
    ds = _load_cached(cfg.dataset)
    base = dataclasses.asdict(cfg)
    tasks = [
        {"config": base, "dataset_path": cfg.dataset, "run_index": i, "model": cfg.model}
        for i in range(cfg.num_splits)
    ]
    rows = _execute(tasks)
    failures = sum(1 for r in rows if "error" in r["record"])
    summary = f"dataset: {ds.name} (n={ds.num_nodes}, C={ds.num_classes})\n"
    summary += _summary_table(rows, ("model",))
    if failures:
        summary += f"\nfailed runs: {failures}"
    _finish(Path(cfg.out), rows, summary)
    return 0


def cmd_sweep_eta(cfg: ExperimentConfig, eta_grid: list[float]) -> int:
    """Threshold sweep on a single split with the SSL terms disabled."""
    ds = _load_cached(cfg.dataset)
    split_rng, _ = derived_seeds(cfg.seed, 0)
    split = make_imbalanced_split(
        ds,
        minority_classes=cfg.resolved_minority_classes(ds),
        minority_train=cfg.minority_train,
        majority_train=cfg.majority_train,
        val=cfg.val_size,
        test=cfg.test_size,
        rng=split_rng,
    )
    adj = normalize(ds.graph)

    base = dataclasses.asdict(cfg)
    tasks = []
    for eta in eta_grid:
        tasks.append(
            {
                "config": base,
                "dataset_path": cfg.dataset,
                "run_index": 0,
                "model": "dpgnn",
                "train_overrides": {"eta": eta, "use_ssl": False},
                "extra_fields": {"eta": eta},
            }
        )
    rows = _execute(tasks)

    csv_lines = ["eta,pseudo_count,pseudo_val_accuracy,f1_macro"]
    for eta, row in zip(eta_grid, rows):
        labels = make_label_set(ds.labels, split.train_idx, ds.num_classes)
        run_label_propagation(adj, labels, PropagationConfig(k=cfg.k, eta=eta))
        stats = pseudo_label_stats(labels, ds.labels, split.val_idx)
        rec = row["record"]
        rec["pseudo"] = stats
        f1 = rec["metrics"]["f1_macro"] if "metrics" in rec else float("nan")
        csv_lines.append(
            f"{eta},{stats['pseudo_count']},{stats['pseudo_accuracy']:.4f},{f1:.4f}"
        )
    summary = "eta sweep (model without the self-supervised terms)\n" + "\n".join(csv_lines)
    _finish(Path(cfg.out), rows, summary, csv_lines, "eta_sweep.csv")
    return 0


def cmd_sweep_ratio(cfg: ExperimentConfig, majority_counts: list[int], models: list[str]) -> int:
    """Imbalance-ratio sweep: minority count fixed, majority count varied."""
    base = dataclasses.asdict(cfg)
    tasks = []
    for count in majority_counts:
        for model in models:
            for i in range(cfg.num_splits):
                tasks.append(
                    {
                        "config": base,
                        "dataset_path": cfg.dataset,
                        "run_index": i,
                        "model": model,
                        "majority_train": count,
                        "extra_fields": {"majority_train": count},
                    }
                )
    rows = _execute(tasks)

    csv_lines = ["majority_train,imbalance_ratio,model,f1_macro_mean,f1_macro_std"]
    for count in majority_counts:
        for model in models:
            vals = _f1_values(rows, model=model, majority_train=count)
            ratio = count / cfg.minority_train
            mean = vals.mean() if vals.size else float("nan")
            std = vals.std() if vals.size else float("nan")
            csv_lines.append(f"{count},{ratio:.1f},{model},{mean:.4f},{std:.4f}")
    summary = "imbalance-ratio sweep\n" + "\n".join(csv_lines)
    _finish(Path(cfg.out), rows, summary, csv_lines, "ratio_sweep.csv")
    return 0


def cmd_ablate(cfg: ExperimentConfig) -> int:
    """Four study variants plus the plain GCN reference."""
    base = dataclasses.asdict(cfg)
    variants = ["full", "no_lp", "no_ssl", "no_lp_ssl"]
    tasks = []
    for variant in variants:
        vcfg = ablation_config(cfg.train_config("dpgnn", 0), variant)
        for i in range(cfg.num_splits):
            tasks.append(
                {
                    "config": base,
                    "dataset_path": cfg.dataset,
                    "run_index": i,
                    "model": "dpgnn",
                    "train_overrides": {
                        "use_label_prop": vcfg.use_label_prop,
                        "use_ssl": vcfg.use_ssl,
                    },
                    "extra_fields": {"variant": variant},
                }
            )
    for i in range(cfg.num_splits):
        tasks.append(
            {
                "config": base,
                "dataset_path": cfg.dataset,
                "run_index": i,
                "model": "gcn",
                "extra_fields": {"variant": "gcn"},
            }
        )
    rows = _execute(tasks)
    summary = _summary_table(rows, ("variant",))
    deltas = []
    for metric in ("f1_macro", "f1_micro"):
        gcn_vals = _f1_values(rows, metric, variant="gcn")
        gcn_mean = gcn_vals.mean() if gcn_vals.size else float("nan")
        for variant in variants:
            vals = _f1_values(rows, metric, variant=variant)
            mean = vals.mean() if vals.size else float("nan")
            deltas.append(f"{variant}: {metric} delta over gcn = {mean - gcn_mean:+.4f}")
    summary += "\n" + "\n".join(deltas)
    _finish(Path(cfg.out), rows, summary)
    return 0


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="dataset directory (edges.tsv/features.csv/labels.txt)")
    p.add_argument("--model", choices=MODELS, help="model or baseline selector")
    p.add_argument("--splits", type=int, dest="num_splits", help="number of seeded splits")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--epochs", type=int, help="training epochs per run")
    p.add_argument("--lr", type=float, dest="learning_rate", help="Adam learning rate")
    p.add_argument("--lambda1", type=float, help="prototype-separation loss weight")
    p.add_argument("--lambda2", type=float, help="smoothing loss weight")
    p.add_argument("--eta", type=float, help="pseudo-label gain threshold")
    p.add_argument("--k", type=int, help="propagation hop count")
    p.add_argument("--dropout", type=float, help="dropout rate")
    p.add_argument("--hidden", type=int, dest="hidden_dim", help="encoder hidden units")
    p.add_argument("--eval-every", type=int, dest="eval_every", help="validation cadence in epochs")
    p.add_argument("--minority-classes", type=int, dest="minority_classes", help="number of minority classes")
    p.add_argument("--minority-train", type=int, dest="minority_train", help="train nodes per minority class")
    p.add_argument("--majority-train", type=int, dest="majority_train", help="train nodes per majority class")
    p.add_argument("--val-size", type=int, dest="val_size", help="validation node count")
    p.add_argument("--test-size", type=int, dest="test_size", help="test node count")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON config file; flags override its values")


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpgnn", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="seeded runs of one model")
    _add_common_flags(p_run)

    p_eta = sub.add_parser("sweep-eta", help="pseudo-label threshold sweep")
    _add_common_flags(p_eta)
    p_eta.add_argument("--etas", type=_parse_float_list, default=DEFAULT_ETA_GRID, help="comma-separated thresholds")

    p_ratio = sub.add_parser("sweep-ratio", help="imbalance ratio sweep")
    _add_common_flags(p_ratio)
    p_ratio.add_argument(
        "--majority-counts",
        type=_parse_int_list,
        default=DEFAULT_RATIO_GRID,
        dest="majority_counts",
        help="comma-separated majority training-node counts",
    )
    p_ratio.add_argument(
        "--models",
        type=lambda s: [m.strip() for m in s.split(",") if m.strip()],
        default=["dpgnn", "gcn"],
        help="comma-separated models to sweep",
    )

    p_ab = sub.add_parser("ablate", help="component ablation study")
    _add_common_flags(p_ab)
    return parser


_CONFIG_FLAG_KEYS = [f.name for f in dataclasses.fields(ExperimentConfig)]


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAG_KEYS if hasattr(args, k)}
    try:
        cfg = build_config(args.config, overrides)
        if not cfg.dataset:
            raise ConfigError("--dataset (or a config file providing it) is required")
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep-eta":
            return cmd_sweep_eta(cfg, args.etas)
        if args.command == "sweep-ratio":
            return cmd_sweep_ratio(cfg, args.majority_counts, args.models)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except DpgnnError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
