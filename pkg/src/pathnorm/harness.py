"""Config-driven experiment runner: optimizer/init/dropout grids at desk scale.

A run is a pure function of its config: weight init, epoch shuffles and
dropout masks all derive from config.seed, and the batch sequence depends
only on (seed, epoch), never on the optimizer, so different optimizers see
identical batches.  Wall-clock fields are the one exception; inject a fake
clock to make outputs bit-stable end to end.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .data import Dataset, MetricRecord, load_mnist_idx, make_synthetic, \
    read_metrics, split_validation, write_metrics
from .errors import ConfigError, NumericError
from .graph import build_layered, compute_levels
from .initialization import draw_dropout_mask, init_balanced, init_unbalanced
from .network import Batch, evaluate, loss_and_grad
from .optimizers import OPTIMIZER_KINDS, OptimizerState, optimizer_step

_SHUFFLE_STREAM = 2  # spawn-key namespace for epoch shuffles


@dataclass
class ExperimentConfig:
    """Everything a training run depends on; JSON-serializable field for field."""

    architecture: list
    dataset: str = "synthetic"       # synthetic | mnist
    mnist_dir: str | None = None
    teacher_arch: list | None = None  # synthetic teacher; defaults to architecture
    n_train: int = 10000
    n_test: int = 2000
    label_noise: float = 0.0
    data_seed: int = 0
    optimizer: str = "pathsgd"       # sgd | adagrad | pathsgd
    lr_exp: float = 2.0              # step size 10**-lr_exp
    alpha_grid: list | None = None   # integer exponents to search; None = fixed
    tune_epochs: int = 5
    holdout_n: int = 2000
    p: float = 2.0
    epsilon: float = 1e-8
    init: str = "balanced"           # balanced | unbalanced
    unbalance_k: int | None = None   # default: half the hidden units
    unbalance_seed: int | None = None
    dropout: float = 1.0             # retain probability; 1 disables dropout
    epochs: int = 30
    batch_size: int = 100
    seed: int = 0
    eval_batch_size: int = 1000
    out_dir: str | None = None

    def __post_init__(self):
        if self.dataset not in ("synthetic", "mnist"):
            raise ConfigError(f"unknown dataset kind {self.dataset!r}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("balanced", "unbalanced"):
            raise ConfigError(f"unknown init scheme {self.init!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not 0.0 < self.dropout <= 1.0:
            raise ConfigError("dropout retain probability must be in (0, 1]")
        if self.alpha_grid is not None:
            if not self.alpha_grid:
                raise ConfigError("alpha_grid must be nonempty when given")
            bad = [a for a in self.alpha_grid if int(a) != a or not 0 <= a <= 10]
            if bad:
                raise ConfigError(f"alpha_grid entries must be integers in 0..10: {bad}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "architecture" not in d:
            raise ConfigError("config needs an 'architecture' field")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def load_datasets(config: ExperimentConfig):
    """The (train, test) pair described by the config."""
    if config.dataset == "mnist":
        if not config.mnist_dir:
            raise ConfigError("mnist dataset needs mnist_dir")
        d = Path(config.mnist_dir)
        train = load_mnist_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
        test = load_mnist_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte",
                              name="mnist-test")
        if 0 < config.n_train < len(train):
            rng = np.random.Generator(np.random.PCG64(config.data_seed))
            idx = rng.choice(len(train), size=config.n_train, replace=False)
            train = Dataset("mnist-subset", train.inputs[idx], train.labels[idx],
                            train.n_classes)
        if 0 < config.n_test < len(test):
            test = Dataset("mnist-test", test.inputs[:config.n_test],
                           test.labels[:config.n_test], test.n_classes)
        return train, test
    teacher = config.teacher_arch or config.architecture
    full = make_synthetic(teacher, config.n_train + config.n_test, config.data_seed)
    train = Dataset("synthetic-train", full.inputs[:config.n_train],
                    full.labels[:config.n_train], full.n_classes)
    test = Dataset("synthetic-test", full.inputs[config.n_train:],
                   full.labels[config.n_train:], full.n_classes)
    return train, test


def _initial_weights(g, config: ExperimentConfig):
    if config.init == "balanced":
        return init_balanced(g, config.seed)
    return init_unbalanced(g, config.seed, k=config.unbalance_k,
                           unbalance_seed=config.unbalance_seed)


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_SHUFFLE_STREAM, epoch))
    return np.random.Generator(np.random.PCG64(ss)).permutation(n)


def run_training(config: ExperimentConfig, train: Dataset | None = None,
                 test: Dataset | None = None, clock=time.perf_counter):
    """Train per config and return one MetricRecord per epoch (epoch 0 included).

    A non-finite loss (or a numeric error inside the backward pass) marks the
    run diverged: an all-inf record is appended and the run stops.  wall_s
    measures the optimization loop only, not the metric evaluations.
    """
    if train is None or test is None:
        train, test = load_datasets(config)
    if len(train) == 0:
        raise ConfigError("empty training set")
    g = build_layered(config.architecture)
    if g.n_inputs != train.dim:
        raise ConfigError(f"architecture expects {g.n_inputs} inputs, "
                          f"dataset has {train.dim}")
    if train.n_classes > g.n_outputs:
        raise ConfigError(f"dataset has {train.n_classes} classes, network only "
                          f"{g.n_outputs} outputs")
    levels = compute_levels(g)
    w = _initial_weights(g, config)
    state = OptimizerState(kind=config.optimizer, lr=10.0 ** -config.lr_exp,
                           p=config.p, epsilon=config.epsilon)
    eval_retain = config.dropout if config.dropout < 1.0 else 1.0

    def measure(epoch, wall):
        tr = evaluate(g, w, train.inputs, train.labels,
                      batch_size=config.eval_batch_size, retain_prob=eval_retain)
        te = evaluate(g, w, test.inputs, test.labels,
                      batch_size=config.eval_batch_size, retain_prob=eval_retain)
        return MetricRecord(epoch=epoch, optimizer=config.optimizer,
                            ce_train=tr.loss, err_train=tr.zero_one_error,
                            err_test=te.zero_one_error, wall_s=wall)

    records = [measure(0, 0.0)]
    step = 0
    for epoch in range(1, config.epochs + 1):
        t0 = clock()
        perm = _epoch_permutation(config.seed, epoch, len(train))
        diverged = False
        for start in range(0, len(train), config.batch_size):
            idx = perm[start:start + config.batch_size]
            batch = Batch(train.inputs[idx], train.labels[idx])
            mask = (draw_dropout_mask(g, config.dropout, config.seed, step)
                    if config.dropout < 1.0 else None)
            try:
                report, grad = loss_and_grad(g, w, batch, mask)
                if not np.isfinite(report.loss):
                    raise NumericError("non-finite loss")
                w = optimizer_step(g, levels, state, w, grad)
            except NumericError:
                diverged = True
                break
            step += 1
        wall = clock() - t0
        if diverged:
            records.append(MetricRecord(epoch=epoch, optimizer=config.optimizer,
                                        ce_train=float("inf"), err_train=float("inf"),
                                        err_test=float("inf"), wall_s=wall))
            break
        records.append(measure(epoch, wall))

    if config.out_dir:
        _write_run_outputs(config, records)
    return records


def _write_run_outputs(config: ExperimentConfig, records):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(records, out / "metrics.csv", config=config.to_dict())
    last = records[-1]
    _write_csv(out / "summary.csv",
               ["optimizer", "lr_exp", "final_epoch", "ce_train", "err_train",
                "err_test", "total_wall_s", "diverged"],
               [[last.optimizer, repr(float(config.lr_exp)), last.epoch,
                 repr(last.ce_train), repr(last.err_train), repr(last.err_test),
                 repr(sum(r.wall_s for r in records)),
                 not np.isfinite(last.ce_train)]])


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def select_step_size(config: ExperimentConfig, train: Dataset | None = None,
                     clock=time.perf_counter):
    """Search the step-size grid 10**-alpha on a held-out validation split.

    Each alpha trains for config.tune_epochs on the training set minus the
    holdout; the winner reaches the lowest validation error, ties broken by
    the earlier epoch of first attainment, then by the smaller alpha.
    Returns (best_alpha, table) where table has one row per grid point.
    """
    if not config.alpha_grid:
        raise ConfigError("select_step_size needs a nonempty alpha_grid")
    if config.tune_epochs < 1:
        raise ConfigError("tune_epochs must be >= 1")
    if train is None:
        train, _ = load_datasets(config)
    sub_train, holdout = split_validation(train, config.holdout_n, config.data_seed)
    table = []
    best = None
    for alpha in config.alpha_grid:
        cfg = replace(config, lr_exp=float(alpha), epochs=config.tune_epochs,
                      alpha_grid=None, out_dir=None)
        records = run_training(cfg, train=sub_train, test=holdout, clock=clock)
        # Epoch 0 is the shared pre-training state; attainment starts at 1.
        finite = [(r.err_test, r.epoch) for r in records
                  if r.epoch >= 1 and np.isfinite(r.err_test)]
        diverged = len(records) < config.tune_epochs + 1 \
            or any(not np.isfinite(r.err_test) for r in records)
        if finite:
            err, epoch = min(finite)
            table.append({"alpha": alpha, "min_val_err": err, "epoch": epoch,
                          "diverged": diverged})
            key = (err, epoch, alpha)
            if best is None or key < best[0]:
                best = (key, alpha)
        else:
            table.append({"alpha": alpha, "min_val_err": float("inf"),
                          "epoch": -1, "diverged": True})
    if best is None:
        raise ConfigError(f"all step sizes diverged on grid {list(config.alpha_grid)}")
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "grid.csv", ["alpha", "min_val_err", "epoch", "diverged"],
                   [[r["alpha"], repr(r["min_val_err"]), r["epoch"], r["diverged"]]
                    for r in table])
    return best[1], table


def compare_report(run_dirs, out_dir=None):
    """Join per-run metrics into per-epoch comparison and final summary tables.

    Runs are aligned on the intersection of their epochs (with a warning when
    they differ); inf cells from diverged runs are preserved.
    """
    runs = []
    labels = set()
    for d in run_dirs:
        records = read_metrics(Path(d) / "metrics.csv")
        if not records:
            raise ConfigError(f"no records in {d}")
        label = records[0].optimizer
        if label in labels:
            label = f"{label}-{Path(d).name}"
        labels.add(label)
        runs.append((label, {r.epoch: r for r in records}))

    epoch_sets = [set(by_epoch) for _, by_epoch in runs]
    common = sorted(set.intersection(*epoch_sets))
    if any(s != epoch_sets[0] for s in epoch_sets):
        warnings.warn("runs cover different epochs; aligning on the intersection")

    comparison = []
    for e in common:
        row = {"epoch": e}
        for label, by_epoch in runs:
            r = by_epoch[e]
            row[f"{label}_ce"] = r.ce_train
            row[f"{label}_err_train"] = r.err_train
            row[f"{label}_err_test"] = r.err_test
        comparison.append(row)

    summary = []
    for label, by_epoch in runs:
        last = by_epoch[max(by_epoch)]
        summary.append({"optimizer": label, "epoch": last.epoch,
                        "ce_train": last.ce_train, "err_train": last.err_train,
                        "err_test": last.err_test})

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if comparison:
            header = list(comparison[0])
            _write_csv(out / "comparison.csv", header,
                       [[row["epoch"]] + [repr(row[k]) for k in header[1:]]
                        for row in comparison])
        _write_csv(out / "summary.csv",
                   ["optimizer", "epoch", "ce_train", "err_train", "err_test"],
                   [[s["optimizer"], s["epoch"], repr(s["ce_train"]),
                     repr(s["err_train"]), repr(s["err_test"])] for s in summary])
    return comparison, summary
