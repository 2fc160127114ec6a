"""Command line interface: train, norms and compare subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import PathnormError
from .graph import build_layered, parse_arch, parse_graph_file
from .harness import ExperimentConfig, compare_report, run_training, select_step_size
from .norms import group_norm, group_norm_max, path_norm_dp


def _build_parser():
    parser = argparse.ArgumentParser(prog="pathnorm",
                                     description="Path-SGD training and path-norm tools")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a training experiment")
    t.add_argument("--config", type=Path, help="JSON experiment config")
    t.add_argument("--arch", help="layered architecture, e.g. 784x4000x4000x10")
    t.add_argument("--data", choices=["mnist", "synthetic"])
    t.add_argument("--mnist-dir", type=Path)
    t.add_argument("--opt", choices=["sgd", "adagrad", "pathsgd"])
    t.add_argument("--lr-exp", type=float, help="step size exponent: lr = 10**-alpha")
    t.add_argument("--alpha-grid", help="comma list of integer exponents to search")
    t.add_argument("--p", type=float, help="path-norm exponent")
    t.add_argument("--init", choices=["balanced", "unbalanced"])
    t.add_argument("--init-unbalance", type=int, metavar="K",
                   help="number of random unit rescalings for unbalanced init")
    t.add_argument("--unbalance-seed", type=int)
    t.add_argument("--dropout", type=float, help="retain probability; 1 disables")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--out", type=Path, help="run directory for metrics/config/summary")

    n = sub.add_parser("norms", help="print group and path norms of a weight vector")
    src = n.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", type=Path, help="graph description file")
    src.add_argument("--arch", help="layered architecture shorthand")
    n.add_argument("--weights", type=Path, required=True, help=".npy weight vector")
    n.add_argument("--p", type=float, default=2.0)

    c = sub.add_parser("compare", help="join metrics across run directories")
    c.add_argument("run_dirs", nargs="+", type=Path)
    c.add_argument("--out", type=Path, help="directory for comparison/summary CSVs")
    return parser


_TRAIN_OVERRIDES = {
    "arch": ("architecture", parse_arch),
    "data": ("dataset", str),
    "mnist_dir": ("mnist_dir", str),
    "opt": ("optimizer", str),
    "lr_exp": ("lr_exp", float),
    "p": ("p", float),
    "init": ("init", str),
    "init_unbalance": ("unbalance_k", int),
    "unbalance_seed": ("unbalance_seed", int),
    "dropout": ("dropout", float),
    "seed": ("seed", int),
    "epochs": ("epochs", int),
    "batch_size": ("batch_size", int),
    "out": ("out_dir", str),
}


def _config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    for arg_name, (field_name, conv) in _TRAIN_OVERRIDES.items():
        value = getattr(args, arg_name)
        if value is not None:
            base[field_name] = conv(value)
    if args.alpha_grid is not None:
        base["alpha_grid"] = [int(tok) for tok in args.alpha_grid.split(",")]
    return ExperimentConfig.from_dict(base)


def _cmd_train(args):
    config = _config_from_args(args)
    if config.alpha_grid:
        alpha, table = select_step_size(config)
        print(f"selected step size 10^-{alpha} from grid "
              f"{[row['alpha'] for row in table]}")
        config = replace(config, lr_exp=float(alpha), alpha_grid=None)
    records = run_training(config)
    last = records[-1]
    status = "diverged" if not np.isfinite(last.ce_train) else "done"
    print(f"{status}: optimizer={last.optimizer} epochs={last.epoch} "
          f"ce_train={last.ce_train:.6g} err_train={last.err_train:.4g} "
          f"err_test={last.err_test:.4g}")
    if config.out_dir:
        print(f"outputs written to {config.out_dir}")
    return 0


def _cmd_norms(args):
    if args.graph:
        g = parse_graph_file(Path(args.graph).read_text())
    else:
        g = build_layered(parse_arch(args.arch))
    w = np.load(args.weights)
    result = {
        "p": args.p,
        "mu_p_p": group_norm(g, w, args.p, args.p),
        "mu_p_inf": group_norm_max(g, w, args.p),
        "phi_p": path_norm_dp(g, w, args.p),
    }
    print(json.dumps(result))
    return 0


def _cmd_compare(args):
    comparison, summary = compare_report(args.run_dirs, out_dir=args.out)
    for row in summary:
        print(f"{row['optimizer']}: epoch={row['epoch']} ce={row['ce_train']:.6g} "
              f"err_train={row['err_train']:.4g} err_test={row['err_test']:.4g}")
    if args.out:
        print(f"tables written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "norms":
            return _cmd_norms(args)
        return _cmd_compare(args)
    except PathnormError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
