"""Command-line entry point: ``ntk-attractors <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiments as ex
from .activations import KINDS, Activation
from .attractor import DEFAULT_MAX_ITER, DEFAULT_TOL, basin_probe
from .kernels import Dataset, kernel_system, random_dataset
from .network import NetworkParams, TrainConfig, jacobian, load_checkpoint, save_checkpoint, train
from .regression import InitSurrogate, jacobian_infinity, spectrum
from .seeding import derive_rng


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output path; '-' writes to stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", help="flat key=value file")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _data_args(p):
    p.add_argument("--n0", type=int, default=32)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--r", type=float, default=20.0)
    p.add_argument("--data", help=".npy file with one training point per column (overrides --n0/--n/--r)")


def _dataset(args) -> Dataset:
    if args.data:
        return Dataset.from_columns(np.load(args.data), rtol=1e-8, check_rank=False)
    return random_dataset(args.n0, args.n, args.r, derive_rng(args.seed, "data"))


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ntk-attractors", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="NTK Gram matrix of a dataset")
    _data_args(p)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--activation", choices=KINDS, default="sigmoid")

    p = sub.add_parser("train", parents=[common], help="train a finite-width autoencoder")
    _data_args(p)
    p.add_argument("--width", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--activation", choices=KINDS, default="sigmoid")
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=500_000)
    p.add_argument("--save", help="checkpoint path; the data is written next to it as <path>.data.npy")

    p = sub.add_parser("spectrum", parents=[common], help="Jacobian spectra at the training points")
    _data_args(p)
    p.add_argument("--checkpoint", help="trained network; without it the zero-mode NTK Jacobian is used")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--activation", choices=KINDS, default="sigmoid")
    p.add_argument("--window", type=float, default=1e-3)

    p = sub.add_parser("basin", parents=[common], help="basin-of-attraction probe of a trained network")
    _data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sigma", type=float, nargs="+", default=[0.0])
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    sub.add_parser("verify", parents=[common], help="run every theory check")

    p = sub.add_parser("experiment", parents=[common], help="run an experiment grid")
    p.add_argument("id", choices=ex.EXPERIMENTS)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    return parser


def _emit(args, name, cols, rows):
    result = ex.ExperimentResult(name, cols, rows)
    ex.write_result(result, args.out, args.format)
    return result


def cmd_kernel(args):
    data = _dataset(args)
    ks = kernel_system(data, args.depth, Activation(args.activation))
    rows = [{"i": i, "j": j, "value": float(ks.K[i, j]), "jitter": ks.jitter, "condition": ks.condition}
            for i in range(data.n) for j in range(data.n)]
    _emit(args, "kernel", ["i", "j", "value", "jitter", "condition"], rows)
    return 0


def cmd_train(args):
    data = _dataset(args)
    net = NetworkParams.init(data.n0, [args.width] * (args.depth - 1), Activation(args.activation),
                             derive_rng(args.seed, "init"))
    res = train(net, data.X, TrainConfig(args.lr, args.threshold, args.max_iter, args.seed))
    if args.save:
        save_checkpoint(res.params, args.save)
        np.save(args.save + ".data.npy", data.X)
    rows = [{"iteration": it, "loss": loss, "converged": res.converged} for it, loss in res.losses]
    _emit(args, "train", ["iteration", "loss", "converged"], rows)
    return 0 if res.converged else 3


def _load_data_for(args):
    if not args.data and getattr(args, "checkpoint", None):
        try:
            args.data = args.checkpoint + ".data.npy"
            return _dataset(args)
        except FileNotFoundError:
            args.data = None
    return _dataset(args)


def cmd_spectrum(args):
    data = _load_data_for(args)
    rows = []
    if args.checkpoint:
        net = load_checkpoint(args.checkpoint)
        mats = [jacobian(net, data.X[:, i]) for i in range(data.n)]
    else:
        ks = kernel_system(data, args.depth, Activation(args.activation))
        mats = [jacobian_infinity(data, ks, InitSurrogate.zero(), data.X[:, i]) for i in range(data.n)]
    for i, J in enumerate(mats):
        rep = spectrum(J, args.window)
        rows.append({"point": i, "largest_norm": rep.largest_norm, "operator_norm": rep.operator_norm,
                     "count_near_one": rep.count_near_one, "window": rep.window})
    _emit(args, "spectrum", ["point", "largest_norm", "operator_norm", "count_near_one", "window"], rows)
    return 0


def cmd_basin(args):
    data = _load_data_for(args)
    net = load_checkpoint(args.checkpoint)
    rows = []
    for s in args.sigma:
        rep = basin_probe(net, data.X, s, args.samples, args.seed, args.max_iter, args.tol)
        rows.append({"sigma": s, "samples": rep.samples, "success_rate": rep.success_rate,
                     "standard_error": rep.standard_error})
    _emit(args, "basin", ["sigma", "samples", "success_rate", "standard_error"], rows)
    return 0


def _experiment_config(args, experiment: str) -> ex.ExperimentConfig:
    values = ex.parse_config_file(args.config) if args.config else {}
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ex.ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    values.update(experiment=experiment, seed=str(args.seed), format=args.format, out=args.out)
    return ex.ExperimentConfig.from_mapping(values)


def cmd_experiment(args, experiment=None):
    cfg = _experiment_config(args, experiment or args.id)
    result = ex.run_experiment(cfg)
    ex.write_result(result, cfg.out, cfg.format)
    return 1 if result.failed_hard else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handlers = {"kernel": cmd_kernel, "train": cmd_train, "spectrum": cmd_spectrum, "basin": cmd_basin,
                "verify": lambda a: cmd_experiment(a, "verify_all"), "experiment": cmd_experiment}
    try:
        return handlers[args.command](args)
    except (ex.ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
