"""Command-line interface.

Subcommands: convert, train, attack, eval, run, sweep, transfer.
Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .attack import GRADIENT_ATTACKS, AttackConfig, Surrogate
from .attack import fga_attack, mghga_attack, nda_attack, random_attack
from .data_io import (
    Dataset,
    SplitSpec,
    load_dataset,
    make_split,
    save_attack_result,
    save_checkpoint,
    save_dataset,
)
from .errors import ConfigError, MGHGAError
from .experiment import (
    Construction,
    ExperimentConfig,
    config_echo,
    run_experiment,
    sweep,
    transfer_matrix,
    SWEEP_AXES,
)
from .hgnn import LabelData, TrainConfig, accuracy, forward, predict, train
from .hypergraph import normalized_operator


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); bad flags are config errors
        raise ConfigError(message)


def _add_common(p):
    p.add_argument("--dataset", required=True, help="dataset directory or manifest path")
    p.add_argument("--construction", default="knn:10",
                   help="hypergraph construction, knn:K or eps:E")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.2)
    p.add_argument("--test-frac", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)


def _add_attack_flags(p):
    p.add_argument("--attack", default="mghga",
                   help="none, random, nda, fga, fga_d, mghga, mghga_d")
    p.add_argument("--lambda", dest="budget_factor", type=float, default=0.05)
    p.add_argument("--mu", type=float, default=0.8)
    p.add_argument("--eta", default="auto", help="'auto' or a positive number")
    p.add_argument("--top-frac", type=float, default=None,
                   help="degree constraint for the -D variants (default 0.01)")


def build_parser() -> _Parser:
    parser = _Parser(prog="mghga", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="ingest raw feature/label files into a dataset directory")
    p.add_argument("--features", nargs="+", required=True,
                   help="1 or 2 matrix files (.npy, .npz with key 'X', or whitespace text)")
    p.add_argument("--labels", required=True, help="label file (.npy or one integer per line)")
    p.add_argument("--mode", choices=("discrete", "continuous"), required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="train on clean data and print accuracies")
    _add_common(p)
    p.add_argument("--out", default=None, help="optional checkpoint path (.npz)")

    p = sub.add_parser("attack", help="emit a perturbed dataset plus modification log")
    _add_common(p)
    _add_attack_flags(p)
    p.add_argument("--out", required=True, help="output directory for the perturbed dataset")

    p = sub.add_parser("eval", help="train a victim on the given dataset and print accuracy")
    _add_common(p)

    p = sub.add_parser("run", help="full protocol: surrogate, attack, victims, report")
    _add_common(p)
    _add_attack_flags(p)
    p.add_argument("--surrogate-construction", default=None)
    p.add_argument("--victim-construction", default=None)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", default=None, help="report path (JSON lines)")

    p = sub.add_parser("sweep", help="run the protocol across one axis of values")
    _add_common(p)
    _add_attack_flags(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", default=None, help="sweep table path")

    p = sub.add_parser("transfer", help="surrogate x victim construction matrix")
    _add_common(p)
    _add_attack_flags(p)
    p.add_argument("--surrogate-constructions", required=True, help="comma-separated, e.g. knn:10,eps:0.5")
    p.add_argument("--victim-constructions", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", default=None)

    return parser


def _load_array(path):
    if path.endswith(".npy"):
        return np.load(path)
    if path.endswith(".npz"):
        with np.load(path) as archive:
            if "X" not in archive:
                raise ConfigError(f"{path}: expected an array stored under key 'X'")
            return archive["X"]
    return np.loadtxt(path, ndmin=2)


def _split_cfg(args) -> SplitSpec:
    return SplitSpec(train_fraction=args.train_frac, test_fraction=args.test_frac,
                     seed=args.seed)


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                       hidden_dim=args.hidden_dim, dropout_rate=args.dropout,
                       seed=args.seed)


def _attack_cfg(args) -> AttackConfig:
    eta = args.eta if args.eta == "auto" else float(args.eta)
    return AttackConfig(budget_factor=args.budget_factor, momentum_decay=args.mu,
                        eta=eta, degree_top_fraction=args.top_frac, seed=args.seed)


def _experiment_cfg(args) -> ExperimentConfig:
    base = Construction.parse(args.construction)
    surrogate = Construction.parse(args.surrogate_construction) \
        if getattr(args, "surrogate_construction", None) else base
    victim = Construction.parse(args.victim_construction) \
        if getattr(args, "victim_construction", None) else base
    return ExperimentConfig(
        dataset=args.dataset,
        surrogate_construction=surrogate,
        victim_construction=victim,
        attack=args.attack,
        attack_config=_attack_cfg(args),
        train_config=_train_cfg(args),
        split=_split_cfg(args),
        n_repeats=args.repeats,
        seed=args.seed,
        output=args.out,
    )


def _cmd_convert(args) -> int:
    blocks = [np.asarray(_load_array(f), dtype=np.float64) for f in args.features]
    if len(blocks) > 2:
        raise ConfigError("at most 2 feature files are supported")
    X = np.concatenate(blocks, axis=1) if len(blocks) > 1 else blocks[0]
    if args.labels.endswith(".npy"):
        y = np.load(args.labels).astype(np.int64)
    else:
        y = np.loadtxt(args.labels, dtype=np.int64, ndmin=1)
    n_classes = int(y.max()) + 1
    ds = Dataset(args.name, X, y, n_classes, args.mode)
    widths = tuple(b.shape[1] for b in blocks) if len(blocks) > 1 else None
    save_dataset(ds, args.out, feature_widths=widths)
    print(json.dumps({"dataset": args.name, "n_nodes": ds.n_nodes,
                      "n_features": ds.n_features, "n_classes": n_classes,
                      "out": args.out}))
    return 0


def _trained_victim(ds, construction, args):
    train_mask, test_mask = make_split(ds.n_nodes, _split_cfg(args))
    labels = LabelData(ds.labels, train_mask, test_mask, ds.n_classes)
    graph = construction.build(ds.features)
    op = normalized_operator(graph)
    params = train(op, ds.features, labels, _train_cfg(args))
    return graph, op, params, labels


def _cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    _, op, params, labels = _trained_victim(ds, Construction.parse(args.construction), args)
    preds = predict(forward(op, ds.features, params))
    out = {"dataset": ds.name,
           "train_accuracy": accuracy(preds, labels, "train"),
           "test_accuracy": accuracy(preds, labels, "test")}
    if args.out:
        save_checkpoint(params, args.out, extra={"dataset": ds.name, "seed": args.seed})
        out["checkpoint"] = args.out
    print(json.dumps(out, sort_keys=True))
    return 0


def _cmd_attack(args) -> int:
    ds = load_dataset(args.dataset)
    if args.attack == "none":
        raise ConfigError("attack 'none' writes nothing; pick a real attack")
    construction = Construction.parse(args.construction)
    acfg = AttackConfig(budget_factor=args.budget_factor, momentum_decay=args.mu,
                        eta=args.eta if args.eta == "auto" else float(args.eta),
                        feature_mode=ds.feature_mode,
                        degree_top_fraction=args.top_frac, seed=args.seed)
    if args.attack in ("fga_d", "mghga_d") and acfg.degree_top_fraction is None:
        from .experiment import DEFAULT_DEGREE_TOP_FRACTION
        from dataclasses import replace
        acfg = replace(acfg, degree_top_fraction=DEFAULT_DEGREE_TOP_FRACTION)

    if args.attack == "random":
        result = random_attack(ds.features, acfg)
    elif args.attack == "nda":
        result = nda_attack(ds.features, construction.build(ds.features), acfg)
    elif args.attack in GRADIENT_ATTACKS:
        graph, op, params, labels = _trained_victim(ds, construction, args)
        surrogate = Surrogate(params, op, graph)
        fn = fga_attack if args.attack.startswith("fga") else mghga_attack
        result = fn(ds.features, labels, surrogate, acfg)
    else:
        raise ConfigError(f"unknown attack {args.attack!r}")

    os.makedirs(args.out, exist_ok=True)
    perturbed = Dataset(f"{ds.name}-{args.attack}", result.perturbed, ds.labels,
                        ds.n_classes, ds.feature_mode)
    save_dataset(perturbed, args.out)
    from dataclasses import asdict
    save_attack_result(result, os.path.join(args.out, "attack_result.npz"),
                       config_echo={"attack": args.attack, **asdict(acfg)})
    print(json.dumps({"attack": args.attack, "modifications_used": result.modifications_used,
                      "exhausted_early": result.exhausted_early, "out": args.out},
                     sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    ds = load_dataset(args.dataset)
    _, op, params, labels = _trained_victim(ds, Construction.parse(args.construction), args)
    preds = predict(forward(op, ds.features, params))
    print(json.dumps({"dataset": ds.name,
                      "test_accuracy": accuracy(preds, labels, "test")}, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    report = run_experiment(_experiment_cfg(args))
    print(json.dumps({"config": report.config, "aggregate": report.aggregate}, sort_keys=True))
    return 2 if report.aggregate["n_success"] == 0 else 0


def _cmd_sweep(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}")
    cfg = _experiment_cfg(args)
    reports = sweep(cfg, args.axis, values, output=args.out)
    for v, rep in zip(values, reports):
        print(json.dumps({"axis": args.axis, "value": v, "aggregate": rep.aggregate},
                         sort_keys=True))
    return 2 if all(r.aggregate["n_success"] == 0 for r in reports) else 0


def _cmd_transfer(args) -> int:
    surrogates = [Construction.parse(s) for s in args.surrogate_constructions.split(",")]
    victims = [Construction.parse(s) for s in args.victim_constructions.split(",")]
    cells = transfer_matrix(_experiment_cfg(args), surrogates, victims, output=args.out)
    for s_label, v_label, rep in cells:
        print(json.dumps({"surrogate": s_label, "victim": v_label,
                          "aggregate": rep.aggregate}, sort_keys=True))
    return 2 if all(rep.aggregate["n_success"] == 0 for _, _, rep in cells) else 0


_COMMANDS = {
    "convert": _cmd_convert,
    "train": _cmd_train,
    "attack": _cmd_attack,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "transfer": _cmd_transfer,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MGHGAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
