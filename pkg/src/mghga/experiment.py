"""Poisoning protocol runner: train surrogate on clean data, attack, retrain
victims, report accuracy deltas. Also the sweep and transfer-matrix drivers.

Per repeat: (1) split; (2) surrogate hypergraph from clean features, surrogate
trained on it; (3) attack produces perturbed features; (4) victim hypergraph
rebuilt from the perturbed features, victim trained from fresh initialization;
(5) a clean victim trained the same way on clean features; (6) both test
accuracies recorded. Clean and attacked victims share the split and the
initialization seed inside a repeat so the difference isolates the attack.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .attack import (
    ATTACK_NAMES,
    GRADIENT_ATTACKS,
    AttackConfig,
    Surrogate,
    compute_budget,
    fga_attack,
    mghga_attack,
    nda_attack,
    random_attack,
)
from .data_io import Dataset, SplitSpec, load_dataset, make_split
from .errors import ConfigError, DataFormatError, MGHGAError
from .hgnn import LabelData, TrainConfig, accuracy, forward, predict, train
from .hypergraph import (
    Hypergraph,
    build_epsilon_hypergraph,
    build_knn_hypergraph,
    normalized_operator,
)

DEFAULT_DEGREE_TOP_FRACTION = 0.01

# Densify threshold: below this operator density a CSR matrix is used for the
# propagation products. Purely a speed knob; results are deterministic per input.
_SPARSE_DENSITY = 0.25
_SPARSE_MIN_NODES = 256


@dataclass(frozen=True)
class Construction:
    method: str   # "knn" or "eps"
    param: float

    def __post_init__(self):
        if self.method not in ("knn", "eps"):
            raise ConfigError(f"construction method must be 'knn' or 'eps', got {self.method!r}")

    @staticmethod
    def parse(text: str) -> "Construction":
        try:
            method, raw = text.split(":")
        except ValueError:
            raise ConfigError(f"construction must look like 'knn:10' or 'eps:0.5', got {text!r}")
        if method == "knn":
            return Construction("knn", int(raw))
        if method == "eps":
            return Construction("eps", float(raw))
        raise ConfigError(f"unknown construction method {method!r}")

    def label(self) -> str:
        param = int(self.param) if self.method == "knn" else self.param
        return f"{self.method}:{param}"

    def build(self, X) -> Hypergraph:
        if self.method == "knn":
            return build_knn_hypergraph(X, int(self.param))
        return build_epsilon_hypergraph(X, float(self.param))


@dataclass
class ExperimentConfig:
    dataset: str
    surrogate_construction: Construction = Construction("knn", 10)
    victim_construction: Construction = Construction("knn", 10)
    attack: str = "none"
    attack_config: AttackConfig = field(default_factory=AttackConfig)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    n_repeats: int = 10
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        if self.attack != "none" and self.attack not in ATTACK_NAMES:
            raise ConfigError(f"unknown attack {self.attack!r}; choose from {('none',) + ATTACK_NAMES}")
        if self.n_repeats < 1:
            raise ConfigError(f"n_repeats must be >= 1, got {self.n_repeats}")


@dataclass
class RepeatRecord:
    seed: int
    clean_accuracy: float | None = None
    attacked_accuracy: float | None = None
    modifications_used: int | None = None
    modified_cells: list = field(default_factory=list)
    wall_time_s: float | None = None
    error: str | None = None


@dataclass
class ExperimentReport:
    config: dict
    records: list
    aggregate: dict


def config_echo(cfg: ExperimentConfig, feature_mode: str | None = None) -> dict:
    echo = {
        "dataset": cfg.dataset,
        "surrogate_construction": cfg.surrogate_construction.label(),
        "victim_construction": cfg.victim_construction.label(),
        "attack": cfg.attack,
        "attack_config": asdict(cfg.attack_config),
        "train_config": asdict(cfg.train_config),
        "split": asdict(cfg.split),
        "n_repeats": cfg.n_repeats,
        "seed": cfg.seed,
    }
    if feature_mode is not None:
        echo["attack_config"]["feature_mode"] = feature_mode
    return echo


def _maybe_sparse(op: np.ndarray):
    n = op.shape[0]
    if n >= _SPARSE_MIN_NODES:
        density = np.count_nonzero(op) / (n * n)
        if density < _SPARSE_DENSITY:
            return sp.csr_matrix(op)
    return op


def _build_operator(X, construction: Construction):
    graph = construction.build(X)
    return graph, _maybe_sparse(normalized_operator(graph))


@dataclass
class _Prepared:
    ds: Dataset
    surrogate_graph: Hypergraph | None
    surrogate_op: object | None
    victim_clean_op: object


def _prepare(ds: Dataset, cfg: ExperimentConfig) -> _Prepared:
    """Build the hypergraphs that do not depend on the repeat seed."""
    if cfg.attack != "none":
        compute_budget(ds.n_nodes, cfg.attack_config.budget_factor)  # fail fast
    needs_gradient = cfg.attack in GRADIENT_ATTACKS
    needs_graph = needs_gradient or cfg.attack == "nda"
    surrogate_graph = None
    surrogate_op = None
    if needs_graph:
        surrogate_graph = cfg.surrogate_construction.build(ds.features)
        if needs_gradient:
            surrogate_op = _maybe_sparse(normalized_operator(surrogate_graph))
    if (surrogate_graph is not None
            and cfg.victim_construction == cfg.surrogate_construction):
        victim_clean_op = (surrogate_op if surrogate_op is not None
                           else _maybe_sparse(normalized_operator(surrogate_graph)))
    else:
        _, victim_clean_op = _build_operator(ds.features, cfg.victim_construction)
    return _Prepared(ds, surrogate_graph, surrogate_op, victim_clean_op)


def _repeat_seeds(seed: int):
    children = np.random.SeedSequence(seed).spawn(4)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def _effective_attack_config(cfg: ExperimentConfig, feature_mode: str,
                             attack_seed: int) -> AttackConfig:
    acfg = replace(cfg.attack_config, feature_mode=feature_mode, seed=attack_seed)
    if cfg.attack in ("fga_d", "mghga_d") and acfg.degree_top_fraction is None:
        acfg = replace(acfg, degree_top_fraction=DEFAULT_DEGREE_TOP_FRACTION)
    return acfg


def _run_prepared(prep: _Prepared, cfg: ExperimentConfig, seed: int) -> RepeatRecord:
    ds = prep.ds
    X = ds.features
    t_start = time.perf_counter()
    split_seed, surrogate_seed, victim_seed, attack_seed = _repeat_seeds(seed)

    train_mask, test_mask = make_split(ds.n_nodes, replace(cfg.split, seed=split_seed))
    labels = LabelData(ds.labels, train_mask, test_mask, ds.n_classes)
    acfg = _effective_attack_config(cfg, ds.feature_mode, attack_seed)

    result = None
    if cfg.attack == "random":
        result = random_attack(X, acfg)
    elif cfg.attack == "nda":
        result = nda_attack(X, prep.surrogate_graph, acfg)
    elif cfg.attack in GRADIENT_ATTACKS:
        surrogate_params = train(prep.surrogate_op, X, labels,
                                 replace(cfg.train_config, seed=surrogate_seed))
        surrogate = Surrogate(surrogate_params, prep.surrogate_op, prep.surrogate_graph)
        fn = fga_attack if cfg.attack.startswith("fga") else mghga_attack
        result = fn(X, labels, surrogate, acfg)

    victim_cfg = replace(cfg.train_config, seed=victim_seed)
    clean_params = train(prep.victim_clean_op, X, labels, victim_cfg)
    clean_acc = accuracy(predict(forward(prep.victim_clean_op, X, clean_params)), labels)

    if result is None:
        attacked_acc = clean_acc
        mods = 0
        cells = []
    else:
        _, victim_op = _build_operator(result.perturbed, cfg.victim_construction)
        attacked_params = train(victim_op, result.perturbed, labels, victim_cfg)
        attacked_acc = accuracy(
            predict(forward(victim_op, result.perturbed, attacked_params)), labels)
        mods = result.modifications_used
        cells = [list(c) for c in result.modified_cells]

    return RepeatRecord(
        seed=seed,
        clean_accuracy=clean_acc,
        attacked_accuracy=attacked_acc,
        modifications_used=mods,
        modified_cells=cells,
        wall_time_s=time.perf_counter() - t_start,
    )


def run_single(cfg: ExperimentConfig, seed: int) -> RepeatRecord:
    """One full protocol pass for one seed (loads the dataset each call;
    run_experiment amortizes that across repeats)."""
    ds = load_dataset(cfg.dataset)
    return _run_prepared(_prepare(ds, cfg), cfg, seed)


def _aggregate(records: list) -> dict:
    ok = [r for r in records if r.error is None]
    agg = {"n_success": len(ok), "n_failed": len(records) - len(ok)}
    if ok:
        clean = np.array([r.clean_accuracy for r in ok])
        attacked = np.array([r.attacked_accuracy for r in ok])
        mods = np.array([r.modifications_used for r in ok])
        agg.update(
            clean_accuracy_mean=float(clean.mean()),
            clean_accuracy_std=float(clean.std()),
            attacked_accuracy_mean=float(attacked.mean()),
            attacked_accuracy_std=float(attacked.std()),
            modifications_used_mean=float(mods.mean()),
        )
    return agg


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """cfg.n_repeats independent repeats with seeds cfg.seed .. cfg.seed+n-1."""
    ds = load_dataset(cfg.dataset)
    prep = _prepare(ds, cfg)
    records = []
    for seed in range(cfg.seed, cfg.seed + cfg.n_repeats):
        try:
            records.append(_run_prepared(prep, cfg, seed))
        except MGHGAError as exc:
            records.append(RepeatRecord(seed=seed, error=f"{type(exc).__name__}: {exc}"))
    report = ExperimentReport(
        config=config_echo(cfg, feature_mode=ds.feature_mode),
        records=records,
        aggregate=_aggregate(records),
    )
    if cfg.output:
        save_report(report, cfg.output)
    return report


def save_report(report: ExperimentReport, path):
    """Line-oriented report: one config line, one line per repeat, one aggregate."""
    lines = [json.dumps({"type": "config", **report.config}, sort_keys=True)]
    for r in report.records:
        lines.append(json.dumps({"type": "repeat", **asdict(r)}, sort_keys=True))
    lines.append(json.dumps({"type": "aggregate", **report.aggregate}, sort_keys=True))
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(payload)


def load_report(path) -> ExperimentReport:
    config = None
    records = []
    aggregate = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("type", None)
            if kind == "config":
                config = obj
            elif kind == "repeat":
                obj["modified_cells"] = [list(c) for c in obj.get("modified_cells", [])]
                records.append(RepeatRecord(**obj))
            elif kind == "aggregate":
                aggregate = obj
            else:
                raise DataFormatError(f"{path}: unknown report line type {kind!r}")
    if config is None or aggregate is None:
        raise DataFormatError(f"{path}: report is missing its config or aggregate line")
    return ExperimentReport(config, records, aggregate)


SWEEP_AXES = ("lambda", "mu", "K", "eps")


def _sweep_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "lambda":
        return replace(cfg, attack_config=replace(cfg.attack_config, budget_factor=float(value)),
                       output=None)
    if axis == "mu":
        return replace(cfg, attack_config=replace(cfg.attack_config, momentum_decay=float(value)),
                       output=None)
    if axis == "K":
        c = Construction("knn", int(value))
        return replace(cfg, surrogate_construction=c, victim_construction=c, output=None)
    if axis == "eps":
        c = Construction("eps", float(value))
        return replace(cfg, surrogate_construction=c, victim_construction=c, output=None)
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def sweep(cfg: ExperimentConfig, axis: str, values, output: str | None = None):
    """One experiment per axis value, all sharing cfg.seed; returns the reports
    and optionally writes a single table artifact (one JSON line per point)."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    reports = [run_experiment(_sweep_config(cfg, axis, v)) for v in values]
    if output:
        lines = []
        for v, rep in zip(values, reports):
            lines.append(json.dumps(
                {"type": "sweep_point", "axis": axis, "value": v,
                 "aggregate": rep.aggregate, "config": rep.config}, sort_keys=True))
        with open(output, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return reports


def transfer_matrix(cfg: ExperimentConfig, surrogate_constructions, victim_constructions,
                    output: str | None = None):
    """Reports for every (surrogate construction, victim construction) pair."""
    surrogate_constructions = list(surrogate_constructions)
    victim_constructions = list(victim_constructions)
    if not surrogate_constructions or not victim_constructions:
        raise ConfigError("transfer matrix needs at least one construction per axis")
    cells = []
    for s in surrogate_constructions:
        for v in victim_constructions:
            sub = replace(cfg, surrogate_construction=s, victim_construction=v, output=None)
            cells.append((s.label(), v.label(), run_experiment(sub)))
    if output:
        lines = [
            json.dumps({"type": "transfer_cell", "surrogate": sl, "victim": vl,
                        "aggregate": rep.aggregate, "config": rep.config}, sort_keys=True)
            for sl, vl, rep in cells
        ]
        with open(output, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return cells
