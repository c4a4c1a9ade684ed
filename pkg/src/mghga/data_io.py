"""Dataset container format, train/test splits, and result persistence.

Matrices live in a self-describing text container: a header line
``rows cols dtype`` followed by one row of values per line. Labels are one
integer per line. Checkpoints and attack results use npz archives with a JSON
metadata entry. All writers go through a temp file plus atomic rename.
"""
from __future__ import annotations

import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackResult
from .errors import ConfigError, DataFormatError, DimensionError
from .hgnn import ModelParams
from .hypergraph import check_feature_matrix

FEATURE_MODES = ("discrete", "continuous")
_DTYPES = {"int64": np.int64, "float64": np.float64}


def _atomic_write(path, write_fn):
    """Write via a sibling temp file and rename, so readers never see partial data."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path, M: np.ndarray, dtype: str = "float64"):
    if dtype not in _DTYPES:
        raise ConfigError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError("matrix container stores 2-D arrays only")
    fmt = "%d" if dtype == "int64" else "%.17g"  # 17 significant digits round-trips float64

    def write(fh):
        fh.write(f"{M.shape[0]} {M.shape[1]} {dtype}\n".encode())
        np.savetxt(fh, M.astype(_DTYPES[dtype]), fmt=fmt)

    _atomic_write(path, write)


def load_matrix(path) -> np.ndarray:
    try:
        with open(path, "r") as fh:
            header = fh.readline().split()
            if len(header) != 3 or header[2] not in _DTYPES:
                raise DataFormatError(f"{path}: bad container header {header!r}")
            try:
                rows, cols = int(header[0]), int(header[1])
            except ValueError as exc:
                raise DataFormatError(f"{path}: bad container header {header!r}") from exc
            try:
                M = np.loadtxt(fh, dtype=_DTYPES[header[2]], ndmin=2)
            except ValueError as exc:
                raise DataFormatError(f"{path}: unparseable matrix body: {exc}") from exc
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    if M.shape != (rows, cols):
        raise DataFormatError(f"{path}: header says {(rows, cols)}, body is {M.shape}")
    return M


def save_labels(path, y: np.ndarray):
    y = np.asarray(y, dtype=np.int64)

    def write(fh):
        np.savetxt(fh, y, fmt="%d")

    _atomic_write(path, write)


def load_labels(path) -> np.ndarray:
    try:
        y = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"{path}: unparseable label file: {exc}") from exc
    return y


@dataclass
class DatasetManifest:
    name: str
    feature_files: list
    label_file: str
    feature_mode: str
    n_nodes: int
    n_features: int
    n_classes: int
    notes: str = ""

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")
        if not (1 <= len(self.feature_files) <= 2):
            raise ConfigError("manifest expects 1 or 2 feature files")


@dataclass
class Dataset:
    """In-memory dataset: float64 features, integer labels."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_mode: str

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def save_dataset(ds: Dataset, directory, feature_widths=None):
    """Write container files plus manifest.json into a directory.

    feature_widths splits the feature matrix columnwise into that many files
    (used by the two-block visual datasets); default is a single file.
    """
    os.makedirs(directory, exist_ok=True)
    widths = list(feature_widths) if feature_widths else [ds.n_features]
    if sum(widths) != ds.n_features:
        raise ConfigError(f"feature_widths {widths} do not sum to {ds.n_features}")
    dtype = "int64" if ds.feature_mode == "discrete" else "float64"
    names = ["features.txt"] if len(widths) == 1 else [
        f"features{i + 1}.txt" for i in range(len(widths))
    ]
    start = 0
    for name, width in zip(names, widths):
        save_matrix(os.path.join(directory, name), ds.features[:, start:start + width], dtype)
        start += width
    save_labels(os.path.join(directory, "labels.txt"), ds.labels)
    manifest = DatasetManifest(
        name=ds.name,
        feature_files=names,
        label_file="labels.txt",
        feature_mode=ds.feature_mode,
        n_nodes=ds.n_nodes,
        n_features=ds.n_features,
        n_classes=ds.n_classes,
    )
    payload = json.dumps(manifest.__dict__, indent=2, sort_keys=True) + "\n"
    _atomic_write(os.path.join(directory, "manifest.json"), lambda fh: fh.write(payload.encode()))


def load_manifest(path) -> DatasetManifest:
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid manifest JSON: {exc}") from exc
    try:
        return DatasetManifest(**raw)
    except TypeError as exc:
        raise DataFormatError(f"{path}: manifest fields wrong: {exc}") from exc


def load_dataset(path) -> Dataset:
    """Load a dataset directory (or manifest path); two feature files are
    concatenated along the feature axis. Shapes and the discrete-mode binary
    constraint are validated against the manifest."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, "manifest.json") if os.path.isdir(path) else path
    manifest = load_manifest(manifest_path)
    base = os.path.dirname(manifest_path)

    blocks = [load_matrix(os.path.join(base, f)) for f in manifest.feature_files]
    heights = {b.shape[0] for b in blocks}
    if len(heights) != 1:
        raise DataFormatError(f"{manifest.name}: feature files disagree on node count")
    X = np.concatenate([b.astype(np.float64) for b in blocks], axis=1)
    if X.shape != (manifest.n_nodes, manifest.n_features):
        raise DataFormatError(
            f"{manifest.name}: manifest declares {(manifest.n_nodes, manifest.n_features)}, "
            f"files hold {X.shape}"
        )
    X = check_feature_matrix(X)
    if manifest.feature_mode == "discrete" and not np.all((X == 0.0) | (X == 1.0)):
        raise DataFormatError(f"{manifest.name}: discrete dataset holds non-binary values")

    y = load_labels(os.path.join(base, manifest.label_file))
    if y.shape != (manifest.n_nodes,):
        raise DataFormatError(
            f"{manifest.name}: label file holds {y.shape[0]} entries, expected {manifest.n_nodes}"
        )
    if y.min() < 0 or y.max() >= manifest.n_classes:
        raise DataFormatError(f"{manifest.name}: labels outside [0, {manifest.n_classes})")
    return Dataset(manifest.name, X, y, manifest.n_classes, manifest.feature_mode)


@dataclass
class SplitSpec:
    train_fraction: float = 0.2
    test_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.train_fraction <= 0.0 or self.test_fraction <= 0.0:
            raise ConfigError("split fractions must be positive")
        if self.train_fraction + self.test_fraction > 1.0 + 1e-12:
            raise ConfigError("split fractions must sum to at most 1")


def make_split(n_nodes: int, spec: SplitSpec):
    """Seeded shuffle; first floor(train*n) nodes train, next floor(test*n) test."""
    if n_nodes < 2:
        raise ConfigError(f"need at least 2 nodes to split, got {n_nodes}")
    n_train = int(np.floor(spec.train_fraction * n_nodes))
    n_test = int(np.floor(spec.test_fraction * n_nodes))
    if n_train < 1 or n_test < 1:
        raise ConfigError(
            f"degenerate split: {n_train} train / {n_test} test nodes from n={n_nodes}"
        )
    perm = np.random.default_rng(spec.seed).permutation(n_nodes)
    train_mask = np.zeros(n_nodes, dtype=bool)
    test_mask = np.zeros(n_nodes, dtype=bool)
    train_mask[perm[:n_train]] = True
    test_mask[perm[n_train:n_train + n_test]] = True
    return train_mask, test_mask


def _save_npz(path, meta: dict, arrays: dict):
    def write(fh):
        np.savez(fh, _meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    _atomic_write(path, write)


def _load_npz(path):
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {k: archive[k] for k in archive.files}
    except (OSError, zipfile.BadZipFile, ValueError, KeyError) as exc:
        raise DataFormatError(f"{path}: unreadable archive: {exc}") from exc
    if "_meta" not in arrays:
        raise DataFormatError(f"{path}: archive is missing its metadata entry")
    try:
        meta = json.loads(str(arrays.pop("_meta")))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: corrupt metadata: {exc}") from exc
    return meta, arrays


def save_checkpoint(params: ModelParams, path, extra: dict | None = None):
    meta = {"kind": "checkpoint", "hidden_dim": params.hidden_dim,
            "n_classes": params.n_classes}
    if extra:
        meta.update(extra)
    _save_npz(path, meta, {"theta1": params.theta1, "theta2": params.theta2})


def load_checkpoint(path) -> ModelParams:
    meta, arrays = _load_npz(path)
    if meta.get("kind") != "checkpoint" or "theta1" not in arrays or "theta2" not in arrays:
        raise DataFormatError(f"{path}: not a model checkpoint")
    return ModelParams(arrays["theta1"], arrays["theta2"])


def save_attack_result(result: AttackResult, path, config_echo: dict | None = None):
    cells = result.modified_cells
    meta = {
        "kind": "attack_result",
        "modifications_used": result.modifications_used,
        "exhausted_early": result.exhausted_early,
        "config": config_echo or {},
    }
    arrays = {
        "perturbed": result.perturbed,
        "cell_nodes": np.array([c[0] for c in cells], dtype=np.int64),
        "cell_features": np.array([c[1] for c in cells], dtype=np.int64),
        "cell_old": np.array([c[2] for c in cells], dtype=np.float64),
        "cell_new": np.array([c[3] for c in cells], dtype=np.float64),
    }
    _save_npz(path, meta, arrays)


def load_attack_result(path):
    """Returns (AttackResult, config_echo)."""
    meta, arrays = _load_npz(path)
    needed = {"perturbed", "cell_nodes", "cell_features", "cell_old", "cell_new"}
    if meta.get("kind") != "attack_result" or not needed.issubset(arrays):
        raise DataFormatError(f"{path}: not an attack result file")
    cells = [
        (int(i), int(j), float(o), float(n))
        for i, j, o, n in zip(arrays["cell_nodes"], arrays["cell_features"],
                              arrays["cell_old"], arrays["cell_new"])
    ]
    result = AttackResult(
        perturbed=arrays["perturbed"],
        modified_cells=cells,
        modifications_used=int(meta["modifications_used"]),
        exhausted_early=bool(meta["exhausted_early"]),
    )
    return result, meta.get("config", {})
