"""Deterministic synthetic datasets shipped with the package.

The public node- and visual-classification corpora are not redistributable
here, so the shipped data are seeded stand-ins that match each corpus's role:
sparse binary bag-of-words matrices for the citation-style datasets and
cluster-structured continuous matrices (two feature blocks for the visual
ones). Real corpora can be ingested with the ``convert`` CLI command instead.
"""
from __future__ import annotations

import os

import numpy as np

from .data_io import Dataset, save_dataset


def make_word_dataset(name: str, n_nodes: int, n_features: int, n_classes: int,
                      *, seed: int, class_weights=None, common_frac: float = 0.1,
                      mean_active: float = 18.0, min_active: int = 5,
                      p_specific: float = 0.62, p_common: float = 0.18) -> Dataset:
    """Sparse binary bag-of-words nodes drawn from class vocabularies.

    The vocabulary splits into a common pool plus one block per class. Each
    node activates a Poisson number of words: mostly from its own class block,
    some from the common pool, the rest from other classes' blocks (the noise
    that keeps classes overlapping). Word popularity inside a block decays so
    same-class nodes share words often enough for nearest-neighbor structure.
    """
    rng = np.random.default_rng(seed)
    if class_weights is None:
        class_weights = np.ones(n_classes) / n_classes
    class_weights = np.asarray(class_weights, dtype=np.float64)
    class_weights = class_weights / class_weights.sum()

    n_common = int(common_frac * n_features)
    block = (n_features - n_common) // n_classes
    common_pool = np.arange(n_common)
    blocks = [n_common + k * block + np.arange(block) for k in range(n_classes)]
    # popularity decay inside each block
    pop = 1.0 / np.sqrt(np.arange(1, block + 1))
    pop = pop / pop.sum()
    pop_common = np.ones(max(n_common, 1)) / max(n_common, 1)

    labels = rng.choice(n_classes, size=n_nodes, p=class_weights)
    X = np.zeros((n_nodes, n_features))
    for v in range(n_nodes):
        k = labels[v]
        n_active = max(min_active, int(rng.poisson(mean_active)))
        n_spec = rng.binomial(n_active, p_specific)
        n_comm = rng.binomial(n_active - n_spec, p_common / (1.0 - p_specific))
        n_noise = n_active - n_spec - n_comm
        words = [rng.choice(blocks[k], size=min(n_spec, block), replace=False, p=pop)]
        if n_common and n_comm:
            words.append(rng.choice(common_pool, size=min(n_comm, n_common),
                                    replace=False, p=pop_common))
        for _ in range(n_noise):
            other = int(rng.integers(n_classes - 1))
            other = other if other < k else other + 1
            words.append(rng.choice(blocks[other], size=1, p=pop))
        X[v, np.concatenate(words)] = 1.0
    return Dataset(name, X, labels, n_classes, "discrete")


def make_cluster_dataset(name: str, n_nodes: int, n_features: int, n_classes: int,
                         *, seed: int, center_spread: float = 0.08,
                         noise: float = 0.035, informative_frac: float = 0.5) -> Dataset:
    """Continuous features: class centers plus Gaussian noise, clipped to [0, 1].

    Only a fraction of the dimensions carry class signal; the rest are shared
    background. Scales are chosen so typical within-class distances sit well
    below between-class ones at these dimensionalities.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n_nodes)
    n_inf = max(1, int(informative_frac * n_features))
    centers = np.full((n_classes, n_features), 0.5)
    centers[:, :n_inf] = 0.5 + center_spread * rng.standard_normal((n_classes, n_inf))
    X = centers[labels] + noise * rng.standard_normal((n_nodes, n_features))
    X = np.clip(X, 0.0, 1.0)
    return Dataset(name, X, labels, n_classes, "continuous")


def make_cora() -> Dataset:
    return make_word_dataset(
        "cora", 2485, 1433, 7, seed=20240601,
        class_weights=[0.30, 0.17, 0.15, 0.14, 0.10, 0.08, 0.06],
    )


def make_citeseer() -> Dataset:
    return make_word_dataset(
        "citeseer", 900, 1000, 6, seed=20240602,
        class_weights=[0.25, 0.21, 0.18, 0.15, 0.12, 0.09],
    )


def make_cora_ml() -> Dataset:
    return make_cluster_dataset("cora_ml", 800, 300, 7, seed=20240603)


def make_ntu() -> Dataset:
    return make_cluster_dataset("ntu", 600, 144, 10, seed=20240604)


def make_modelnet40() -> Dataset:
    return make_cluster_dataset("modelnet40", 800, 192, 10, seed=20240605)


# name -> (factory, feature file widths on disk)
SHIPPED = {
    "cora": (make_cora, None),
    "citeseer": (make_citeseer, None),
    "cora_ml": (make_cora_ml, None),
    "ntu": (make_ntu, (96, 48)),
    "modelnet40": (make_modelnet40, (128, 64)),
}


def write_shipped_datasets(root, names=None) -> dict:
    """Generate the shipped datasets into root/<name>/; returns name -> dir."""
    out = {}
    for name in (names or SHIPPED):
        factory, widths = SHIPPED[name]
        directory = os.path.join(os.fspath(root), name)
        save_dataset(factory(), directory, feature_widths=widths)
        out[name] = directory
    return out
