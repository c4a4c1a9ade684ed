"""Untargeted feature-poisoning attacks against a trained surrogate.

The main attack accumulates a momentum of feature gradients, repeatedly picks
the untouched eligible cell with the largest momentum magnitude, and modifies
it: a 0/1 flip in discrete mode, a signed step of size eta in continuous mode
(with a final clamp to the clean value range). Baselines reuse the same
bookkeeping: plain gradient (momentum decay 0), random cells, and random cells
restricted to high-degree nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionError, FeatureModeError, SelectionError
from .hgnn import LabelData, ModelParams, _backward, _forward_from_agg
from .hypergraph import Hypergraph, check_feature_matrix

FEATURE_MODES = ("discrete", "continuous")

GRADIENT_ATTACKS = ("fga", "fga_d", "mghga", "mghga_d")
ATTACK_NAMES = ("random", "nda") + GRADIENT_ATTACKS


@dataclass
class AttackConfig:
    budget_factor: float = 0.05          # budget = floor(budget_factor * n_nodes)
    momentum_decay: float = 0.8
    eta: float | str = "auto"            # auto: mean of the clean feature matrix
    feature_mode: str = "discrete"
    degree_top_fraction: float | None = None  # restrict rows to this top-degree share
    seed: int = 0
    symmetric_sign: bool = False         # opt-in {-1,+1} step direction

    def __post_init__(self):
        if not (self.budget_factor > 0.0):
            raise ConfigError(f"budget_factor must be positive, got {self.budget_factor}")
        if self.momentum_decay < 0.0:
            raise ConfigError(f"momentum_decay must be >= 0, got {self.momentum_decay}")
        if isinstance(self.eta, str):
            if self.eta != "auto":
                raise ConfigError(f"eta must be a positive number or 'auto', got {self.eta!r}")
        elif not (self.eta > 0.0):
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}")
        if self.degree_top_fraction is not None and not (0.0 < self.degree_top_fraction <= 1.0):
            raise ConfigError(
                f"degree_top_fraction must be in (0, 1], got {self.degree_top_fraction}"
            )


@dataclass
class Surrogate:
    """Trained attacker-side model plus the structure it was trained on."""

    params: ModelParams
    operator: object          # dense ndarray or scipy sparse, n x n
    hypergraph: Hypergraph


@dataclass
class AttackState:
    momentum: np.ndarray                     # running gradient accumulator
    eligible: np.ndarray                     # bool n x d, cells still attackable
    touched: set = field(default_factory=set)
    iteration: int = 0


@dataclass
class AttackResult:
    perturbed: np.ndarray
    modified_cells: list                     # ordered (node, feature, old, new)
    modifications_used: int
    exhausted_early: bool = False


def compute_budget(n_nodes: int, budget_factor: float) -> int:
    delta = int(np.floor(budget_factor * n_nodes))
    if delta < 1:
        raise ConfigError(
            f"budget floor({budget_factor} * {n_nodes}) = {delta}; need at least 1"
        )
    return delta


def resolve_eta(cfg: AttackConfig, X_clean: np.ndarray) -> float:
    """Step size for continuous updates; 'auto' is the clean feature mean."""
    if cfg.eta == "auto":
        return float(X_clean.mean())
    return float(cfg.eta)


def momentum_update(F_prev: np.ndarray, grad: np.ndarray, mu: float) -> np.ndarray:
    if F_prev.shape != grad.shape:
        raise DimensionError(f"momentum {F_prev.shape} vs gradient {grad.shape}")
    return mu * F_prev + grad


def select_feature(F: np.ndarray, eligibility: np.ndarray):
    """Eligible cell with the largest |F|; ties broken lexicographically by (i, j)."""
    if F.shape != eligibility.shape:
        raise DimensionError(f"momentum {F.shape} vs eligibility {eligibility.shape}")
    if not eligibility.any():
        raise SelectionError("no eligible cell remains")
    mag = np.abs(F)
    mag[~eligibility] = -1.0
    flat = int(np.argmax(mag))  # first occurrence wins, i.e. smallest (i, j)
    return divmod(flat, F.shape[1])


def sign(x: float) -> float:
    """Step direction for continuous updates: 1 when x > 0, otherwise 0."""
    return 1.0 if x > 0.0 else 0.0


def _step_direction(x: float, symmetric: bool) -> float:
    if not symmetric:
        return sign(x)
    if x > 0.0:
        return 1.0
    return -1.0 if x < 0.0 else 0.0


def modify_discrete(X: np.ndarray, i: int, j: int) -> np.ndarray:
    """Flip one binary cell; every other cell is untouched."""
    old = X[i, j]
    if old not in (0.0, 1.0):
        raise FeatureModeError(f"cell ({i}, {j}) holds {old}, not a binary value")
    out = X.copy()
    out[i, j] = 1.0 - old
    return out


def modify_continuous(X: np.ndarray, i: int, j: int, eta: float, F: np.ndarray,
                      symmetric_sign: bool = False) -> np.ndarray:
    """Add eta * sign(F[i, j]) to one cell. A zero-direction step still counts
    against the budget by the caller's accounting."""
    if not (eta > 0.0):
        raise ConfigError(f"eta must be positive, got {eta}")
    out = X.copy()
    out[i, j] = X[i, j] + eta * _step_direction(F[i, j], symmetric_sign)
    return out


def clip_features(X: np.ndarray, x_min: float, x_max: float) -> np.ndarray:
    """Clamp every entry into [x_min, x_max] (the clean matrix's value range)."""
    if x_min > x_max:
        raise ConfigError(f"x_min {x_min} exceeds x_max {x_max}")
    return np.clip(X, x_min, x_max)


def top_degree_rows(degrees: np.ndarray, fraction: float) -> np.ndarray:
    """Boolean mask of the ceil(fraction * n) highest-degree rows, ties by index."""
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    n = degrees.shape[0]
    count = int(np.ceil(fraction * n))
    order = np.lexsort((np.arange(n), -degrees))
    mask = np.zeros(n, dtype=bool)
    mask[order[:count]] = True
    return mask


def _require_binary(X: np.ndarray):
    if not np.all((X == 0.0) | (X == 1.0)):
        raise FeatureModeError("discrete mode requires a binary feature matrix")


def _operator_column(op, i: int) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op[:, i]
    return op.getcol(i).toarray().ravel()


def _row_eligibility(cfg: AttackConfig, hypergraph: Hypergraph, n: int) -> np.ndarray:
    if cfg.degree_top_fraction is None:
        return np.ones(n, dtype=bool)
    return top_degree_rows(hypergraph.node_degrees, cfg.degree_top_fraction)


def mghga_attack(X, labels: LabelData, surrogate: Surrogate, cfg: AttackConfig) -> AttackResult:
    """Momentum-gradient feature poisoning under a cell budget.

    Each iteration recomputes the feature gradient at the current perturbed
    matrix with the surrogate's parameters and operator frozen, folds it into
    the momentum, picks the strongest untouched cell, and modifies it. One
    modification per iteration, one touch per cell, stop at the budget.
    Continuous mode clamps to the clean value range once, after the loop,
    without spending budget.
    """
    X = check_feature_matrix(X)
    n, d = X.shape
    delta = compute_budget(n, cfg.budget_factor)
    discrete = cfg.feature_mode == "discrete"
    if discrete:
        _require_binary(X)
    else:
        eta = resolve_eta(cfg, X)
        x_min, x_max = float(X.min()), float(X.max())

    op = surrogate.operator
    params = surrogate.params
    state = AttackState(
        momentum=np.zeros_like(X),
        eligible=np.repeat(_row_eligibility(cfg, surrogate.hypergraph, n)[:, None], d, axis=1),
    )
    n_eligible = int(state.eligible.sum())

    worked = X.copy()
    agg1 = op @ worked  # refreshed rank-1 as cells change
    cells = []
    exhausted = False
    while state.iteration < delta:
        if n_eligible == 0:
            exhausted = True
            break
        cache = _forward_from_agg(op, agg1, params)
        _, _, grad = _backward(op, agg1, cache, params, labels, want_features=True)
        state.momentum = momentum_update(state.momentum, grad, cfg.momentum_decay)
        i, j = select_feature(state.momentum, state.eligible)

        old = worked[i, j]
        if discrete:
            if old not in (0.0, 1.0):
                raise FeatureModeError(f"cell ({i}, {j}) holds {old}, not a binary value")
            new = 1.0 - old
        else:
            new = old + eta * _step_direction(state.momentum[i, j], cfg.symmetric_sign)
        worked[i, j] = new
        agg1[:, j] += (new - old) * _operator_column(op, i)

        state.eligible[i, j] = False
        state.touched.add((i, j))
        n_eligible -= 1
        state.iteration += 1
        cells.append((int(i), int(j), float(old), float(new)))

    if not discrete:
        worked = clip_features(worked, x_min, x_max)
        cells = [(i, j, old, float(worked[i, j])) for (i, j, old, _new) in cells]
    return AttackResult(worked, cells, len(cells), exhausted_early=exhausted)


def fga_attack(X, labels: LabelData, surrogate: Surrogate, cfg: AttackConfig) -> AttackResult:
    """Plain gradient attack: the momentum loop with decay forced to zero."""
    return mghga_attack(X, labels, surrogate, replace(cfg, momentum_decay=0.0))


def degree_constrained(attack_fn, top_fraction: float):
    """Wrap a gradient attack so only the top-fraction highest-degree rows are eligible."""
    if not (0.0 < top_fraction <= 1.0):
        raise ConfigError(f"top_fraction must be in (0, 1], got {top_fraction}")

    def constrained(X, labels, surrogate, cfg):
        return attack_fn(X, labels, surrogate, replace(cfg, degree_top_fraction=top_fraction))

    return constrained


def _random_cell_attack(X, cfg: AttackConfig, pool: np.ndarray) -> AttackResult:
    """Pick budget-many distinct cells from the pool and modify them without
    any gradient information. Shared by the random and degree-ordered baselines."""
    n, d = X.shape
    delta = compute_budget(n, cfg.budget_factor)
    discrete = cfg.feature_mode == "discrete"
    if discrete:
        _require_binary(X)
    else:
        x_min, x_max = float(X.min()), float(X.max())

    rng = np.random.default_rng(cfg.seed)
    take = min(delta, pool.shape[0])
    chosen = rng.choice(pool, size=take, replace=False)
    worked = X.copy()
    cells = []
    for flat in chosen:
        i, j = divmod(int(flat), d)
        old = worked[i, j]
        new = 1.0 - old if discrete else float(rng.uniform(x_min, x_max))
        worked[i, j] = new
        cells.append((i, j, float(old), float(new)))
    return AttackResult(worked, cells, len(cells), exhausted_early=take < delta)


def random_attack(X, cfg: AttackConfig) -> AttackResult:
    """Uniformly random cells: flip in discrete mode, redraw inside the clean
    value range in continuous mode."""
    X = check_feature_matrix(X)
    n, d = X.shape
    return _random_cell_attack(X, cfg, np.arange(n * d))


def nda_attack(X, hypergraph: Hypergraph, cfg: AttackConfig) -> AttackResult:
    """Degree-ordered baseline: cells are drawn like random_attack but only
    from the smallest set of top-degree rows whose cells cover the budget."""
    X = check_feature_matrix(X)
    n, d = X.shape
    delta = compute_budget(n, cfg.budget_factor)
    degrees = hypergraph.node_degrees
    rows = np.zeros(n, dtype=bool)
    for level in np.unique(degrees)[::-1]:
        rows |= degrees == level
        if int(rows.sum()) * d >= delta:
            break
    # all rows tied -> pool == arange(n*d) == random_attack's pool exactly
    pool = np.flatnonzero(np.repeat(rows[:, None], d, axis=1).ravel())
    return _random_cell_attack(X, cfg, pool)
