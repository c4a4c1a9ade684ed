import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mghga import (
    AttackConfig,
    ConfigError,
    FeatureModeError,
    SelectionError,
    Surrogate,
    build_knn_hypergraph,
    clip_features,
    compute_budget,
    degree_constrained,
    fga_attack,
    grad_features,
    mghga_attack,
    modify_continuous,
    modify_discrete,
    momentum_update,
    nda_attack,
    normalized_operator,
    random_attack,
    select_feature,
    sign,
)
from mghga.attack import resolve_eta, top_degree_rows
from mghga.hgnn import LabelData
from tests.conftest import trained_surrogate


def small_attack_instance(seed, n=8, d=4, discrete=True):
    """Seeded tiny dataset plus a trained surrogate for attack-loop tests."""
    rng = np.random.default_rng(seed)
    if discrete:
        X = (rng.random((n, d)) < 0.4).astype(np.float64)
    else:
        X = rng.random((n, d))
    y = rng.integers(0, 2, n)
    train_mask = np.zeros(n, dtype=bool)
    train_mask[: n // 2] = True
    labels = LabelData(y, train_mask, ~train_mask, 2)
    surrogate = trained_surrogate(X, labels, k=min(3, n - 1), seed=seed)
    return X, labels, surrogate


def resimulate(X, labels, surrogate, cfg):
    """Independent re-simulation of the attack loop.

    Recomputes the momentum from the full gradient history each step, scans
    eligible cells with an explicit double loop, and tracks state in plain
    Python structures.
    """
    X = X.astype(np.float64).copy()
    n, d = X.shape
    delta = int(np.floor(cfg.budget_factor * n))
    if cfg.degree_top_fraction is not None:
        allowed_rows = top_degree_rows(surrogate.hypergraph.node_degrees,
                                       cfg.degree_top_fraction)
    else:
        allowed_rows = np.ones(n, dtype=bool)
    if cfg.feature_mode == "continuous":
        eta = X.mean() if cfg.eta == "auto" else float(cfg.eta)
        lo, hi = X.min(), X.max()
    history = []
    touched = set()
    cells = []
    for _ in range(delta):
        eligible = [(i, j) for i in range(n) for j in range(d)
                    if allowed_rows[i] and (i, j) not in touched]
        if not eligible:
            break
        history.append(grad_features(surrogate.operator, X, surrogate.params, labels))
        t = len(history)
        F = np.zeros_like(X)
        for age, g in enumerate(history):
            F += cfg.momentum_decay ** (t - 1 - age) * g
        best, best_cell = -1.0, None
        for (i, j) in eligible:
            if abs(F[i, j]) > best:
                best, best_cell = abs(F[i, j]), (i, j)
        i, j = best_cell
        old = X[i, j]
        if cfg.feature_mode == "discrete":
            new = 1.0 - old
        else:
            direction = 1.0 if F[i, j] > 0 else 0.0
            new = old + eta * direction
        X[i, j] = new
        touched.add((i, j))
        cells.append((i, j, old, new))
    if cfg.feature_mode == "continuous":
        X = np.clip(X, lo, hi)
        cells = [(i, j, old, float(X[i, j])) for (i, j, old, _new) in cells]
    return X, cells


class TestMomentumUpdate:
    def test_first_iteration_passthrough(self):
        g = np.array([[1.0, -2.0]])
        assert np.array_equal(momentum_update(np.zeros_like(g), g, 0.8), g)

    def test_mu_zero_reduces_to_gradient(self):
        F = np.array([[5.0, 5.0]])
        g = np.array([[1.0, -2.0]])
        assert np.array_equal(momentum_update(F, g, 0.0), g)

    def test_constant_gradient_geometric_sum(self):
        g = np.array([[2.0, -1.0]])
        F = np.zeros_like(g)
        for _ in range(3):
            F = momentum_update(F, g, 0.8)
        assert np.allclose(F, 2.44 * g, atol=1e-12)

    @given(st.floats(0, 2), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_linear_recurrence(self, mu, seed):
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((3, 2))
        g = rng.standard_normal((3, 2))
        assert np.allclose(momentum_update(F, g, mu), mu * F + g, atol=1e-12)


class TestSelectFeature:
    def test_max_abs_wins(self):
        F = np.array([[1.0, -3.0], [2.0, 0.0]])
        assert select_feature(F, np.ones((2, 2), dtype=bool)) == (0, 1)

    def test_mask_excludes_cell(self):
        F = np.array([[1.0, -3.0], [2.0, 0.0]])
        mask = np.ones((2, 2), dtype=bool)
        mask[0, 1] = False
        assert select_feature(F, mask) == (1, 0)

    def test_no_eligible_cell_raises(self):
        with pytest.raises(SelectionError):
            select_feature(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))

    def test_tie_break_lexicographic(self):
        F = np.array([[0.0, 2.0], [-2.0, 1.0]])
        assert select_feature(F, np.ones((2, 2), dtype=bool)) == (0, 1)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_matches_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((6, 5))
        mask = rng.random((6, 5)) < 0.6
        if not mask.any():
            mask[0, 0] = True
        got = select_feature(F, mask)
        best, best_cell = -1.0, None
        for i in range(6):
            for j in range(5):
                if mask[i, j] and abs(F[i, j]) > best:
                    best, best_cell = abs(F[i, j]), (i, j)
        assert got == best_cell


class TestModifyOps:
    def test_flip_both_directions(self):
        X = np.array([[0.0, 1.0]])
        assert modify_discrete(X, 0, 0)[0, 0] == 1.0
        assert modify_discrete(X, 0, 1)[0, 1] == 0.0

    def test_flip_rejects_non_binary(self):
        with pytest.raises(FeatureModeError):
            modify_discrete(np.array([[0.5]]), 0, 0)

    def test_sign_convention(self):
        assert sign(2.5) == 1.0
        assert sign(-1.0) == 0.0
        assert sign(0.0) == 0.0

    def test_continuous_step(self):
        X = np.array([[0.2]])
        F = np.array([[3.1]])
        assert abs(modify_continuous(X, 0, 0, 0.5, F)[0, 0] - 0.7) < 1e-15

    def test_continuous_negative_gradient_no_op(self):
        X = np.array([[0.2]])
        F = np.array([[-3.1]])
        assert modify_continuous(X, 0, 0, 0.5, F)[0, 0] == 0.2

    def test_symmetric_sign_variant_steps_down(self):
        X = np.array([[0.2]])
        F = np.array([[-3.1]])
        out = modify_continuous(X, 0, 0, 0.5, F, symmetric_sign=True)
        assert abs(out[0, 0] - (-0.3)) < 1e-15

    def test_eta_auto_is_feature_mean(self):
        cfg = AttackConfig(eta="auto", feature_mode="continuous")
        assert resolve_eta(cfg, np.array([[1.0, 0.0], [0.0, 1.0]])) == 0.5

    def test_clip_examples(self):
        assert clip_features(np.array([[1.7]]), 0.0, 1.5)[0, 0] == 1.5
        assert clip_features(np.array([[0.7]]), 0.0, 1.5)[0, 0] == 0.7

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_clip_matches_elementwise_clamp(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((4, 3)) * 3
        out = clip_features(X, -1.0, 1.0)
        for i in range(4):
            for j in range(3):
                assert out[i, j] == min(max(X[i, j], -1.0), 1.0)
        assert out.min() >= -1.0 and out.max() <= 1.0


class TestBudget:
    def test_budget_floor(self):
        assert compute_budget(40, 0.05) == 2
        assert compute_budget(100, 0.05) == 5

    def test_zero_budget_rejected(self):
        with pytest.raises(ConfigError):
            compute_budget(10, 0.05)  # floor(0.5) = 0

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            AttackConfig(budget_factor=0.0)
        with pytest.raises(ConfigError):
            AttackConfig(momentum_decay=-0.1)
        with pytest.raises(ConfigError):
            AttackConfig(eta=-1.0)
        with pytest.raises(ConfigError):
            AttackConfig(feature_mode="fuzzy")
        with pytest.raises(ConfigError):
            AttackConfig(degree_top_fraction=0.0)


class TestMghgaAttack:
    def test_budget_arithmetic_on_binary_toy(self):
        rng = np.random.default_rng(0)
        X = (rng.random((40, 6)) < 0.5).astype(np.float64)
        y = rng.integers(0, 2, 40)
        labels = LabelData(y, np.arange(40) < 10, np.arange(40) >= 10, 2)
        surrogate = trained_surrogate(X, labels, seed=0)
        cfg = AttackConfig(budget_factor=0.05, feature_mode="discrete")
        res = mghga_attack(X, labels, surrogate, cfg)
        assert res.modifications_used == 2  # floor(0.05 * 40)
        diff = np.argwhere(res.perturbed != X)
        assert len(diff) == 2
        for i, j in diff:
            assert res.perturbed[i, j] == 1.0 - X[i, j]

    @pytest.mark.parametrize("mode", ["discrete", "continuous"])
    def test_matches_resimulation_oracle(self, mode):
        X, labels, surrogate = small_attack_instance(31, discrete=(mode == "discrete"))
        cfg = AttackConfig(budget_factor=0.4, momentum_decay=0.8, feature_mode=mode)
        res = mghga_attack(X, labels, surrogate, cfg)
        _, oracle_cells = resimulate(X, labels, surrogate, cfg)
        assert res.modified_cells == oracle_cells

    def test_one_touch_and_budget_invariants(self):
        X, labels, surrogate = small_attack_instance(5)
        cfg = AttackConfig(budget_factor=0.5, feature_mode="discrete")
        res = mghga_attack(X, labels, surrogate, cfg)
        cells = [(i, j) for (i, j, _, _) in res.modified_cells]
        assert len(cells) == len(set(cells))
        assert res.modifications_used <= int(0.5 * X.shape[0])
        assert np.all((res.perturbed == 0.0) | (res.perturbed == 1.0))

    def test_continuous_range_closure(self):
        X, labels, surrogate = small_attack_instance(6, discrete=False)
        cfg = AttackConfig(budget_factor=0.5, feature_mode="continuous", eta=10.0)
        res = mghga_attack(X, labels, surrogate, cfg)
        assert res.perturbed.min() >= X.min() - 1e-15
        assert res.perturbed.max() <= X.max() + 1e-15
        # log reflects post-clip values
        for i, j, _, new in res.modified_cells:
            assert res.perturbed[i, j] == new

    def test_exhaustion_returns_early_with_flag(self):
        X, labels, surrogate = small_attack_instance(7)
        cfg = AttackConfig(budget_factor=0.9, feature_mode="discrete",
                           degree_top_fraction=1e-9)  # one eligible row only
        res = mghga_attack(X, labels, surrogate, cfg)
        # budget floor(0.9 * 8) = 7 exceeds the d = 4 eligible cells
        assert res.modifications_used == X.shape[1]
        assert res.exhausted_early

    def test_non_binary_discrete_rejected(self):
        X, labels, surrogate = small_attack_instance(8, discrete=False)
        cfg = AttackConfig(budget_factor=0.5, feature_mode="discrete")
        with pytest.raises(FeatureModeError):
            mghga_attack(X, labels, surrogate, cfg)


class TestFgaReduction:
    def test_fga_equals_mu_zero_mghga(self):
        X, labels, surrogate = small_attack_instance(9)
        cfg = AttackConfig(budget_factor=0.4, momentum_decay=0.8, feature_mode="discrete")
        a = fga_attack(X, labels, surrogate, cfg)
        b = mghga_attack(X, labels, surrogate,
                         dataclasses.replace(cfg, momentum_decay=0.0))
        assert a.modified_cells == b.modified_cells
        assert np.array_equal(a.perturbed, b.perturbed)

    def test_first_cell_is_gradient_argmax(self):
        X, labels, surrogate = small_attack_instance(10)
        cfg = AttackConfig(budget_factor=0.3, feature_mode="discrete")
        res = fga_attack(X, labels, surrogate, cfg)
        F = grad_features(surrogate.operator, X, surrogate.params, labels)
        i, j, _, _ = res.modified_cells[0]
        assert (i, j) == np.unravel_index(np.argmax(np.abs(F)), F.shape)

    def test_single_flip_budget(self):
        X, labels, surrogate = small_attack_instance(11, n=20)
        cfg = AttackConfig(budget_factor=0.05, feature_mode="discrete")
        res = fga_attack(X, labels, surrogate, cfg)
        assert res.modifications_used == 1
        assert int(np.sum(res.perturbed != X)) == 1


class TestRandomAttack:
    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(1)
        X = (rng.random((30, 5)) < 0.5).astype(np.float64)
        cfg = AttackConfig(budget_factor=0.2, feature_mode="discrete", seed=7)
        a = random_attack(X, cfg)
        b = random_attack(X, cfg)
        assert a.modified_cells == b.modified_cells

    def test_discrete_stays_binary(self):
        rng = np.random.default_rng(2)
        X = (rng.random((25, 4)) < 0.5).astype(np.float64)
        res = random_attack(X, AttackConfig(budget_factor=0.4, feature_mode="discrete"))
        assert np.all((res.perturbed == 0.0) | (res.perturbed == 1.0))
        assert int(np.sum(res.perturbed != X)) == res.modifications_used

    def test_continuous_values_in_clean_range(self):
        rng = np.random.default_rng(3)
        X = rng.random((25, 4)) * 3 - 1
        res = random_attack(X, AttackConfig(budget_factor=0.4, feature_mode="continuous"))
        for _, _, _, new in res.modified_cells:
            assert X.min() <= new <= X.max()


class TestNdaAttack:
    def test_equal_degrees_reduce_to_random(self):
        rng = np.random.default_rng(4)
        X = (rng.random((12, 4)) < 0.5).astype(np.float64)
        g = build_knn_hypergraph(X, 3)
        flat = np.full(12, 10.0)
        uniform = dataclasses.replace(g, node_degrees=flat)
        cfg = AttackConfig(budget_factor=0.25, feature_mode="discrete", seed=3)
        assert nda_attack(X, uniform, cfg).modified_cells == \
            random_attack(X, cfg).modified_cells

    def test_strict_max_degree_row_takes_all_cells(self):
        rng = np.random.default_rng(5)
        X = (rng.random((20, 10)) < 0.5).astype(np.float64)
        g = build_knn_hypergraph(X, 3)
        degrees = np.ones(20)
        degrees[7] = 50.0
        spiked = dataclasses.replace(g, node_degrees=degrees)
        cfg = AttackConfig(budget_factor=0.05, feature_mode="discrete", seed=0)
        res = nda_attack(X, spiked, cfg)  # budget 1 <= d
        assert all(i == 7 for (i, _, _, _) in res.modified_cells)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        X = (rng.random((15, 4)) < 0.5).astype(np.float64)
        g = build_knn_hypergraph(X, 3)
        cfg = AttackConfig(budget_factor=0.2, feature_mode="discrete", seed=5)
        assert nda_attack(X, g, cfg).modified_cells == nda_attack(X, g, cfg).modified_cells


class TestDegreeConstraint:
    def test_top_fraction_one_is_vacuous(self):
        X, labels, surrogate = small_attack_instance(12)
        cfg = AttackConfig(budget_factor=0.4, feature_mode="discrete")
        plain = mghga_attack(X, labels, surrogate, cfg)
        wrapped = degree_constrained(mghga_attack, 1.0)(X, labels, surrogate, cfg)
        assert plain.modified_cells == wrapped.modified_cells

    def test_row_count_ceiling(self):
        degrees = np.arange(200, dtype=np.float64)
        mask = top_degree_rows(degrees, 0.01)
        assert mask.sum() == 2  # ceil(0.01 * 200)
        assert mask[199] and mask[198]

    def test_ties_broken_by_index(self):
        degrees = np.array([5.0, 7.0, 7.0, 7.0])
        mask = top_degree_rows(degrees, 0.5)
        assert mask.tolist() == [False, True, True, False]

    def test_modified_rows_within_top_set(self):
        X, labels, surrogate = small_attack_instance(13, n=12)
        cfg = AttackConfig(budget_factor=0.25, feature_mode="discrete",
                           degree_top_fraction=0.3)
        res = mghga_attack(X, labels, surrogate, cfg)
        allowed = np.flatnonzero(
            top_degree_rows(surrogate.hypergraph.node_degrees, 0.3))
        for i, _, _, _ in res.modified_cells:
            assert i in allowed
