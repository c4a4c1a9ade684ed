"""Two-layer hypergraph network on a fixed propagation operator.

Forward pass: softmax(op @ relu(op @ X @ theta1) @ theta2). Gradients with
respect to parameters and input features are derived by hand (reverse mode
through softmax cross-entropy, the second product, relu, the first product);
nothing here relies on an autodiff framework.

The propagation operator may be a dense ndarray or a scipy sparse matrix;
only ``@`` and ``.T`` are used on it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError

LOG_CLAMP = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.001
    hidden_dim: int = 64
    dropout_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class LabelData:
    """Integer labels plus boolean train/test masks over the same node set."""

    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_mask = np.asarray(self.train_mask, dtype=bool)
        self.test_mask = np.asarray(self.test_mask, dtype=bool)
        n = self.labels.shape[0]
        if self.train_mask.shape != (n,) or self.test_mask.shape != (n,):
            raise DimensionError("masks must match the label vector length")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ConfigError("labels must lie in [0, n_classes)")
        if np.any(self.train_mask & self.test_mask):
            raise ConfigError("train and test masks overlap")
        if not self.train_mask.any():
            raise ConfigError("train mask is empty")
        if not self.test_mask.any():
            raise ConfigError("test mask is empty")

    @property
    def n_nodes(self) -> int:
        return self.labels.shape[0]


@dataclass
class ModelParams:
    theta1: np.ndarray  # d x h
    theta2: np.ndarray  # h x c

    def __post_init__(self):
        self.theta1 = np.asarray(self.theta1, dtype=np.float64)
        self.theta2 = np.asarray(self.theta2, dtype=np.float64)
        if self.theta1.ndim != 2 or self.theta2.ndim != 2:
            raise DimensionError("theta1 and theta2 must be 2-D")
        if self.theta1.shape[1] != self.theta2.shape[0]:
            raise DimensionError(
                f"hidden dims disagree: theta1 {self.theta1.shape}, theta2 {self.theta2.shape}"
            )
        if not (np.all(np.isfinite(self.theta1)) and np.all(np.isfinite(self.theta2))):
            raise ConfigError("parameters contain non-finite entries")

    @property
    def hidden_dim(self) -> int:
        return self.theta1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.theta2.shape[1]


def softmax_rows(P: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = P - P.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_shapes(op, X, params):
    n = X.shape[0]
    if op.shape != (n, n):
        raise DimensionError(f"operator shape {op.shape} does not match n_nodes={n}")
    if params.theta1.shape[0] != X.shape[1]:
        raise DimensionError(
            f"theta1 expects {params.theta1.shape[0]} features, X has {X.shape[1]}"
        )


class _ForwardCache:
    """Intermediates of one forward pass, kept for the hand-written backward."""

    __slots__ = ("pre1", "hidden", "agg2", "probs")

    def __init__(self, pre1, hidden, agg2, probs):
        self.pre1 = pre1      # op @ X @ theta1
        self.hidden = hidden  # relu(pre1), dropout already applied if any
        self.agg2 = agg2      # op @ hidden
        self.probs = probs    # softmax(agg2 @ theta2)


def _forward_from_agg(op, agg1, params, dropout_mask=None, keep_scale=1.0):
    """Forward pass given agg1 = op @ X (cached by train / attack loops)."""
    pre1 = agg1 @ params.theta1
    hidden = np.maximum(pre1, 0.0)
    if dropout_mask is not None:
        hidden = hidden * dropout_mask
        hidden *= keep_scale
    agg2 = op @ hidden
    probs = softmax_rows(agg2 @ params.theta2)
    return _ForwardCache(pre1, hidden, agg2, probs)


def forward(op, X, params: ModelParams, dropout_rate: float = 0.0, rng=None) -> np.ndarray:
    """Class-probability matrix Z, one row per node, rows summing to 1.

    Dropout (training only) zeroes hidden activations with probability
    dropout_rate and rescales survivors by 1/(1 - dropout_rate); pass the
    random source that should supply the mask.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(op, X, params)
    mask = None
    scale = 1.0
    if dropout_rate > 0.0:
        if rng is None:
            raise ConfigError("dropout requires a random source")
        mask = rng.random((X.shape[0], params.hidden_dim)) >= dropout_rate
        scale = 1.0 / (1.0 - dropout_rate)
    cache = _forward_from_agg(op, op @ X, params, mask, scale)
    return cache.probs


def loss(Z: np.ndarray, labels: LabelData) -> float:
    """Cross-entropy summed over training nodes, log clamped at 1e-12."""
    if not labels.train_mask.any():
        raise ConfigError("train mask is empty")
    train_idx = np.flatnonzero(labels.train_mask)
    p = Z[train_idx, labels.labels[train_idx]]
    return float(-np.log(np.maximum(p, LOG_CLAMP)).sum())


def predict(Z: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties go to the smallest class index."""
    return np.argmax(Z, axis=1)


def accuracy(preds: np.ndarray, labels: LabelData, on: str = "test") -> float:
    if on == "train":
        mask = labels.train_mask
    elif on == "test":
        mask = labels.test_mask
    else:
        raise ConfigError(f"on must be 'train' or 'test', got {on!r}")
    if not mask.any():
        raise ConfigError(f"{on} mask is empty")
    preds = np.asarray(preds)
    if preds.shape != labels.labels.shape:
        raise DimensionError("prediction vector length does not match labels")
    return float(np.mean(preds[mask] == labels.labels[mask]))


def _backward(op, agg1, cache, params, labels, dropout_mask=None, keep_scale=1.0,
              want_features=False):
    """Gradients of the training cross-entropy wrt theta1, theta2 and optionally X.

    dL/d(pre-softmax) for a training node is probs - onehot; other rows
    contribute nothing because the loss sums over the train mask only.
    """
    train_idx = np.flatnonzero(labels.train_mask)
    d_logits = np.zeros_like(cache.probs)
    d_logits[train_idx] = cache.probs[train_idx]
    d_logits[train_idx, labels.labels[train_idx]] -= 1.0

    g_theta2 = cache.agg2.T @ d_logits
    d_agg2 = d_logits @ params.theta2.T
    d_hidden = op.T @ d_agg2
    if dropout_mask is not None:
        d_hidden = d_hidden * dropout_mask
        d_hidden *= keep_scale
    d_pre1 = d_hidden * (cache.pre1 > 0.0)
    g_theta1 = agg1.T @ d_pre1
    if not want_features:
        return g_theta1, g_theta2, None
    g_X = (op.T @ d_pre1) @ params.theta1.T
    return g_theta1, g_theta2, g_X


def grad_params(op, X, params: ModelParams, labels: LabelData):
    """Analytic (d_theta1, d_theta2) of the training loss; dropout disabled."""
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(op, X, params)
    agg1 = op @ X
    cache = _forward_from_agg(op, agg1, params)
    g1, g2, _ = _backward(op, agg1, cache, params, labels)
    return g1, g2


def grad_features(op, X, params: ModelParams, labels: LabelData) -> np.ndarray:
    """Analytic gradient of the training loss wrt every feature entry."""
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(op, X, params)
    agg1 = op @ X
    cache = _forward_from_agg(op, agg1, params)
    _, _, gx = _backward(op, agg1, cache, params, labels, want_features=True)
    return gx


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(n_features: int, cfg: TrainConfig, n_classes: int,
                rng=None) -> ModelParams:
    """Seeded uniform Glorot initialization for both layers."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    theta1 = _glorot(rng, n_features, cfg.hidden_dim)
    theta2 = _glorot(rng, cfg.hidden_dim, n_classes)
    return ModelParams(theta1, theta2)


def train(op, X, labels: LabelData, cfg: TrainConfig) -> ModelParams:
    """Full-batch Adam on the training cross-entropy, dropout on hidden units.

    Deterministic for a fixed cfg.seed: the same stream drives initialization
    and every epoch's dropout mask.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(X.shape[1], cfg, labels.n_classes, rng=rng)
    _check_shapes(op, X, params)
    if labels.n_nodes != X.shape[0]:
        raise DimensionError("labels and features disagree on node count")

    agg1 = op @ X  # fixed during training
    n, h = X.shape[0], cfg.hidden_dim
    keep = 1.0 - cfg.dropout_rate
    m1 = np.zeros_like(params.theta1)
    v1 = np.zeros_like(params.theta1)
    m2 = np.zeros_like(params.theta2)
    v2 = np.zeros_like(params.theta2)

    for epoch in range(cfg.epochs):
        mask = None
        scale = 1.0
        if cfg.dropout_rate > 0.0:
            mask = rng.random((n, h)) >= cfg.dropout_rate
            scale = 1.0 / keep
        cache = _forward_from_agg(op, agg1, params, mask, scale)
        epoch_loss = loss(cache.probs, labels)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        g1, g2, _ = _backward(op, agg1, cache, params, labels, mask, scale)

        t = epoch + 1
        bc1 = 1.0 - ADAM_BETA1 ** t
        bc2 = 1.0 - ADAM_BETA2 ** t
        for theta, m, v, g in ((params.theta1, m1, v1, g1), (params.theta2, m2, v2, g2)):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            theta -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)

    return params
