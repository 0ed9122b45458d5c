"""Multinomial softmax-regression clip classifier.

The classifier sees only the dataset-provided clip embeddings; it never
re-embeds them, so ``infer`` passes features through and fills in logits and
pseudo-labels.
"""

import logging
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionMismatch, FormatError, NoLabeledData, ShapeMismatch, VersionError
from .uncertainty import softmax

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"SALW"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sB3xII")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 64
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    train_seed: Optional[int] = None

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def n_features(self):
        return self.weights.shape[1]

    def logits(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected (n, {self.n_features}) features, got {X.shape}")
        return X @ self.weights.T + self.bias

    @classmethod
    def zeros(cls, n_classes, n_features, train_seed=None):
        return cls(np.zeros((n_classes, n_features)), np.zeros(n_classes), train_seed)


def cross_entropy_loss(weights, bias, X, y, l2=0.0):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` (bias unpenalised)."""
    z = X @ weights.T + bias
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    nll = log_norm - z[np.arange(X.shape[0]), y]
    return float(nll.mean() + 0.5 * l2 * np.sum(weights * weights))


def cross_entropy_grad(weights, bias, X, y, l2=0.0):
    """Analytic gradient of :func:`cross_entropy_loss` w.r.t. ``(weights, bias)``."""
    n = X.shape[0]
    p = softmax(X @ weights.T + bias)
    p[np.arange(n), y] -= 1.0
    p /= n
    return p.T @ X + l2 * weights, p.sum(axis=0)


class SoftmaxRegression(ClassifierMixin, BaseEstimator):
    """Softmax regression trained by seeded mini-batch gradient descent.

    Weights start at zero, so zero epochs gives uniform probabilities.

    Parameters
    ----------
    n_classes : int or None
        Fixed class count ``C``.  Needed because a small labelled set may not
        contain every step; ``None`` infers ``max(y) + 1``.
    learning_rate, epochs, batch_size, l2, random_state
        See :class:`TrainConfig`.
    """

    def __init__(self, n_classes=None, learning_rate=0.1, epochs=200, batch_size=64, l2=1e-4, random_state=0):
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if X.shape[0] == 0:
            raise NoLabeledData("no labelled clips to train on")
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} samples but {y.shape[0]} labels")
        C = int(self.n_classes) if self.n_classes is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= C:
            raise ValueError(f"labels must lie in [0, {C})")
        if np.unique(y).size < 2:
            logger.warning("training data holds a single class; the model will predict it everywhere")
        n, D = X.shape
        W = np.zeros((C, D))
        b = np.zeros(C)
        rng = np.random.default_rng(self.random_state)
        self.loss_start_ = cross_entropy_loss(W, b, X, y, self.l2)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                gW, gb = cross_entropy_grad(W, b, X[idx], y[idx], self.l2)
                W -= self.learning_rate * gW
                b -= self.learning_rate * gb
        self.coef_ = W
        self.intercept_ = b
        self.classes_ = np.arange(C)
        self.n_features_in_ = D
        self.loss_end_ = cross_entropy_loss(W, b, X, y, self.l2)
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        return self.to_model().logits(X)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def to_model(self) -> LinearModel:
        check_is_fitted(self)
        return LinearModel(self.coef_, self.intercept_, self.random_state)


def train(pool, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Cold-start fit on every clip of the labelled videos in ``pool``."""
    labeled = pool.labeled_ids
    if not labeled:
        raise NoLabeledData("pool has no labelled videos")
    X, y = pool.stacked(labeled)
    if y is None:
        raise NoLabeledData("labelled videos are missing true steps")
    est = SoftmaxRegression(
        n_classes=pool.step_count,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        l2=cfg.l2,
        random_state=cfg.seed,
    ).fit(X, y)
    return est.to_model()


def infer(model: LinearModel, pool, ids=None):
    """Return ``pool`` with logits and pseudo-labels filled on the given videos."""
    if model.n_features != pool.feature_dim or model.n_classes != pool.step_count:
        raise DimensionMismatch(
            f"model is (C={model.n_classes}, D={model.n_features}), "
            f"pool is (C={pool.step_count}, D={pool.feature_dim})"
        )
    videos = [v.with_inference(model.logits(v.features)) for v in pool.iter_videos(ids)]
    return pool.replace_videos(videos)


def grad_check(model: LinearModel, X, y, l2=0.0, h=1e-5):
    """Max relative error between analytic and central-difference gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    W = np.array(model.weights, dtype=np.float64)
    b = np.array(model.bias, dtype=np.float64)
    gW, gb = cross_entropy_grad(W, b, X, y, l2)
    analytic = np.concatenate([gW.ravel(), gb])
    theta = np.concatenate([W.ravel(), b])
    numeric = np.empty_like(theta)
    split = W.size

    def loss_at(t):
        return cross_entropy_loss(t[:split].reshape(W.shape), t[split:], X, y, l2)

    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        numeric[i] = (loss_at(theta + step) - loss_at(theta - step)) / (2 * h)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def save_model(model: LinearModel, path):
    C, D = model.weights.shape
    with open(path, "wb") as fh:
        fh.write(_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, C, D))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())


def load_model(path) -> LinearModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _MODEL_HEADER.size:
        raise ShapeMismatch("model file shorter than header", offset=len(data))
    magic, version, C, D = _MODEL_HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != MODEL_VERSION:
        raise VersionError(f"unsupported model version {version}", offset=4)
    expected = _MODEL_HEADER.size + 8 * (C * D + C)
    if len(data) != expected:
        raise ShapeMismatch(f"model payload is {len(data)} bytes, expected {expected}", offset=min(len(data), expected))
    body = np.frombuffer(data, dtype="<f8", offset=_MODEL_HEADER.size).astype(np.float64)
    return LinearModel(body[: C * D].reshape(C, D).copy(), body[C * D :].copy())
