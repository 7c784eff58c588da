"""Logistic-regression local model: prediction, SGD training, evaluation.

The update leaving a node is a cumulative parameter delta (trained params
minus starting params, bias last), which composes cleanly with clipping,
noising, masking, and sample-weighted averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .telemetry import NodePartition


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass
class ModelParams:
    weights: np.ndarray
    bias: float
    version: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.size

    def as_vector(self) -> np.ndarray:
        """Flat parameter vector, bias last."""
        return np.concatenate([self.weights, [self.bias]])

    @classmethod
    def from_vector(cls, v: np.ndarray, version: int = 0) -> "ModelParams":
        return cls(weights=np.array(v[:-1]), bias=float(v[-1]), version=version)

    @classmethod
    def zeros(cls, dim: int, version: int = 0) -> "ModelParams":
        return cls(weights=np.zeros(dim), bias=0.0, version=version)


@dataclass
class GradientUpdate:
    grad: np.ndarray  # length dim + 1, bias component last
    n_samples: int
    loss_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict(params: ModelParams, features: np.ndarray) -> float:
    """Probability of the positive class for a single feature vector."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (params.dim,):
        raise ValueError(f"feature dim {x.shape} does not match model dim ({params.dim},)")
    return float(_sigmoid(params.weights @ x + params.bias))


def predict_batch(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != params.dim:
        raise ValueError("feature dim mismatch")
    return _sigmoid(X @ params.weights + params.bias)


def log_loss(params: ModelParams, X: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy, computed via log1p(exp) for stability."""
    z = np.asarray(X) @ params.weights + params.bias
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def gradient(params: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic mean log-loss gradient, bias last."""
    p = predict_batch(params, X)
    r = p - y
    gw = X.T @ r / len(y)
    gb = float(np.mean(r))
    return np.concatenate([gw, [gb]])


def train_local(
    params: ModelParams,
    partition: NodePartition,
    lr: float,
    epochs: int,
    batch: int,
    seed: int,
) -> GradientUpdate:
    """Mini-batch SGD on the partition; returns the cumulative parameter delta."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if epochs < 1 or batch < 1:
        raise ValueError("epochs and batch must be positive")
    X, y = partition.features, partition.labels
    n = len(y)
    rng = np.random.default_rng(seed)
    start = params.as_vector()
    cur = ModelParams.from_vector(start, version=params.version)
    trace = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo : lo + batch]
            g = gradient(cur, X[idx], y[idx])
            cur = ModelParams.from_vector(cur.as_vector() - lr * g, version=cur.version)
        loss = log_loss(cur, X, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss on node {partition.node_id} after epoch {len(trace) + 1}"
            )
        trace.append(loss)
    delta = cur.as_vector() - start
    return GradientUpdate(grad=delta, n_samples=n, loss_trace=trace)


def evaluate(params: ModelParams, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(accuracy at threshold 0.5, mean binary log-loss)."""
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty sample list")
    p = predict_batch(params, X)
    acc = float(np.mean((p >= 0.5).astype(np.int64) == y))
    return acc, log_loss(params, X, y)


def false_positive_rate(params: ModelParams, X: np.ndarray, y: np.ndarray) -> float:
    """Fraction of negatives predicted positive; 0.0 when there are no negatives."""
    p = predict_batch(params, X)
    neg = y == 0
    if not np.any(neg):
        return 0.0
    return float(np.mean((p[neg] >= 0.5)))
