"""Dual-model explainability loop and weighted local/global update fusion.

Model 1 predicts and explains (permutation importance against a background
set); Model 2 validates predictions and explanation consistency; disagreements
drive a local SGD correction, and the correction delta is fused with the
global delta as w_local * x + w_global * y.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .models import GradientUpdate, ModelParams, evaluate, predict, train_local
from .telemetry import NodePartition

_EPS = 1e-12


@dataclass
class Explanation:
    sample_id: int
    attributions: np.ndarray
    method: str  # "permutation" or "local_surrogate"
    stability: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.attributions)):
            raise ValueError("attributions must be finite")
        if not 0.0 <= self.stability <= 1.0:
            raise ValueError("stability must lie in [0, 1]")


@dataclass
class ValidationReport:
    agreement_rate: float
    flagged: list[int]
    explanation_consistency: float


@dataclass
class IntegrationWeights:
    w_local: float
    w_global: float

    def __post_init__(self):
        if abs(self.w_local + self.w_global - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if not (0.0 <= self.w_local <= 1.0 and 0.0 <= self.w_global <= 1.0):
            raise ValueError("weights must lie in [0, 1]")


@dataclass
class FeedbackQuality:
    accuracy_gain: float
    explanation_stability: float


@dataclass
class FeedbackUpdate:
    delta: np.ndarray
    quality: FeedbackQuality


@dataclass
class ExplainConfig:
    n_repeats: int = 10
    seed: int = 0
    max_samples: int | None = None


def explain(
    params: ModelParams,
    sample: np.ndarray,
    background: np.ndarray,
    n_repeats: int,
    seed: int,
    sample_id: int = 0,
) -> Explanation:
    """Permutation importance: per-feature mean |prediction change| when the
    feature is swapped in from a random background row."""
    sample = np.asarray(sample, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise ValueError("background must be a non-empty 2-D array")
    if sample.shape != (params.dim,) or background.shape[1] != params.dim:
        raise ValueError("feature dimension mismatch")
    if n_repeats < 1:
        raise ValueError("n_repeats must be positive")

    rng = np.random.default_rng(seed)
    base = predict(params, sample)
    diffs = np.empty((n_repeats, params.dim))
    for r in range(n_repeats):
        rows = rng.integers(0, background.shape[0], size=params.dim)
        for j in range(params.dim):
            perturbed = sample.copy()
            perturbed[j] = background[rows[j], j]
            diffs[r, j] = abs(base - predict(params, perturbed))
    attributions = diffs.mean(axis=0)
    spread = diffs.std(axis=0).mean()
    scale = attributions.mean() + _EPS
    stability = float(np.clip(1.0 - spread / scale, 0.0, 1.0))
    return Explanation(
        sample_id=sample_id, attributions=attributions, method="permutation", stability=stability
    )


def explain_surrogate(
    params: ModelParams,
    sample: np.ndarray,
    background: np.ndarray,
    n_perturb: int,
    seed: int,
    sample_id: int = 0,
) -> Explanation:
    """Local linear surrogate: least-squares fit of model outputs on Gaussian
    perturbations around the sample; attributions are |coefficient| x local scale."""
    sample = np.asarray(sample, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if sample.shape != (params.dim,) or background.shape[1] != params.dim:
        raise ValueError("feature dimension mismatch")
    if n_perturb < 2 * (params.dim + 1):
        n_perturb = 2 * (params.dim + 1)
    rng = np.random.default_rng(seed)
    scale = background.std(axis=0) + _EPS
    Z = sample + rng.normal(0.0, scale, size=(n_perturb, params.dim))
    preds = np.array([predict(params, z) for z in Z])
    A = np.column_stack([Z - sample, np.ones(n_perturb)])

    def fit(rows):
        coef, *_ = np.linalg.lstsq(A[rows], preds[rows], rcond=None)
        return np.abs(coef[:-1]) * scale

    half = n_perturb // 2
    a1, a2 = fit(slice(0, half)), fit(slice(half, n_perturb))
    attributions = fit(slice(0, n_perturb))
    denom = np.abs(attributions).sum() + _EPS
    stability = float(np.clip(1.0 - np.abs(a1 - a2).sum() / denom, 0.0, 1.0))
    return Explanation(
        sample_id=sample_id,
        attributions=attributions,
        method="local_surrogate",
        stability=stability,
    )


def top_feature(attributions: np.ndarray) -> int:
    """Argmax of |attribution|, ties broken by lowest feature index."""
    return int(np.argmax(np.abs(attributions)))


def _sample_seed(base_seed: int, sample_id: int) -> int:
    h = hashlib.sha256(f"explain:{base_seed}:{sample_id}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def validate_predictions(
    model1: ModelParams,
    model2: ModelParams,
    X: np.ndarray,
    cfg: ExplainConfig,
) -> ValidationReport:
    """Model 2 checks Model 1: thresholded-prediction agreement plus agreement of
    the top-attributed feature of each model's explanation."""
    if model1.dim != model2.dim:
        raise ValueError("models must share a dimension")
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty sample list")
    if cfg.max_samples is not None:
        X = X[: cfg.max_samples]

    agree = 0
    consistent = 0
    flagged = []
    for i, x in enumerate(X):
        p1 = predict(model1, x) >= 0.5
        p2 = predict(model2, x) >= 0.5
        seed = _sample_seed(cfg.seed, i)
        e1 = explain(model1, x, X, cfg.n_repeats, seed, sample_id=i)
        e2 = explain(model2, x, X, cfg.n_repeats, seed, sample_id=i)
        same_pred = p1 == p2
        same_top = top_feature(e1.attributions) == top_feature(e2.attributions)
        agree += same_pred
        consistent += same_top
        if not (same_pred and same_top):
            flagged.append(i)
    n = len(X)
    return ValidationReport(
        agreement_rate=agree / n,
        flagged=flagged,
        explanation_consistency=consistent / n,
    )


def local_correction(
    model1: ModelParams,
    flagged_X: np.ndarray,
    flagged_y: np.ndarray,
    holdout_X: np.ndarray,
    holdout_y: np.ndarray,
    lr: float,
    steps: int,
    seed: int,
    batch: int | None = None,
    explanation_stability: float = 1.0,
) -> FeedbackUpdate:
    """SGD on the flagged subset only; gain is measured on the held-out split."""
    if len(flagged_X) == 0:
        return FeedbackUpdate(
            delta=np.zeros(model1.dim + 1),
            quality=FeedbackQuality(accuracy_gain=0.0, explanation_stability=explanation_stability),
        )
    part = NodePartition(
        "correction", np.asarray(flagged_X, dtype=np.float64), np.asarray(flagged_y, dtype=np.int64)
    )
    if batch is None:
        batch = len(flagged_y)
    upd = train_local(model1, part, lr=lr, epochs=steps, batch=batch, seed=seed)
    acc_before, _ = evaluate(model1, holdout_X, holdout_y)
    corrected = ModelParams.from_vector(model1.as_vector() + upd.grad, version=model1.version)
    acc_after, _ = evaluate(corrected, holdout_X, holdout_y)
    return FeedbackUpdate(
        delta=upd.grad,
        quality=FeedbackQuality(
            accuracy_gain=acc_after - acc_before, explanation_stability=explanation_stability
        ),
    )


def compute_weights(
    quality: FeedbackQuality,
    total_samples: int,
    diversity: float,
    w_min: float = 0.05,
    n_ref: int = 1000,
) -> IntegrationWeights:
    """Convex fusion weights: the local score rewards measured accuracy gain and
    explanation stability, the global score rewards data volume and diversity."""
    if not 0.0 < w_min < 0.5:
        raise ValueError("w_min must lie in (0, 0.5)")
    if total_samples < 1 or not 0.0 <= diversity <= 1.0:
        raise ValueError("global stats out of range")
    score_local = max(0.0, quality.accuracy_gain) * quality.explanation_stability
    score_global = diversity * math.log1p(total_samples) / math.log1p(n_ref)
    if score_local + score_global <= 0.0:
        w_local = w_min
    else:
        w_local = score_local / (score_local + score_global)
        w_local = min(max(w_local, w_min), 1.0 - w_min)
    return IntegrationWeights(w_local=w_local, w_global=1.0 - w_local)


def integrate(x: np.ndarray, y: np.ndarray, w: IntegrationWeights) -> np.ndarray:
    """Weighted fusion of the local feedback delta x and the global delta y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch between local and global updates")
    return w.w_local * x + w.w_global * y
