"""Cloud-side aggregation: preprocessing, masked-sum reconstruction, FedAvg, global DP.

The aggregator only ever touches MaskedUpdate payloads; sample weighting is
realized by sender-side scaling (each node submits n_k times its update), so
the masked sum divided by the total sample count is exactly the
sample-weighted FedAvg delta without any individual update being exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .masking import MaskedUpdate
from .models import ModelParams
from .privacy import gaussian_sigma


class AggregationAbort(RuntimeError):
    """The round cannot be aggregated (all updates dropped or roster mismatch)."""


class ParticipantMismatch(AggregationAbort):
    """Masked updates do not cover exactly the round's participant set."""


@dataclass
class GlobalUpdate:
    params: ModelParams
    delta: np.ndarray  # the aggregate update applied to the base, bias last
    contributing_nodes: list[str]
    total_samples: int
    round: int
    epsilon_global: float

    def __post_init__(self):
        if not self.contributing_nodes:
            raise ValueError("contributing_nodes must be non-empty")
        if not np.all(np.isfinite(self.params.as_vector())):
            raise ValueError("global params must be finite")


def preprocess_updates(
    admitted: list[MaskedUpdate], dim: int
) -> tuple[list[MaskedUpdate], list[tuple[str, str]]]:
    """Drop non-finite or wrong-dimension payloads; keep node-id order."""
    cleaned, report = [], []
    for upd in sorted(admitted, key=lambda u: u.node_id):
        if upd.payload.shape != (dim,):
            report.append((upd.node_id, f"dimension {upd.payload.shape[0]} != {dim}"))
        elif not np.all(np.isfinite(upd.payload)):
            report.append((upd.node_id, "non-finite payload"))
        else:
            cleaned.append(upd)
    return cleaned, report


def smpc_sum(masked: list[MaskedUpdate], participants: list[str] | None = None) -> np.ndarray:
    """Coordinate-wise sum of masked payloads; masks cancel over the full roster."""
    if not masked:
        raise AggregationAbort("no masked updates to sum")
    if participants is not None:
        got = sorted(u.node_id for u in masked)
        if got != sorted(participants):
            raise ParticipantMismatch(
                f"masked set {got} does not match round roster {sorted(participants)}"
            )
    total = np.zeros_like(masked[0].payload)
    for upd in sorted(masked, key=lambda u: u.node_id):
        total = total + upd.payload
    return total


def fedavg(updates: list[tuple[np.ndarray, int]], base: ModelParams) -> GlobalUpdate:
    """Sample-weighted average of deltas applied to the base parameters."""
    if not updates:
        raise AggregationAbort("empty update list")
    total_n = sum(n for _, n in updates)
    if total_n <= 0:
        raise ValueError("total sample count must be positive")
    delta = np.zeros(base.dim + 1)
    for vec, n in updates:
        delta = delta + (n / total_n) * np.asarray(vec, dtype=np.float64)
    params = ModelParams.from_vector(base.as_vector() + delta, version=base.version + 1)
    return GlobalUpdate(
        params=params,
        delta=delta,
        contributing_nodes=[f"update-{i}" for i in range(len(updates))],
        total_samples=total_n,
        round=base.version,
        epsilon_global=math.inf,
    )


def fedavg_from_masked_sum(
    summed: np.ndarray,
    total_samples: int,
    contributing_nodes: list[str],
    base: ModelParams,
    round: int,
) -> GlobalUpdate:
    """FedAvg over sender-scaled masked updates: weighted delta = sum / total samples."""
    if total_samples <= 0:
        raise ValueError("total sample count must be positive")
    delta = np.asarray(summed, dtype=np.float64) / total_samples
    params = ModelParams.from_vector(base.as_vector() + delta, version=base.version + 1)
    return GlobalUpdate(
        params=params,
        delta=delta,
        contributing_nodes=sorted(contributing_nodes),
        total_samples=total_samples,
        round=round,
        epsilon_global=math.inf,
    )


def privacy_adjust_global(
    g: GlobalUpdate,
    epsilon_global: float,
    delta: float,
    clip_global: float,
    rng_seed: int,
) -> GlobalUpdate:
    """Clip the aggregate delta and apply the Gaussian mechanism; eps=inf is identity."""
    if math.isinf(epsilon_global):
        return g
    base_vec = g.params.as_vector() - g.delta
    agg = g.delta
    norm = float(np.linalg.norm(agg))
    if norm > clip_global:
        agg = agg * (clip_global / norm)
    sigma = gaussian_sigma(clip_global, epsilon_global, delta)
    rng = np.random.default_rng(rng_seed)
    agg = agg + rng.normal(0.0, sigma, size=agg.shape)
    params = ModelParams.from_vector(base_vec + agg, version=g.params.version)
    return GlobalUpdate(
        params=params,
        delta=agg,
        contributing_nodes=list(g.contributing_nodes),
        total_samples=g.total_samples,
        round=g.round,
        epsilon_global=epsilon_global,
    )
