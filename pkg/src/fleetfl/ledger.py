"""Hash-chained ledger with stake-weighted validator committees and contract rules.

Blocks are SHA-256 hash-chained over a canonical byte layout; validators
attest with keyed digests (a signature stand-in) and a block is appended only
when attesting stake reaches the quorum fraction of the selected committee.
Contract rules give deterministic admission control: payload-hash integrity,
freshness, privacy budget, and an update-norm poisoning guard.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import FreshnessTag
from .encoding import (
    DIGEST_SIZE,
    ZERO_DIGEST,
    canonical_hash,
    enc_bytes,
    enc_f64,
    enc_str,
    enc_u32,
    enc_u64,
)
from .privacy import BudgetLedger

BLOCK_KINDS = ("genesis", "local_update", "global_model", "feedback")


class ContractRejected(RuntimeError):
    def __init__(self, reasons: list[str]):
        super().__init__(f"contract rejected update: {reasons}")
        self.reasons = reasons


class QuorumNotReached(RuntimeError):
    """Attesting stake fell below the quorum fraction; distinct from contract failure."""


class TamperDetected(RuntimeError):
    def __init__(self, index: int):
        super().__init__(f"chain verification failed at block {index}")
        self.index = index


@dataclass
class BlockMeta:
    kind: str
    actor_id: str  # node id or aggregator id
    round: int
    freshness: FreshnessTag
    epsilon_charged: float
    model_version: int

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")

    def to_bytes(self) -> bytes:
        return (
            enc_str(self.kind)
            + enc_str(self.actor_id)
            + enc_u64(self.round)
            + self.freshness.to_bytes()
            + enc_f64(self.epsilon_charged)
            + enc_u64(self.model_version)
        )


@dataclass
class LedgerBlock:
    index: int
    prev_hash: bytes
    payload_hash: bytes
    meta: BlockMeta
    attestations: list[tuple[str, bytes]]
    block_hash: bytes


@dataclass
class ValidatorSet:
    stakes: dict[str, float]
    quorum_fraction: float = 2.0 / 3.0
    secret_seed: int = 0
    byzantine_refuse: set[str] = field(default_factory=set)
    byzantine_false: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.stakes:
            raise ValueError("validator set is empty")
        if any(s < 0 for s in self.stakes.values()) or sum(self.stakes.values()) <= 0:
            raise ValueError("stakes must be non-negative with positive total")
        if not 0.5 < self.quorum_fraction <= 1.0:
            raise ValueError("quorum_fraction must lie in (1/2, 1]")

    def secret(self, validator_id: str) -> bytes:
        return hashlib.sha256(
            enc_str("validator-secret") + enc_str(validator_id) + enc_u64(self.secret_seed)
        ).digest()


@dataclass
class ContractRules:
    freshness_window: int
    epsilon_cap: float
    max_update_norm: float
    max_declared_samples: int | None = None

    def __post_init__(self):
        if self.freshness_window <= 0 or self.epsilon_cap <= 0 or self.max_update_norm <= 0:
            raise ValueError("contract rule bounds must be positive")


@dataclass
class ValidationState:
    """Mutable admission-control state owned by the orchestrator."""

    seen_nonces: set[bytes]
    budget: BudgetLedger
    now: int
    payload: bytes | None = None  # raw bytes the payload_hash claims to cover
    update_norm: float | None = None
    n_samples: int | None = None


@dataclass
class ValidationResult:
    accepted: bool
    reasons: list[str] = field(default_factory=list)


def _attestation_bytes(attestations: list[tuple[str, bytes]]) -> bytes:
    out = enc_u32(len(attestations))
    for vid, digest in attestations:
        out += enc_str(vid) + digest
    return out


def _preimage_core(index: int, prev_hash: bytes, payload_hash: bytes, meta: BlockMeta) -> bytes:
    return enc_u64(index) + prev_hash + payload_hash + meta.to_bytes()


def compute_block_hash(
    index: int,
    prev_hash: bytes,
    payload_hash: bytes,
    meta: BlockMeta,
    attestations: list[tuple[str, bytes]],
) -> bytes:
    return canonical_hash(
        _preimage_core(index, prev_hash, payload_hash, meta) + _attestation_bytes(attestations)
    )


def attestation_digest(validator_id: str, preimage_core: bytes, secret: bytes) -> bytes:
    return canonical_hash(enc_str(validator_id) + preimage_core + secret)


def select_committee(vset: ValidatorSet, round_seed: int, committee_size: int) -> list[str]:
    """Stake-weighted sampling without replacement, deterministic per round_seed."""
    ids = sorted(vset.stakes)
    if committee_size < 1 or committee_size > len(ids):
        raise ValueError("committee_size out of range")
    weights = np.array([vset.stakes[v] for v in ids], dtype=np.float64)
    rng = np.random.default_rng(round_seed & 0xFFFFFFFFFFFFFFFF)
    chosen = []
    avail = list(range(len(ids)))
    for _ in range(committee_size):
        w = weights[avail]
        total = w.sum()
        if total <= 0:
            # only zero-stake validators left; fall back to uniform over them
            pick = avail[int(rng.integers(len(avail)))]
        else:
            pick = avail[int(rng.choice(len(avail), p=w / total))]
        chosen.append(ids[pick])
        avail.remove(pick)
    return chosen


def contract_validate(
    meta: BlockMeta,
    payload_hash: bytes,
    rules: ContractRules,
    state: ValidationState,
) -> ValidationResult:
    """Deterministic admission predicates; every violated rule is reported."""
    reasons = []
    if state.payload is not None and canonical_hash(state.payload) != payload_hash:
        reasons.append("hash_mismatch")
    if meta.freshness.nonce in state.seen_nonces:
        reasons.append("replay")
    if state.now - meta.freshness.timestamp > rules.freshness_window:
        reasons.append("stale")
    if meta.epsilon_charged > 0 and not state.budget.can_charge(
        meta.actor_id, meta.epsilon_charged
    ):
        reasons.append("budget_exceeded")
    if state.update_norm is not None and state.update_norm > rules.max_update_norm:
        reasons.append("norm_bound")
    if (
        rules.max_declared_samples is not None
        and state.n_samples is not None
        and state.n_samples > rules.max_declared_samples
    ):
        reasons.append("declared_samples")
    return ValidationResult(accepted=not reasons, reasons=reasons)


def genesis_block(payload_hash: bytes) -> LedgerBlock:
    meta = BlockMeta(
        kind="genesis",
        actor_id="genesis",
        round=0,
        freshness=FreshnessTag(nonce=b"\x00" * 16, timestamp=0, round=0),
        epsilon_charged=0.0,
        model_version=0,
    )
    block_hash = compute_block_hash(0, ZERO_DIGEST, payload_hash, meta, [])
    return LedgerBlock(
        index=0,
        prev_hash=ZERO_DIGEST,
        payload_hash=payload_hash,
        meta=meta,
        attestations=[],
        block_hash=block_hash,
    )


def append_block(
    chain: list[LedgerBlock],
    payload_hash: bytes,
    meta: BlockMeta,
    vset: ValidatorSet,
    rules: ContractRules,
    state: ValidationState,
    committee_seed: int,
    committee_size: int | None = None,
) -> LedgerBlock:
    """Validate, collect committee attestations, and append on quorum.

    Raises ContractRejected or QuorumNotReached; on success the nonce is
    recorded in the admission state and the chain is extended in place.
    """
    if not chain:
        raise ValueError("chain must start from a genesis block")
    result = contract_validate(meta, payload_hash, rules, state)
    if not result.accepted:
        raise ContractRejected(result.reasons)

    size = committee_size if committee_size is not None else min(5, len(vset.stakes))
    committee = select_committee(vset, committee_seed, size)
    index = len(chain)
    prev_hash = chain[-1].block_hash
    core = _preimage_core(index, prev_hash, payload_hash, meta)

    attestations: list[tuple[str, bytes]] = []
    for vid in committee:
        if vid in vset.byzantine_refuse:
            continue
        digest = attestation_digest(vid, core, vset.secret(vid))
        if vid in vset.byzantine_false:
            digest = canonical_hash(b"false-attestation" + digest)
        attestations.append((vid, digest))

    committee_stake = sum(vset.stakes[v] for v in committee)
    valid_stake = sum(
        vset.stakes[vid]
        for vid, digest in attestations
        if digest == attestation_digest(vid, core, vset.secret(vid))
    )
    if valid_stake + 1e-12 < vset.quorum_fraction * committee_stake:
        raise QuorumNotReached(
            f"attesting stake {valid_stake} < quorum "
            f"{vset.quorum_fraction} x {committee_stake}"
        )

    block = LedgerBlock(
        index=index,
        prev_hash=prev_hash,
        payload_hash=payload_hash,
        meta=meta,
        attestations=attestations,
        block_hash=compute_block_hash(index, prev_hash, payload_hash, meta, attestations),
    )
    chain.append(block)
    state.seen_nonces.add(meta.freshness.nonce)
    return block


def verify_chain(chain: list[LedgerBlock]) -> int | None:
    """Recompute every link and block hash; return the first bad index, or None."""
    for k, block in enumerate(chain):
        if block.index != k:
            return k
        expected_prev = ZERO_DIGEST if k == 0 else chain[k - 1].block_hash
        if block.prev_hash != expected_prev:
            return k
        recomputed = compute_block_hash(
            block.index, block.prev_hash, block.payload_hash, block.meta, block.attestations
        )
        if recomputed != block.block_hash:
            return k
    return None


def provenance_query(chain: list[LedgerBlock], model_version: int) -> list[LedgerBlock]:
    """Ordered lineage of a global model version: contributing local updates,
    the aggregation block, and the round's feedback blocks."""
    bad = verify_chain(chain)
    if bad is not None:
        raise TamperDetected(bad)
    anchor = None
    for block in chain:
        if block.meta.model_version == model_version and block.meta.kind in (
            "genesis",
            "global_model",
        ):
            anchor = block
            break
    if anchor is None:
        raise KeyError(f"model version {model_version} not logged")
    if anchor.meta.kind == "genesis":
        return [anchor]
    rnd = anchor.meta.round
    lineage = [
        b
        for b in chain
        if b.meta.round == rnd and b.meta.kind in ("local_update", "global_model", "feedback")
    ]
    return lineage


def export_chain(chain: list[LedgerBlock]) -> str:
    """JSON array of blocks with hex digests."""
    out = []
    for b in chain:
        out.append(
            {
                "index": b.index,
                "prev_hash": b.prev_hash.hex(),
                "payload_hash": b.payload_hash.hex(),
                "meta": {
                    "kind": b.meta.kind,
                    "actor_id": b.meta.actor_id,
                    "round": b.meta.round,
                    "nonce": b.meta.freshness.nonce.hex(),
                    "timestamp": b.meta.freshness.timestamp,
                    "freshness_round": b.meta.freshness.round,
                    "epsilon_charged": b.meta.epsilon_charged,
                    "model_version": b.meta.model_version,
                },
                "attestations": [[vid, d.hex()] for vid, d in b.attestations],
                "block_hash": b.block_hash.hex(),
            }
        )
    return json.dumps(out, sort_keys=True, indent=0)


def import_chain(text: str) -> list[LedgerBlock]:
    chain = []
    for rec in json.loads(text):
        m = rec["meta"]
        meta = BlockMeta(
            kind=m["kind"],
            actor_id=m["actor_id"],
            round=m["round"],
            freshness=FreshnessTag(
                nonce=bytes.fromhex(m["nonce"]),
                timestamp=m["timestamp"],
                round=m["freshness_round"],
            ),
            epsilon_charged=m["epsilon_charged"],
            model_version=m["model_version"],
        )
        chain.append(
            LedgerBlock(
                index=rec["index"],
                prev_hash=bytes.fromhex(rec["prev_hash"]),
                payload_hash=bytes.fromhex(rec["payload_hash"]),
                meta=meta,
                attestations=[(vid, bytes.fromhex(d)) for vid, d in rec["attestations"]],
                block_hash=bytes.fromhex(rec["block_hash"]),
            )
        )
    return chain
