"""Round orchestration: the full edge -> ledger -> cloud -> edge loop.

Each round: local SGD, adaptive privacy tuning, clip/noise/mask, sealed
transmission, ledger admission with committee attestation, masked-sum FedAvg,
global privacy adjustment, sealed redistribution, dual-model validation with
local correction, and weighted local/global fusion. All randomness is derived
from the config seed, so identical configs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import aggregation, feedback, ledger, masking, privacy, telemetry
from .channel import Envelope, FreshnessTag, KeyRegistry, NonceSource, open_envelope, seal
from .config import RunConfig
from .encoding import canonical_hash, enc_u64, enc_vec, hash_vector
from .models import (
    GradientUpdate,
    ModelParams,
    evaluate,
    false_positive_rate,
    train_local,
)

CLOUD_ID = "cloud"
LEDGER_ID = "ledger"


class ProtocolViolation(RuntimeError):
    """A runtime belief check on the message flow failed."""


@dataclass
class WireMessage:
    sender: str
    receiver: str
    kind: str
    envelope: Envelope


@dataclass
class RoundTrace:
    """Everything an in-network adversary could see or touch in one round,
    plus ground-truth raw updates for the eavesdropping oracle."""

    round: int
    messages: list[WireMessage] = field(default_factory=list)
    raw_updates: dict[str, np.ndarray] = field(default_factory=dict)
    masked: dict[str, masking.MaskedUpdate] = field(default_factory=dict)


@dataclass
class RoundReport:
    round: int
    aborted: bool
    global_version: int
    global_accuracy: float
    global_loss: float
    epsilon_charged: dict[str, float]
    epsilon_spent: dict[str, float]
    blocks_appended: int
    rejected: list[tuple[str, list[str]]]
    agreement_rate_mean: float
    fpr_global: float
    fpr_integrated: float
    integrated_accuracy_mean: float
    weights_mean: tuple[float, float]

    def to_json_dict(self) -> dict:
        return {
            "round": self.round,
            "aborted": self.aborted,
            "global_version": self.global_version,
            "global_accuracy": self.global_accuracy,
            "global_loss": self.global_loss,
            "epsilon_charged": self.epsilon_charged,
            "epsilon_spent": self.epsilon_spent,
            "blocks_appended": self.blocks_appended,
            "rejected": [[n, r] for n, r in self.rejected],
            "agreement_rate_mean": self.agreement_rate_mean,
            "fpr_global": self.fpr_global,
            "fpr_integrated": self.fpr_integrated,
            "integrated_accuracy_mean": self.integrated_accuracy_mean,
            "w_local_mean": self.weights_mean[0],
            "w_global_mean": self.weights_mean[1],
        }


def _sub_seed(*parts) -> int:
    h = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "big")


def params_bytes(params: ModelParams) -> bytes:
    return enc_vec(params.as_vector()) + enc_u64(params.version)


def _diversity(counts: list[int]) -> float:
    """Normalized entropy of per-node contribution counts; 0 for one contributor."""
    if len(counts) <= 1:
        return 0.0
    p = np.asarray(counts, dtype=np.float64)
    p = p / p.sum()
    h = -np.sum(p * np.log(np.clip(p, 1e-300, None)))
    return float(h / math.log(len(counts)))


class Simulator:
    """Single owner of all mutable protocol state (chain, budgets, nonce sets, clock)."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        fc = cfg.fleet
        self.fleet = telemetry.generate_fleet(
            cfg.seed, fc.n_nodes, fc.samples_per_node, fc.feature_dim, fc.heterogeneity
        )
        self.node_ids = sorted(p.node_id for p in self.fleet.partitions)
        self.dim = fc.feature_dim
        self.holdout_X, self.holdout_y = telemetry.generate_holdout(
            self.fleet, _sub_seed(cfg.seed, "holdout"), cfg.holdout_samples
        )

        self.bounds = privacy.PrivacyBounds(
            eps_min=cfg.privacy.eps_min,
            eps_max=cfg.privacy.eps_max,
            delta=cfg.privacy.delta,
            clip_norm=cfg.privacy.clip_norm,
            mask_strength_min=cfg.privacy.mask_strength_min,
            mask_strength_max=cfg.privacy.mask_strength_max,
            budget_cap=cfg.privacy.budget_cap,
        )
        self.budget = privacy.BudgetLedger(budget_cap=cfg.privacy.budget_cap)

        self.keys = KeyRegistry.generate(self.node_ids, _sub_seed(cfg.seed, "keys"))
        self.nonce_sources = {
            party: NonceSource(party, _sub_seed(cfg.seed, "nonce", party))
            for party in self.node_ids + [CLOUD_ID, LEDGER_ID]
        }
        self.sent_nonces: dict[str, set[bytes]] = {
            party: set() for party in self.node_ids + [CLOUD_ID, LEDGER_ID]
        }
        self.seen_cloud: set[bytes] = set()
        self.seen_ledger: set[bytes] = set()
        self.seen_node: dict[str, set[bytes]] = {n: set() for n in self.node_ids}
        self.contract_nonces: set[bytes] = set()
        self.clock = 0
        ticks_per_round = 8 * fc.n_nodes + 16
        self.window = cfg.freshness_window or 2 * ticks_per_round

        self.vset = ledger.ValidatorSet(
            stakes=dict(cfg.ledger.stakes),
            quorum_fraction=cfg.ledger.quorum_fraction,
            secret_seed=_sub_seed(cfg.seed, "validators"),
            byzantine_refuse=set(cfg.ledger.byzantine_refuse),
            byzantine_false=set(cfg.ledger.byzantine_false),
        )
        self.rules = ledger.ContractRules(
            freshness_window=self.window,
            epsilon_cap=cfg.privacy.budget_cap,
            max_update_norm=cfg.ledger.max_update_norm or self._auto_norm_bound(),
            max_declared_samples=cfg.ledger.max_declared_samples,
        )

        self.global_params = ModelParams.zeros(self.dim, version=0)
        self.chain = [ledger.genesis_block(canonical_hash(params_bytes(self.global_params)))]
        self.node_params = {n: self.global_params for n in self.node_ids}
        self._splits = self._make_splits()
        self.explanation_records: list[dict] = []

    def _auto_norm_bound(self) -> float:
        # generous ceiling so honest (scaled, noised, masked) payloads always pass;
        # poisoning runs pin an explicit tighter bound in config
        c = self.cfg
        clip = 1.5 * c.privacy.clip_norm
        if math.isinf(c.privacy.eps_max):
            sigma = 0.0
        else:
            sigma = privacy.gaussian_sigma(clip, c.privacy.eps_min, c.privacy.delta)
        base = clip + 8.0 * sigma * math.sqrt(self.dim + 1)
        mask_allow = 1.0 + 4.0 * c.privacy.mask_strength_max * math.sqrt(
            c.fleet.n_nodes * (self.dim + 1)
        )
        return c.fleet.samples_per_node * base * mask_allow * 10.0

    def _make_splits(self):
        splits = {}
        frac = self.cfg.feedback.holdout_fraction
        for node in self.node_ids:
            part = self.fleet.partition(node)
            n = part.n_samples
            rng = np.random.default_rng(_sub_seed(self.cfg.seed, "split", node))
            order = rng.permutation(n)
            n_hold = max(1, int(round(frac * n))) if n > 1 else 0
            hold, train = order[:n_hold], order[n_hold:]
            if len(train) == 0:
                train, hold = order, order[:0]
            splits[node] = (train, hold)
        return splits

    def _train_view(self, node: str) -> telemetry.NodePartition:
        part = self.fleet.partition(node)
        idx, _ = self._splits[node]
        return telemetry.NodePartition(
            node, part.features[idx], part.labels[idx], part.sensitivity
        )

    def _holdout_view(self, node: str) -> tuple[np.ndarray, np.ndarray]:
        part = self.fleet.partition(node)
        _, idx = self._splits[node]
        if len(idx) == 0:
            tr, _ = self._splits[node]
            idx = tr
        return part.features[idx], part.labels[idx]

    def _tick(self) -> int:
        self.clock += 1
        return self.clock

    def _tag(self, party: str, rnd: int) -> FreshnessTag:
        return FreshnessTag(
            nonce=self.nonce_sources[party].next(), timestamp=self._tick(), round=rnd
        )

    def _send(
        self, trace: RoundTrace | None, sender: str, receiver: str, kind: str, env: Envelope
    ) -> None:
        if trace is not None:
            trace.messages.append(WireMessage(sender, receiver, kind, env))

    # -- round pipeline -----------------------------------------------------

    def run_round(self, r: int, record: bool = False) -> tuple[RoundReport, RoundTrace | None]:
        cfg = self.cfg
        trace = RoundTrace(round=r) if record else None
        participants = list(self.node_ids)
        threat = cfg.threat_for_round(r)

        # step 1: local training + adaptive privacy tuning
        scaled: dict[str, GradientUpdate] = {}
        ctxs: dict[str, privacy.PrivacyContext] = {}
        for node in participants:
            view = self._train_view(node)
            upd = train_local(
                self.node_params[node],
                view,
                lr=cfg.train.lr,
                epochs=cfg.train.epochs,
                batch=cfg.train.batch,
                seed=_sub_seed(cfg.seed, "train", r, node),
            )
            ctx = privacy.assess_context(view.sensitivity, threat, upd.loss_trace, self.bounds)
            clipped = privacy.clip_update(upd, ctx.clip_norm)
            noised = privacy.add_dp_noise(clipped, ctx, _sub_seed(cfg.seed, "noise", r, node))
            # sender-side sample weighting keeps the aggregator blind to raw updates
            scaled[node] = GradientUpdate(
                grad=noised.grad * upd.n_samples,
                n_samples=upd.n_samples,
                loss_trace=list(upd.loss_trace),
            )
            ctxs[node] = ctx
            self._local_deltas = getattr(self, "_local_deltas", {})
            self._local_deltas[node] = upd.grad

        strengths = {
            n: ctxs[n].mask_strength * max(1.0, float(np.linalg.norm(scaled[n].grad)))
            for n in participants
        }
        round_seed = _sub_seed(cfg.seed, "masks", r)
        masks = masking.derive_masks(round_seed, participants, self.dim + 1, strengths, round=r)

        # seal and transmit to the aggregator
        masked: dict[str, masking.MaskedUpdate] = {}
        inbound: list[Envelope] = []
        for node in participants:
            tag = self._tag(node, r)
            mu = masking.apply_mask(scaled[node], masks[node], tag)
            masked[node] = mu
            env = seal(
                self.keys.edge_cloud_key(node), node, CLOUD_ID, tag, mu.to_bytes(),
                used_nonces=self.sent_nonces[node],
            )
            self._send(trace, node, CLOUD_ID, "local_update", env)
            inbound.append(env)
        if trace is not None:
            trace.raw_updates = {n: scaled[n].grad.copy() for n in participants}
            trace.masked = dict(masked)

        # cloud opens and checks integrity (origin + hash beliefs)
        received: list[masking.MaskedUpdate] = []
        for env in inbound:
            payload = open_envelope(
                self.keys.edge_cloud_key(env.sender), env, self.window, self.seen_cloud, self.clock
            )
            mu = masking.MaskedUpdate.from_bytes(payload)
            if hash_vector(mu.payload) != mu.payload_hash:
                raise ProtocolViolation(f"payload hash mismatch from {mu.node_id}")
            if mu.node_id != env.sender:
                raise ProtocolViolation("update origin does not match envelope sender")
            received.append(mu)

        cleaned, drops = aggregation.preprocess_updates(received, self.dim + 1)
        rejected: list[tuple[str, list[str]]] = [(n, [reason]) for n, reason in drops]

        # ledger admission (validate everything before appending anything)
        admitted: list[tuple[masking.MaskedUpdate, ledger.BlockMeta]] = []
        for mu in cleaned:
            env2 = seal(
                self.keys.k_bc, CLOUD_ID, LEDGER_ID, self._tag(CLOUD_ID, r), mu.to_bytes(),
                used_nonces=self.sent_nonces[CLOUD_ID],
            )
            self._send(trace, CLOUD_ID, LEDGER_ID, "ledger_log", env2)
            payload = open_envelope(self.keys.k_bc, env2, self.window, self.seen_ledger, self.clock)
            mu2 = masking.MaskedUpdate.from_bytes(payload)
            eps = ctxs[mu2.node_id].epsilon
            meta = ledger.BlockMeta(
                kind="local_update",
                actor_id=mu2.node_id,
                round=r,
                freshness=mu2.freshness,
                epsilon_charged=0.0 if math.isinf(eps) else eps,
                model_version=self.global_params.version + 1,
            )
            state = self._validation_state(mu2)
            result = ledger.contract_validate(meta, mu2.payload_hash, self.rules, state)
            if result.accepted:
                admitted.append((mu2, meta))
            else:
                rejected.append((mu2.node_id, result.reasons))

        charged = {n: 0.0 for n in participants}
        if rejected:
            # masks cannot cancel over a partial roster: abort, keep previous model
            return self._finish_round(r, trace, aborted=True, rejected=rejected,
                                      charged=charged, blocks=0), trace

        blocks = 0
        for mu2, meta in admitted:
            ledger.append_block(
                self.chain,
                mu2.payload_hash,
                meta,
                self.vset,
                self.rules,
                self._validation_state(mu2),
                committee_seed=_sub_seed(cfg.seed, "committee", r, mu2.node_id),
                committee_size=cfg.ledger.committee_size,
            )
            blocks += 1
            if meta.epsilon_charged > 0:
                privacy.charge_budget(self.budget, mu2.node_id, meta.epsilon_charged)
                charged[mu2.node_id] = meta.epsilon_charged

        # secure aggregation and global privacy adjustment
        summed = aggregation.smpc_sum([mu for mu, _ in admitted], participants)
        total_n = sum(mu.n_samples for mu, _ in admitted)
        prev_global = self.global_params
        g = aggregation.fedavg_from_masked_sum(
            summed, total_n, participants, prev_global, round=r
        )
        g = aggregation.privacy_adjust_global(
            g,
            cfg.privacy.eps_global,
            cfg.privacy.delta_global,
            cfg.privacy.clip_global,
            _sub_seed(cfg.seed, "global-noise", r),
        )

        gbytes = params_bytes(g.params)
        blocks += self._log_to_ledger(
            trace, r, kind="global_model", actor=CLOUD_ID, payload=gbytes,
            model_version=g.params.version,
        )
        self.global_params = g.params

        # global distribution back to the nodes (freshness verified at open)
        for node in participants:
            tag = self._tag(CLOUD_ID, r)
            env = seal(
                self.keys.edge_cloud_key(node), CLOUD_ID, node, tag, gbytes,
                used_nonces=self.sent_nonces[CLOUD_ID],
            )
            self._send(trace, CLOUD_ID, node, "global_distribution", env)
            got = open_envelope(
                self.keys.edge_cloud_key(node), env, self.window, self.seen_node[node], self.clock
            )
            if got != gbytes:
                raise ProtocolViolation("distributed global model corrupted in transit")

        # dual-model feedback and weighted integration
        agreement, weights_acc, blocks_fb = self._feedback_phase(trace, r, prev_global, g)
        blocks += blocks_fb

        return self._finish_round(
            r, trace, aborted=False, rejected=[], charged=charged, blocks=blocks,
            agreement=agreement, weights=weights_acc,
        ), trace

    def _validation_state(self, mu: masking.MaskedUpdate) -> ledger.ValidationState:
        return ledger.ValidationState(
            seen_nonces=self.contract_nonces,
            budget=self.budget,
            now=self.clock,
            payload=enc_vec(mu.payload),
            update_norm=float(np.linalg.norm(mu.payload)),
            n_samples=mu.n_samples,
        )

    def _log_to_ledger(
        self, trace, r: int, kind: str, actor: str, payload: bytes, model_version: int,
        epsilon: float = 0.0,
    ) -> int:
        tag = self._tag(CLOUD_ID, r)
        env = seal(
            self.keys.k_bc, CLOUD_ID, LEDGER_ID, tag, payload,
            used_nonces=self.sent_nonces[CLOUD_ID],
        )
        self._send(trace, CLOUD_ID, LEDGER_ID, "ledger_log", env)
        got = open_envelope(self.keys.k_bc, env, self.window, self.seen_ledger, self.clock)
        meta = ledger.BlockMeta(
            kind=kind, actor_id=actor, round=r, freshness=tag,
            epsilon_charged=epsilon, model_version=model_version,
        )
        state = ledger.ValidationState(
            seen_nonces=self.contract_nonces, budget=self.budget, now=self.clock, payload=got
        )
        ledger.append_block(
            self.chain, canonical_hash(got), meta, self.vset, self.rules, state,
            committee_seed=_sub_seed(self.cfg.seed, "committee", r, kind, actor),
            committee_size=self.cfg.ledger.committee_size,
        )
        return 1

    def _feedback_phase(self, trace, r: int, prev_global: ModelParams,
                        g: aggregation.GlobalUpdate):
        cfg = self.cfg
        fb = cfg.feedback
        if not fb.enabled:
            for node in self.node_ids:
                self.node_params[node] = g.params
            return 1.0, (0.0, 1.0), 0

        diversity = _diversity([self.fleet.partition(n).n_samples for n in g.contributing_nodes])
        agreements, w_locals = [], []
        fused: dict[str, tuple[ModelParams, feedback.FeedbackUpdate]] = {}
        corrections: dict[str, feedback.FeedbackUpdate] = {}

        for node in self.node_ids:
            view = self._train_view(node)
            hold_X, hold_y = self._holdout_view(node)
            model1 = ModelParams.from_vector(
                self.node_params[node].as_vector() + self._local_deltas[node],
                version=g.params.version,
            )
            upd2 = train_local(
                g.params,
                telemetry.NodePartition(node, hold_X, hold_y, view.sensitivity),
                lr=cfg.train.lr,
                epochs=cfg.train.epochs,
                batch=cfg.train.batch,
                seed=_sub_seed(cfg.seed, "model2", r, node),
            )
            model2 = ModelParams.from_vector(
                g.params.as_vector() + upd2.grad, version=g.params.version
            )
            val_X = view.features[: fb.max_validation_samples]
            val_y = view.labels[: fb.max_validation_samples]
            ecfg = feedback.ExplainConfig(
                n_repeats=fb.explain_repeats, seed=_sub_seed(cfg.seed, "explain", r, node)
            )
            report = feedback.validate_predictions(model1, model2, val_X, ecfg)
            agreements.append(report.agreement_rate)

            expl = feedback.explain(
                model1, val_X[0], val_X, fb.explain_repeats,
                _sub_seed(cfg.seed, "stability", r, node), sample_id=0,
            )
            self.explanation_records.append(
                {
                    "round": r,
                    "node": node,
                    "sample": 0,
                    "attributions": [float(a) for a in expl.attributions],
                    "stability": expl.stability,
                }
            )

            corr = feedback.local_correction(
                model1,
                val_X[report.flagged],
                val_y[report.flagged],
                hold_X,
                hold_y,
                lr=fb.correction_lr,
                steps=fb.correction_steps,
                seed=_sub_seed(cfg.seed, "correct", r, node),
                explanation_stability=expl.stability,
            )
            corrections[node] = corr

            if cfg.integration_site == "node":
                w = feedback.compute_weights(
                    corr.quality, g.total_samples, diversity, fb.w_min, fb.n_ref
                )
                final = feedback.integrate(corr.delta, g.delta, w)
                integrated = ModelParams.from_vector(
                    prev_global.as_vector() + final, version=g.params.version
                )
                fused[node] = (integrated, corr)
                w_locals.append(w.w_local)

        blocks = 0
        if cfg.integration_site == "node":
            for node in self.node_ids:
                integrated, corr = fused[node]
                self.node_params[node] = integrated
                blocks += self._log_integrated(trace, r, node, integrated, corr)
        else:
            # cloud-side integration: average the feedback deltas and qualities
            xbar = np.mean([corrections[n].delta for n in self.node_ids], axis=0)
            quality = feedback.FeedbackQuality(
                accuracy_gain=float(
                    np.mean([corrections[n].quality.accuracy_gain for n in self.node_ids])
                ),
                explanation_stability=float(
                    np.mean([corrections[n].quality.explanation_stability for n in self.node_ids])
                ),
            )
            w = feedback.compute_weights(quality, g.total_samples, diversity, fb.w_min, fb.n_ref)
            final = feedback.integrate(xbar, g.delta, w)
            integrated = ModelParams.from_vector(
                prev_global.as_vector() + final, version=g.params.version
            )
            corr = feedback.FeedbackUpdate(delta=xbar, quality=quality)
            for node in self.node_ids:
                self.node_params[node] = integrated
            blocks += self._log_integrated(trace, r, CLOUD_ID, integrated, corr)
            w_locals.append(w.w_local)

        w_mean = float(np.mean(w_locals)) if w_locals else 0.0
        return float(np.mean(agreements)), (w_mean, 1.0 - w_mean), blocks

    def _log_integrated(self, trace, r, actor, integrated, corr) -> int:
        payload = params_bytes(integrated)
        if actor != CLOUD_ID:
            # edge node submits its integrated model through the cloud
            tag = self._tag(actor, r)
            env = seal(
                self.keys.edge_cloud_key(actor), actor, CLOUD_ID, tag, payload,
                used_nonces=self.sent_nonces[actor],
            )
            self._send(trace, actor, CLOUD_ID, "feedback", env)
            payload = open_envelope(
                self.keys.edge_cloud_key(actor), env, self.window, self.seen_cloud, self.clock
            )
        return self._log_to_ledger(
            trace, r, kind="feedback", actor=actor, payload=payload,
            model_version=integrated.version,
        )

    def _finish_round(self, r, trace, aborted, rejected, charged, blocks,
                      agreement=0.0, weights=(0.0, 1.0)) -> RoundReport:
        acc, loss = evaluate(self.global_params, self.holdout_X, self.holdout_y)
        fpr_g = false_positive_rate(self.global_params, self.holdout_X, self.holdout_y)
        node_fprs, node_accs = [], []
        for node in self.node_ids:
            node_fprs.append(
                false_positive_rate(self.node_params[node], self.holdout_X, self.holdout_y)
            )
            node_accs.append(evaluate(self.node_params[node], self.holdout_X, self.holdout_y)[0])
        return RoundReport(
            round=r,
            aborted=aborted,
            global_version=self.global_params.version,
            global_accuracy=acc,
            global_loss=loss,
            epsilon_charged={n: charged.get(n, 0.0) for n in self.node_ids},
            epsilon_spent={n: self.budget.spent_for(n) for n in self.node_ids},
            blocks_appended=blocks,
            rejected=rejected,
            agreement_rate_mean=agreement,
            fpr_global=fpr_g,
            fpr_integrated=float(np.mean(node_fprs)),
            integrated_accuracy_mean=float(np.mean(node_accs)),
            weights_mean=weights,
        )

    # -- full run -----------------------------------------------------------

    def run(self, record: bool = False) -> tuple[list[RoundReport], list[RoundTrace]]:
        reports, traces = [], []
        for r in range(self.cfg.rounds):
            report, trace = self.run_round(r, record=record)
            reports.append(report)
            if trace is not None:
                traces.append(trace)
        bad = ledger.verify_chain(self.chain)
        if bad is not None:
            raise ProtocolViolation(f"chain failed verification at block {bad}")
        if self.cfg.output_dir:
            self.write_artifacts(reports)
        return reports, traces

    def write_artifacts(self, reports: list[RoundReport]) -> None:
        outdir = self.cfg.output_dir
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "metrics.jsonl"), "w") as f:
            for rep in reports:
                f.write(json.dumps(rep.to_json_dict(), sort_keys=True) + "\n")
        with open(os.path.join(outdir, "summary.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["round", "aborted", "global_accuracy", "global_loss",
                 "blocks_appended", "rejected", "agreement_rate_mean"]
            )
            for rep in reports:
                w.writerow(
                    [rep.round, int(rep.aborted), f"{rep.global_accuracy:.6f}",
                     f"{rep.global_loss:.6f}", rep.blocks_appended, len(rep.rejected),
                     f"{rep.agreement_rate_mean:.6f}"]
                )
        with open(os.path.join(outdir, "chain.json"), "w") as f:
            f.write(ledger.export_chain(self.chain))
        with open(os.path.join(outdir, "explanations.jsonl"), "w") as f:
            for rec in self.explanation_records:
                f.write(json.dumps(rec, sort_keys=True) + "\n")


def run(cfg: RunConfig) -> list[RoundReport]:
    """Run a full simulation per the config; returns the per-round reports."""
    sim = Simulator(cfg)
    reports, _ = sim.run()
    return reports
