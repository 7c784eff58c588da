#!/usr/bin/env python3
"""Privacy-utility sweep: mean held-out accuracy across epsilon ceilings.

Runs the simulator at several eps_max settings over a batch of seeds and
prints the mean (and per-seed) final accuracies, illustrating the
privacy-utility tradeoff that the acceptance suite checks statistically.

Usage:
    python3 scripts/privacy_sweep.py [--seeds 5] [--rounds 20] [--eps 8 2 1 0.5]
"""

import argparse

import numpy as np

from fleetfl import config, orchestrator


def run_once(seed: int, eps_max: float, rounds: int) -> float:
    cfg = config.from_dict(
        {
            "seed": seed,
            "rounds": rounds,
            "fleet": {
                "n_nodes": 8,
                "samples_per_node": 100,
                "feature_dim": 6,
                "heterogeneity": 0.0,
            },
            "train": {"lr": 0.5, "epochs": 1, "batch": 32},
            "privacy": {
                "eps_min": min(0.5, eps_max),
                "eps_max": eps_max,
                "clip_norm": 2.0,
                "budget_cap": 10000.0,
            },
            "feedback": {"enabled": False},
            "holdout_samples": 1000,
        }
    )
    reports = orchestrator.run(cfg)
    return float(np.mean([r.global_accuracy for r in reports[-3:]]))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5, help="number of seeds per setting")
    parser.add_argument("--rounds", type=int, default=20)
    parser.add_argument("--eps", type=float, nargs="+", default=[8.0, 2.0, 1.0, 0.5])
    args = parser.parse_args()

    seeds = list(range(11, 11 + args.seeds))
    print(f"{'eps_max':>8} {'mean_acc':>9}  per-seed")
    for eps_max in args.eps:
        accs = [run_once(s, eps_max, args.rounds) for s in seeds]
        per_seed = " ".join(f"{a:.3f}" for a in accs)
        print(f"{eps_max:>8.2f} {np.mean(accs):>9.4f}  [{per_seed}]")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
