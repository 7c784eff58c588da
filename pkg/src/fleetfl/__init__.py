"""Deterministic desk-scale simulator of a privacy-adaptive, ledger-validated
federated learning protocol for vehicle fleets, with an adversary harness."""

from .config import RunConfig, from_dict, load
from .orchestrator import RoundReport, Simulator, run

__all__ = ["RunConfig", "RoundReport", "Simulator", "from_dict", "load", "run"]
