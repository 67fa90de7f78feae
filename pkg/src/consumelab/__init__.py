"""Desk-scale simulations of consumable data in one-way communication.

Quantum protocols hand out single-use registers, classical baselines send
bits, and every run is charged to a cost ledger so that the growth of
communication with the number of buyers can be measured.
"""

from .quantum import ConsumedRegisterError, make_rng
from .runtime import CostLedger, ScenarioConfig, ScenarioViolation, run_protocol

__all__ = ["ConsumedRegisterError", "CostLedger", "ScenarioConfig", "ScenarioViolation", "make_rng", "run_protocol"]
__version__ = "0.1.0"
