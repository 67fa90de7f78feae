"""One-way protocol plumbing: cost ledger, transcript, sessions, registry.

Every Alice-to-Bob transmission goes through a :class:`Session`, which charges
the :class:`CostLedger` and appends to the transcript. Bob-to-Bob classical
chatter is logged but never charged. Quantum registers are minted only here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Literal

import numpy as np

from .quantum import QuantumRegister, StateVector, _new_register, make_rng

ALICE = "alice"
BROADCAST = "bobs"


class ScenarioViolation(RuntimeError):
    """An operation the scenario does not permit was attempted."""


class LedgerMismatch(AssertionError):
    """A protocol run charged something other than its closed-form cost."""


@dataclass
class CostLedger:
    classical_bits: int = 0
    qubits: int = 0

    def charge_classical(self, nbits: int) -> "CostLedger":
        if nbits < 0:
            raise ValueError("cannot charge a negative number of bits")
        self.classical_bits += int(nbits)
        return self

    def charge_qubits(self, nqubits: int) -> "CostLedger":
        if nqubits < 0:
            raise ValueError("cannot charge a negative number of qubits")
        self.qubits += int(nqubits)
        return self

    def __iadd__(self, other: "CostLedger") -> "CostLedger":
        self.classical_bits += other.classical_bits
        self.qubits += other.qubits
        return self


def charge_classical(ledger: CostLedger, nbits: int) -> CostLedger:
    return ledger.charge_classical(nbits)


def mint_register(state: StateVector, ledger: CostLedger) -> QuantumRegister:
    """Create a fresh register holding ``state``, charging its qubit count."""
    ledger.charge_qubits(state.qubits)
    return _new_register(state)


@dataclass(frozen=True)
class TranscriptRecord:
    sender: str
    receiver: str
    kind: Literal["classical", "quantum"]
    size: int
    charged: bool


@dataclass(frozen=True)
class Message:
    kind: Literal["classical", "quantum"]
    payload: Any
    size: int

    def __post_init__(self) -> None:
        if self.kind == "classical" and len(self.payload) != self.size:
            raise ValueError("classical payload length must equal bits charged")
        if self.kind == "quantum" and not isinstance(self.payload, QuantumRegister):
            raise TypeError("quantum message must wrap exactly one register")


@dataclass(frozen=True)
class ScenarioConfig:
    alice_channel: Literal["classical", "quantum"] = "quantum"
    bobs_interconnect: Literal["none", "classical", "quantum"] = "classical"
    m: int = 1
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.alice_channel not in ("classical", "quantum"):
            raise ValueError(f"unknown Alice channel {self.alice_channel!r}")
        if self.bobs_interconnect not in ("none", "classical", "quantum"):
            raise ValueError(f"unknown Bob interconnect {self.bobs_interconnect!r}")


class Session:
    """Ledger plus transcript for one protocol run."""

    def __init__(self, config: ScenarioConfig | None = None) -> None:
        self.config = config or ScenarioConfig()
        self.ledger = CostLedger()
        self.transcript: list[TranscriptRecord] = []

    def send_classical(self, bits, receiver: str = BROADCAST) -> Message:
        bits = tuple(int(b) & 1 for b in bits)
        self.ledger.charge_classical(len(bits))
        self.transcript.append(TranscriptRecord(ALICE, receiver, "classical", len(bits), True))
        return Message("classical", bits, len(bits))

    def send_quantum(self, state: StateVector, receiver: str) -> QuantumRegister:
        if self.config.alice_channel != "quantum":
            raise ScenarioViolation("scenario restricts Alice to classical messages")
        register = mint_register(state, self.ledger)
        self.transcript.append(TranscriptRecord(ALICE, receiver, "quantum", state.qubits, True))
        return register

    def bob_message(self, sender: str, receiver: str, nbits: int, kind: str = "classical") -> None:
        """Log Bob-to-Bob traffic; it is free but must be allowed."""
        if kind == "quantum" or self.config.bobs_interconnect == "quantum":
            raise ScenarioViolation("quantum communication between Bobs is not allowed")
        if self.config.bobs_interconnect == "none":
            raise ScenarioViolation("this scenario has no Bob-to-Bob channel")
        if sender == ALICE:
            raise ScenarioViolation("Alice's messages must be charged")
        self.transcript.append(TranscriptRecord(sender, receiver, "classical", int(nbits), False))

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.transcript)


@dataclass
class ProtocolRun:
    protocol: str
    outputs: Any
    ledger: CostLedger
    transcript: list[TranscriptRecord]


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    instance_type: type
    channel: Literal["classical", "quantum"]
    run: Callable[..., tuple[Any, CostLedger]]
    expected_cost: Callable[..., CostLedger]


PROTOCOLS: dict[str, ProtocolSpec] = {}


def register_protocol(spec: ProtocolSpec) -> ProtocolSpec:
    PROTOCOLS[spec.name] = spec
    return spec


def run_protocol(
    instance,
    name: str,
    rng: np.random.Generator | None = None,
    config: ScenarioConfig | None = None,
    **params,
) -> ProtocolRun:
    """Run a registered protocol and audit its ledger against the closed form."""
    # protocol modules register themselves on import
    from . import matching, mlrs  # noqa: F401

    try:
        spec = PROTOCOLS[name]
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; known: {sorted(PROTOCOLS)}") from None
    if not isinstance(instance, spec.instance_type):
        raise TypeError(f"{name} expects {spec.instance_type.__name__}, got {type(instance).__name__}")
    if config is None:
        config = ScenarioConfig(alice_channel=spec.channel)
    if config.bobs_interconnect == "quantum":
        raise ScenarioViolation("quantum Bob interconnect is disallowed in single-copy scenarios")
    if config.alice_channel != spec.channel:
        raise ScenarioViolation(f"{name} needs a {spec.channel} Alice channel")
    if rng is None:
        rng = make_rng(config.seed)

    session = Session(config)
    outputs, ledger = spec.run(instance, rng=rng, session=session, **params)
    expected = spec.expected_cost(instance, outputs, **params)
    if (ledger.classical_bits, ledger.qubits) != (expected.classical_bits, expected.qubits):
        raise LedgerMismatch(f"{name}: charged {ledger}, closed form {expected}")
    return ProtocolRun(name, outputs, ledger, session.transcript)
