"""Two-outcome observable estimation by many Bobs from single copies.

Qubits are ordered big-endian, so the last qubit is the least significant bit
of a basis index and ``Z_n = I ⊗ Z`` is ``+1`` on even indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum import StateVector, Unitary, haar_unitary, measure_two_outcome
from .runtime import Session

MAX_QUBITS = 10


def last_qubit_z(n_qubits: int) -> np.ndarray:
    return np.where(np.arange(1 << n_qubits) % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class TwoOutcomeObservable:
    n_qubits: int
    U: Unitary
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.U.dim != 1 << self.n_qubits:
            raise ValueError(f"unitary must act on {self.n_qubits} qubits")

    @property
    def matrix(self) -> np.ndarray:
        u = self.U.matrix
        return self.sign * (u * last_qubit_z(self.n_qubits)) @ u.conj().T

    def projector(self, value: int = 1) -> np.ndarray:
        """Projector onto the ``value`` (+1 or -1) eigenspace."""
        z = last_qubit_z(self.n_qubits)
        keep = (self.sign * z == value).astype(float)
        u = self.U.matrix
        return (u * keep) @ u.conj().T


def sample_observable_ensemble(n_qubits: int, m: int, rng: np.random.Generator) -> list[TwoOutcomeObservable]:
    """``m/2`` observables ``U Z_n U^dagger`` and their ``m/2`` negations, fresh Haar ``U`` each."""
    if m < 2 or m % 2:
        raise ValueError(f"m must be a positive even number, got {m}")
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must lie in [1, {MAX_QUBITS}]")
    half = m // 2
    unitaries = [haar_unitary(1 << n_qubits, rng) for _ in range(half)]
    return [TwoOutcomeObservable(n_qubits, u, 1) for u in unitaries] + [
        TwoOutcomeObservable(n_qubits, u, -1) for u in unitaries
    ]


def expectation_exact(state: StateVector, obs: TwoOutcomeObservable) -> float:
    if state.dim != obs.U.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, observable {obs.U.dim}")
    val = np.vdot(state.amplitudes, obs.matrix @ state.amplitudes)
    if abs(val.imag) > 1e-9:
        raise ValueError("expectation has a non-negligible imaginary part")
    return float(val.real)


def copies_for_epsilon(epsilon: float) -> int:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    # guard against 2/eps^2 landing a hair above an integer
    return math.ceil(2.0 / epsilon**2 - 1e-9)


def estimate_single_copy(
    state: StateVector,
    obs: TwoOutcomeObservable,
    copies: int,
    rng: np.random.Generator,
    session: Session,
    receiver: str = "bob1",
) -> float:
    """Mean of ``copies`` single-copy ±1 measurements; each copy is minted fresh."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    plus = obs.projector(1)
    total = 0
    for t in range(copies):
        register = session.send_quantum(state, receiver=receiver)
        total += measure_two_outcome(register, plus, rng, check=(t == 0))
    return total / copies


@dataclass
class EstimationRun:
    estimates: list[float]
    exact: list[float]
    copies_total: int
    qubits_total: int

    @property
    def max_abs_error(self) -> float:
        return max(abs(e - x) for e, x in zip(self.estimates, self.exact))


def estimate_all(
    state: StateVector,
    observables: Sequence[TwoOutcomeObservable],
    copies: int,
    rng: np.random.Generator,
    session: Session | None = None,
) -> EstimationRun:
    """Bob ``k`` estimates observable ``k`` from his own ``copies`` registers."""
    session = session or Session()
    start = session.ledger.qubits
    n_sent = len(session.transcript)
    est = [
        estimate_single_copy(state, o, copies, rng, session, receiver=f"bob{k + 1}")
        for k, o in enumerate(observables)
    ]
    exact = [expectation_exact(state, o) for o in observables]
    return EstimationRun(est, exact, len(session.transcript) - n_sent, session.ledger.qubits - start)


@dataclass(frozen=True)
class CostModelRow:
    scenario: str
    value: float


def arms_race_costs(n: int, m: int) -> tuple[CostModelRow, CostModelRow, CostModelRow]:
    """Unit-constant shapes of the three communication regimes (not calibrated).

    classical-classical ``sqrt(N) log m``; quantum-classical ``m log N``;
    quantum-quantum ``(log m log N)^2``; logs are base 2.
    """
    if n < 2 or m < 2:
        raise ValueError("need N >= 2 and m >= 2")
    ln, lm = math.log2(n), math.log2(m)
    return (
        CostModelRow("classical-classical", math.sqrt(n) * lm),
        CostModelRow("quantum-classical", m * ln),
        CostModelRow("quantum-quantum", (lm * ln) ** 2),
    )
