"""Finite-dimensional pure-state simulation with single-use registers.

States are complex amplitude vectors of arbitrary dimension. A
:class:`QuantumRegister` wraps one state and can be measured exactly once;
it offers no way to read amplitudes back or to copy itself, which is how the
simulator models no-cloning operationally.

POVMs are stored in factored form: a stack of row vectors ``f_r`` together
with an ``owner`` array mapping each row to an outcome, so that
``E_k = sum_{r: owner[r] == k} f_r^dagger f_r``. Born probabilities are then
``q_k = sum |f_r . psi|^2`` which costs one matrix-vector product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-9
PSD_TOL = 1e-9
ENTRY_TOL = 1e-8


class ConsumedRegisterError(RuntimeError):
    """A register was measured after it had already been consumed.

    In protocol terms this is an attempt to re-use data that was sent once.
    """


def make_rng(seed: int | None) -> np.random.Generator:
    """Return the repo-wide deterministic generator (PCG64) for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def qubits_for_dim(dim: int) -> int:
    """Number of qubits needed to hold a ``dim``-level system."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    return math.ceil(math.log2(dim)) if dim > 1 else 0


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 1:
            raise ValueError("state must have dimension >= 1")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def qubits(self) -> int:
        return qubits_for_dim(self.dim)

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim})"


def normalize(v) -> StateVector:
    v = np.asarray(v, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if v.size == 0 or norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return StateVector(v / norm)


_register_ids = itertools.count(1)


class QuantumRegister:
    """Opaque single-use handle on a quantum state.

    Only :func:`consumelab.runtime.mint_register` should create registers,
    since that is where qubits get charged. Measurement functions in this
    module are the only consumers.
    """

    __slots__ = ("_state", "_consumed", "id")

    def __init__(self, state: StateVector, _token: object = None) -> None:
        if _token is not _MINT_TOKEN:
            raise TypeError("registers are minted by the protocol runtime")
        self._state = state
        self._consumed = False
        self.id = next(_register_ids)

    @property
    def consumed(self) -> bool:
        return self._consumed

    @property
    def dim(self) -> int:
        return self._state.dim

    def __copy__(self):
        raise TypeError("quantum registers cannot be copied")

    def __deepcopy__(self, memo):
        raise TypeError("quantum registers cannot be copied")

    def __reduce__(self):
        raise TypeError("quantum registers cannot be serialized")

    def __repr__(self) -> str:
        status = "consumed" if self._consumed else "fresh"
        return f"QuantumRegister(id={self.id}, dim={self.dim}, {status})"


_MINT_TOKEN = object()


def _new_register(state: StateVector) -> QuantumRegister:
    return QuantumRegister(state, _MINT_TOKEN)


def _consume(register: QuantumRegister) -> np.ndarray:
    if register._consumed:
        raise ConsumedRegisterError(
            f"register {register.id} was already measured; data cannot be re-used"
        )
    register._consumed = True
    return register._state.amplitudes


@dataclass(frozen=True, eq=False)
class Povm:
    """POVM in factored form; see the module docstring.

    ``check=False`` skips the completeness and PSD checks and is meant for
    constructions that are complete by design (e.g. orthonormal bases).
    """

    rows: np.ndarray
    owner: np.ndarray
    n_outcomes: int
    check: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        rows = np.atleast_2d(np.asarray(self.rows, dtype=complex))
        owner = np.asarray(self.owner, dtype=np.intp).reshape(-1)
        if owner.shape[0] != rows.shape[0]:
            raise ValueError("owner must have one entry per row")
        if owner.size and (owner.min() < 0 or owner.max() >= self.n_outcomes):
            raise ValueError("owner entries out of range")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "owner", owner)
        if self.check:
            gap = completeness_error(self)
            if gap >= ENTRY_TOL:
                raise ValueError(f"POVM elements do not sum to identity (max deviation {gap:.3g})")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_elements(cls, elements, check: bool = True) -> "Povm":
        """Factor dense Hermitian PSD elements via their eigendecompositions."""
        elements = np.asarray(elements, dtype=complex)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise ValueError("elements must have shape (K, d, d)")
        rows, owner = [], []
        for k, e in enumerate(elements):
            if not np.allclose(e, e.conj().T, atol=ENTRY_TOL, rtol=0):
                raise ValueError(f"element {k} is not Hermitian")
            w, v = np.linalg.eigh(e)
            if w.min() < -PSD_TOL:
                raise ValueError(f"element {k} is not positive semidefinite (min eig {w.min():.3g})")
            for lam, vec in zip(w, v.T):
                if lam > PSD_TOL:
                    rows.append(np.sqrt(lam) * vec.conj())
                    owner.append(k)
        d = elements.shape[1]
        rows_arr = np.array(rows, dtype=complex).reshape(len(rows), d)
        return cls(rows_arr, np.array(owner, dtype=np.intp), elements.shape[0], check=check)

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls(np.eye(dim, dtype=complex), np.arange(dim), dim, check=False)

    def elements(self) -> np.ndarray:
        d = self.dim
        out = np.zeros((self.n_outcomes, d, d), dtype=complex)
        for f, k in zip(self.rows, self.owner):
            out[k] += np.outer(f.conj(), f)
        return out


def completeness_error(povm: Povm) -> float:
    """Max-entry deviation of the summed POVM elements from the identity."""
    total = povm.rows.conj().T @ povm.rows
    return float(np.max(np.abs(total - np.eye(povm.dim))))


def _born(amplitudes: np.ndarray, povm: Povm) -> np.ndarray:
    if amplitudes.shape[0] != povm.dim:
        raise ValueError(f"dimension mismatch: state {amplitudes.shape[0]}, POVM {povm.dim}")
    weights = np.abs(povm.rows @ amplitudes) ** 2
    q = np.bincount(povm.owner, weights=weights, minlength=povm.n_outcomes)
    return np.clip(q, 0.0, None)


def born_probabilities(state: StateVector, povm: Povm) -> np.ndarray:
    """Outcome distribution ``q_k = <psi|E_k|psi>`` of measuring ``state``."""
    q = _born(state.amplitudes, povm)
    total = q.sum()
    if abs(total - 1.0) > ENTRY_TOL:
        raise ValueError(f"POVM is incomplete on this state (probabilities sum to {total!r})")
    return q


def _sample(q: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(q)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, q.shape[0] - 1)


def measure_povm(register: QuantumRegister, povm: Povm, rng: np.random.Generator) -> int:
    """Measure ``register`` with ``povm`` and return the outcome index.

    The register is consumed whether or not the measurement succeeds in a
    protocol sense.
    """
    if register.dim != povm.dim:
        raise ValueError(f"dimension mismatch: register {register.dim}, POVM {povm.dim}")
    amps = _consume(register)
    q = _born(amps, povm)
    if abs(q.sum() - 1.0) > ENTRY_TOL:
        raise ValueError(f"POVM is incomplete on this state (probabilities sum to {q.sum()!r})")
    return _sample(q, rng)


def check_projector(projector: np.ndarray) -> np.ndarray:
    p = np.asarray(projector, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("projector must be a square matrix")
    if np.max(np.abs(p - p.conj().T)) > ENTRY_TOL:
        raise ValueError("projector is not Hermitian")
    if np.max(np.abs(p @ p - p)) > ENTRY_TOL:
        raise ValueError("matrix is not idempotent")
    return p


def measure_two_outcome(
    register: QuantumRegister,
    projector_plus: np.ndarray,
    rng: np.random.Generator,
    check: bool = True,
) -> int:
    """Two-outcome projective measurement; +1 on the ``projector_plus`` subspace."""
    p = check_projector(projector_plus) if check else np.asarray(projector_plus)
    if register.dim != p.shape[0]:
        raise ValueError(f"dimension mismatch: register {register.dim}, projector {p.shape[0]}")
    amps = _consume(register)
    prob_plus = float(np.real(np.vdot(amps, p @ amps)))
    prob_plus = min(max(prob_plus, 0.0), 1.0)
    return 1 if rng.random() < prob_plus else -1


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError("unitary must be square")
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > ENTRY_TOL:
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "matrix", u)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def haar_unitary(dim: int, rng: np.random.Generator) -> Unitary:
    # QR of a Ginibre matrix, with R's diagonal phases pushed into Q (Mezzadri)
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return Unitary(q)
