"""Multiple linear regression sampling (MLRS).

Alice holds a real unit vector ``x``; Bob holds matrices ``B_k`` and wants one
sample from each distribution ``p_i ∝ |[B_k^+ x]_i|^2``.

Sample values and distribution supports are 1-based: outcome ``i`` lives at
array index ``i - 1``.

Reals are transmitted as ``ceil(log2 N)``-bit fixed-point codes on the grid
``-1 + 2 v / 2^bits``; the instance vector is the renormalised decoded grid
vector, so Alice's classical message determines it exactly.

The quantum sampler models the block-encoded application of ``B^+`` as an
``(N + 1)``-outcome POVM on one copy of ``|x>``: outcome ``i`` has element
``A^T |i><i| A`` with ``A = B^+ / ||B^+||`` and the extra outcome is the
failure branch ``I - A^T A``. Outcome ``i`` therefore occurs with probability
``|[B^+ x]_i|^2 / ||B^+||^2``, and a copy succeeds with probability
``||B^+ x||^2 / ||B^+||^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum import Povm, StateVector, measure_povm, qubits_for_dim
from .runtime import CostLedger, ProtocolSpec, Session, register_protocol

PINV_TOL = 1e-10


class IllPosedInstance(ValueError):
    """``B^+ x`` vanishes, so the target distribution is undefined."""


class AttemptCapExceeded(RuntimeError):
    def __init__(self, message: str, partial: "MlrsSamples", ledger: CostLedger) -> None:
        super().__init__(message)
        self.partial = partial
        self.ledger = ledger


# -- fixed-point transport ----------------------------------------------------

def precision_bits(n: int) -> int:
    return max(1, qubits_for_dim(n))


def quantize(x, bits: int) -> np.ndarray:
    levels = 1 << bits
    codes = np.rint((np.asarray(x, dtype=float) + 1.0) * (levels / 2))
    return np.clip(codes, 0, levels - 1).astype(np.int64)


def dequantize(codes, bits: int) -> np.ndarray:
    return -1.0 + 2.0 * np.asarray(codes, dtype=float) / (1 << bits)


def codes_to_bits(codes, bits: int) -> list[int]:
    return [(int(c) >> s) & 1 for c in codes for s in reversed(range(bits))]


def bits_to_codes(payload: Sequence[int], bits: int) -> np.ndarray:
    arr = np.asarray(payload, dtype=np.int64).reshape(-1, bits)
    weights = 1 << np.arange(bits - 1, -1, -1)
    return arr @ weights


def decode_vector(codes, bits: int) -> np.ndarray:
    v = dequantize(codes, bits)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("vector rounds to zero at this precision")
    return v / norm


# -- instances ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MlrsInstance:
    codes: np.ndarray
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        codes = np.asarray(self.codes, dtype=np.int64).reshape(-1)
        n = codes.shape[0]
        mats = tuple(np.asarray(b, dtype=float) for b in self.matrices)
        if not mats:
            raise ValueError("need at least one matrix")
        for b in mats:
            if b.shape != (n, n):
                raise ValueError(f"matrices must be {n}x{n}, got {b.shape}")
            if not np.all(np.isfinite(b)):
                raise ValueError("matrices must be finite")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "x", decode_vector(codes, self.bits))

    @classmethod
    def from_vector(cls, x, matrices) -> "MlrsInstance":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(quantize(x, precision_bits(x.shape[0])), tuple(matrices))

    @property
    def N(self) -> int:
        return self.codes.shape[0]

    @property
    def m(self) -> int:
        return len(self.matrices)

    @property
    def bits(self) -> int:
        return precision_bits(self.N)

    def to_json(self) -> str:
        return json.dumps({
            "N": self.N,
            "x": dequantize(self.codes, self.bits).tolist(),
            "matrices": [b.tolist() for b in self.matrices],
        })

    @classmethod
    def from_json(cls, text: str) -> "MlrsInstance":
        data = json.loads(text)
        inst = cls.from_vector(data["x"], [np.array(b) for b in data["matrices"]])
        if inst.N != data["N"]:
            raise ValueError("N does not match the length of x")
        return inst


def random_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def identity_instance(n: int, m: int, rng: np.random.Generator) -> MlrsInstance:
    return MlrsInstance.from_vector(random_unit_vector(n, rng), [np.eye(n)] * m)


@dataclass(frozen=True)
class UnaryMeta:
    N: int
    m: int
    r: tuple[int, ...]

    @property
    def block(self) -> int:
        return self.N // self.m

    def position(self, j: int) -> int:
        """1-based position of the nonzero entry of block ``j`` (1-based)."""
        return self.block * (j - 1) + self.r[j - 1]


def unary_block_instance(
    n: int, m: int, r: Sequence[int] | None = None, bits: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[MlrsInstance, UnaryMeta]:
    """Random-access hard instance: ``m`` blocks of size ``N/m``, block ``j``
    holding ``sqrt(1/m)`` at offset ``r_j``; ``B_j`` projects onto block ``j``.

    ``r`` can be given directly, derived from ``m * log2(N/m)`` bits, or drawn
    uniformly from ``rng``.
    """
    if m < 1 or n % m:
        raise ValueError(f"m={m} must divide N={n}")
    size = n // m
    if size < 2:
        raise ValueError("blocks need at least two positions")
    if bits is not None:
        width = int(math.log2(size))
        if 1 << width != size:
            raise ValueError("bit input needs N/m to be a power of two")
        bits = [int(b) for b in bits]
        if len(bits) != m * width:
            raise ValueError(f"need {m * width} bits, got {len(bits)}")
        r = [int("".join(map(str, bits[j * width:(j + 1) * width])), 2) + 1 for j in range(m)]
    elif r is None:
        if rng is None:
            raise ValueError("give r, bits or rng")
        r = (rng.integers(0, size, size=m) + 1).tolist()
    r = tuple(int(v) for v in r)
    if len(r) != m or not all(1 <= v <= size for v in r):
        raise ValueError(f"r must hold {m} values in [1, {size}]")
    meta = UnaryMeta(n, m, r)
    x = np.zeros(n)
    mats = []
    for j in range(1, m + 1):
        x[meta.position(j) - 1] = math.sqrt(1.0 / m)
        diag = np.zeros(n)
        diag[size * (j - 1):size * j] = 1.0
        mats.append(np.diag(diag))
    return MlrsInstance.from_vector(x, mats), meta


# -- linear algebra -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PseudoinverseResult:
    B_plus: np.ndarray
    spectral_norm_Bplus: float
    rank: int
    tol: float


def pseudoinverse(B, tol: float = PINV_TOL) -> PseudoinverseResult:
    """Moore-Penrose inverse by SVD; singular values <= ``tol * s_max`` count as zero."""
    B = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(B)):
        raise ValueError("matrix must be finite")
    u, s, vt = np.linalg.svd(B)
    if s.size == 0 or s[0] == 0.0:
        return PseudoinverseResult(np.zeros(B.T.shape), 0.0, 0, tol)
    keep = s > tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    k = s.shape[0]
    b_plus = (vt[:k].T * s_inv) @ u[:, :k].T
    return PseudoinverseResult(b_plus, float(s_inv.max()), int(keep.sum()), tol)


def target_distribution(x, B) -> np.ndarray:
    y = pseudoinverse(B).B_plus @ np.asarray(x, dtype=float)
    norm2 = float(y @ y)
    if norm2 < 1e-24:
        raise IllPosedInstance("B^+ x = 0: x is orthogonal to the column space of B")
    return y * y / norm2


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support sizes differ: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def empirical_distribution(samples, n: int) -> np.ndarray:
    samples = np.asarray(list(samples), dtype=np.int64)
    if samples.size == 0:
        raise ValueError("no samples")
    if samples.min() < 1 or samples.max() > n:
        raise ValueError(f"samples must lie in [1, {n}]")
    return np.bincount(samples - 1, minlength=n) / samples.size


def draw(p: np.ndarray, rng: np.random.Generator, size: int | None = None):
    """1-based sample(s) from a probability vector."""
    cdf = np.cumsum(p)
    u = rng.random(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), p.shape[0] - 1) + 1
    return int(idx) if size is None else idx


# -- protocols ------------------------------------------------------------------

@dataclass
class MlrsSamples:
    samples: list[list[int]] = field(default_factory=list)
    attempts: list[list[int]] = field(default_factory=list)

    def total_attempts(self) -> int:
        return sum(sum(a) for a in self.attempts)


@dataclass(frozen=True, eq=False)
class BlockEncodingMeasurement:
    povm: Povm
    success_probability: float


def block_encoding_measurement(x: np.ndarray, B) -> BlockEncodingMeasurement:
    pinv = pseudoinverse(B)
    if pinv.rank == 0:
        raise IllPosedInstance("B is zero")
    a = pinv.B_plus / pinv.spectral_norm_Bplus
    w, v = np.linalg.eigh(np.eye(a.shape[1]) - a.T @ a)
    fail = (v * np.sqrt(np.clip(w, 0.0, None))).T
    n = a.shape[1]
    rows = np.vstack([a, fail])
    owner = np.concatenate([np.arange(n), np.full(n, n)])
    q = float(np.sum((a @ x) ** 2))
    if q < 1e-24:
        raise IllPosedInstance("B^+ x = 0: x is orthogonal to the column space of B")
    return BlockEncodingMeasurement(Povm(rows, owner, n + 1), q)


def default_attempt_cap(q: float) -> int:
    return math.ceil(64.0 / q)


def run_mlrs_quantum(
    inst: MlrsInstance,
    rng: np.random.Generator,
    session: Session | None = None,
    attempt_cap: int | None = None,
    samples_per_matrix: int = 1,
) -> tuple[MlrsSamples, CostLedger]:
    """Repeat-until-success sampling; every attempt consumes one fresh copy of ``|x>``."""
    session = session or Session()
    state = StateVector(inst.x)
    out = MlrsSamples()
    n = inst.N
    for k, B in enumerate(inst.matrices):
        meas = block_encoding_measurement(inst.x, B)
        cap = attempt_cap if attempt_cap is not None else default_attempt_cap(meas.success_probability)
        if cap < 1:
            raise ValueError("attempt_cap must be >= 1")
        got, tries = [], []
        out.samples.append(got)
        out.attempts.append(tries)
        for _ in range(samples_per_matrix):
            for attempt in range(1, cap + 1):
                register = session.send_quantum(state, receiver=f"bob{k + 1}")
                outcome = measure_povm(register, meas.povm, rng)
                if outcome < n:
                    got.append(outcome + 1)
                    tries.append(attempt)
                    break
            else:
                tries.append(cap)
                raise AttemptCapExceeded(
                    f"matrix {k + 1}: no success in {cap} attempts (q={meas.success_probability:.3g})",
                    out, session.ledger,
                )
    return out, session.ledger


def mlrs_quantum_cost(inst: MlrsInstance, outputs: MlrsSamples, **_) -> CostLedger:
    return CostLedger(qubits=outputs.total_attempts() * qubits_for_dim(inst.N))


def run_mlrs_classical(
    inst: MlrsInstance,
    rng: np.random.Generator,
    session: Session | None = None,
    samples_per_matrix: int = 1,
) -> tuple[MlrsSamples, CostLedger]:
    """Alice sends her whole discretised vector once; Bob samples exactly, for free."""
    session = session or Session()
    message = session.send_classical(codes_to_bits(inst.codes, inst.bits))
    x = decode_vector(bits_to_codes(message.payload, inst.bits), inst.bits)
    out = MlrsSamples()
    for B in inst.matrices:
        p = target_distribution(x, B)
        got = draw(p, rng, samples_per_matrix).tolist()
        out.samples.append(got)
        out.attempts.append([0] * len(got))
    return out, session.ledger


def mlrs_classical_cost(inst: MlrsInstance, outputs=None, **_) -> CostLedger:
    return CostLedger(classical_bits=inst.N * precision_bits(inst.N))


register_protocol(ProtocolSpec("mlrs-quantum", MlrsInstance, "quantum", run_mlrs_quantum, mlrs_quantum_cost))
register_protocol(ProtocolSpec("mlrs-classical", MlrsInstance, "classical", run_mlrs_classical, mlrs_classical_cost))


# -- random-access recovery -----------------------------------------------------

def corrupt_distribution(p, eta: float) -> np.ndarray:
    """Move mass ``eta`` off the support of ``p`` (uniformly), giving TV exactly ``eta``.

    If ``p`` has full support the mass is spread uniformly instead, which moves
    it by at most ``eta`` in TV.
    """
    p = np.asarray(p, dtype=float)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    outside = p <= 0.0
    w = outside / outside.sum() if outside.any() else np.full_like(p, 1.0 / p.shape[0])
    return (1.0 - eta) * p + eta * w


def recover_bits(samples: Sequence[int | None], meta: UnaryMeta) -> tuple[list[int | None], float | None]:
    """Read ``r_j`` off the block-``j`` sample; returns the values and the hit rate.

    A sample outside its block yields ``None`` for that block. With no samples
    the rate is ``None`` (undefined).
    """
    samples = list(samples)
    if not samples:
        return [], None
    if len(samples) != meta.m:
        raise ValueError(f"expected one sample per block ({meta.m}), got {len(samples)}")
    recovered: list[int | None] = []
    for j, s in enumerate(samples, start=1):
        offset = None if s is None else int(s) - meta.block * (j - 1)
        recovered.append(offset if offset is not None and 1 <= offset <= meta.block else None)
    hits = sum(rv == r for rv, r in zip(recovered, meta.r))
    return recovered, hits / meta.m


def r_to_bits(r: Sequence[int], block: int) -> list[int]:
    width = int(math.log2(block))
    return [((v - 1) >> s) & 1 for v in r for s in reversed(range(width))]
