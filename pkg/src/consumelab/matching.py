"""Hidden Matching and Multiple Hidden Matchings.

Nodes are 1-based and every edge is stored as ``(i, j)`` with ``i < j``.
An answer to one matching is ``Answer(i, j, b)``; a failed randomized run is
reported as ``None`` rather than being resampled, since a one-way protocol
has no second round.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .quantum import Povm, StateVector, measure_povm, qubits_for_dim
from .runtime import CostLedger, ProtocolSpec, Session, register_protocol


class Answer(NamedTuple):
    i: int
    j: int
    b: int


@dataclass(frozen=True)
class PerfectMatching:
    n: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ValueError(f"perfect matchings need an even n >= 2, got {self.n}")
        pairs = tuple(sorted((a, b) if a < b else (b, a) for a, b in self.pairs))
        seen = sorted(node for pair in pairs for node in pair)
        if len(pairs) != self.n // 2 or seen != list(range(1, self.n + 1)):
            raise ValueError(f"{self.pairs!r} is not a perfect matching on [{self.n}]")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[int]], n: int | None = None) -> "PerfectMatching":
        pairs = tuple((int(a), int(b)) for a, b in pairs)
        return cls(n if n is not None else 2 * len(pairs), pairs)

    def __contains__(self, edge) -> bool:
        i, j = edge
        return (min(i, j), max(i, j)) in self._edge_set

    @property
    def _edge_set(self) -> frozenset:
        cached = self.__dict__.get("_edges")
        if cached is None:
            cached = frozenset(self.pairs)
            object.__setattr__(self, "_edges", cached)
        return cached

    @property
    def index_array(self) -> np.ndarray:
        """0-based ``(N/2, 2)`` array of the canonical edges (cached, read-only)."""
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = np.asarray(self.pairs, dtype=np.intp) - 1
            cached.setflags(write=False)
            object.__setattr__(self, "_index", cached)
        return cached

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in self.pairs]


def all_matchings(n: int) -> Iterator[PerfectMatching]:
    """Every perfect matching on ``[n]``; there are ``(n-1)!!`` of them."""

    def rec(nodes: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
        if not nodes:
            yield []
            return
        first, rest = nodes[0], nodes[1:]
        for k, partner in enumerate(rest):
            for tail in rec(rest[:k] + rest[k + 1:]):
                yield [(first, partner)] + tail

    for pairs in rec(tuple(range(1, n + 1))):
        yield PerfectMatching(n, tuple(pairs))


def _matching_from_permutation(n: int, perm: np.ndarray) -> PerfectMatching:
    edges = (perm + 1).reshape(-1, 2)
    edges.sort(axis=1)
    edges = edges[np.argsort(edges[:, 0])]
    # canonical by construction, so skip re-validation
    mt = object.__new__(PerfectMatching)
    object.__setattr__(mt, "n", n)
    object.__setattr__(mt, "pairs", tuple(map(tuple, edges.tolist())))
    index = edges - 1
    index.setflags(write=False)
    object.__setattr__(mt, "_index", index)
    return mt


def random_matching(n: int, rng: np.random.Generator) -> PerfectMatching:
    if n < 2 or n % 2:
        raise ValueError(f"perfect matchings need an even n >= 2, got {n}")
    return _matching_from_permutation(n, rng.permutation(n))


def cyclic_matchings(n: int, m: int) -> list[PerfectMatching]:
    """Pairwise edge-disjoint family: odd node ``2a-1`` is paired with the even
    node obtained by shifting ``2a`` by ``k-1`` places (cyclically) in ``M_k``."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even, got {n}")
    half = n // 2
    if not 1 <= m <= half:
        raise ValueError(f"need 1 <= m <= n/2 = {half}, got m={m}")
    return [
        PerfectMatching(n, tuple((2 * a - 1, 2 * ((a + k - 2) % half + 1)) for a in range(1, half + 1)))
        for k in range(1, m + 1)
    ]


def parse_bits(x) -> tuple[int, ...]:
    if isinstance(x, str):
        if set(x) - {"0", "1"}:
            raise ValueError(f"not a bit string: {x!r}")
        return tuple(int(c) for c in x)
    bits = tuple(int(b) for b in x)
    if set(bits) - {0, 1}:
        raise ValueError("bits must be 0 or 1")
    return bits


def bits_to_str(x: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in x)


@dataclass(frozen=True)
class MhmInstance:
    x: tuple[int, ...]
    matchings: tuple[PerfectMatching, ...]

    def __post_init__(self) -> None:
        x = parse_bits(self.x)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "matchings", tuple(self.matchings))
        n = len(x)
        if n < 2 or n % 2:
            raise ValueError(f"x must have even length >= 2, got {n}")
        if not self.matchings:
            raise ValueError("need at least one matching")
        for mt in self.matchings:
            if mt.n != n:
                raise ValueError(f"matching over [{mt.n}] does not fit x of length {n}")

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def m(self) -> int:
        return len(self.matchings)

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "x": bits_to_str(self.x), "matchings": [mt.to_json() for mt in self.matchings]})

    @classmethod
    def from_json(cls, text: str) -> "MhmInstance":
        data = json.loads(text)
        x = parse_bits(data["x"])
        if len(x) != data["N"]:
            raise ValueError("N does not match the length of x")
        return cls(x, tuple(PerfectMatching.from_pairs(p, data["N"]) for p in data["matchings"]))


def random_instance(n: int, m: int, rng: np.random.Generator) -> MhmInstance:
    if m < 1:
        raise ValueError("need at least one matching")
    x = tuple(rng.integers(0, 2, size=n).tolist())
    perms = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    return MhmInstance(x, tuple(_matching_from_permutation(n, p) for p in perms))


def verify_output(x, matching: PerfectMatching, out: Answer | None) -> bool:
    if out is None:
        return False
    x = parse_bits(x)
    i, j, b = out
    return (i, j) in matching and b == x[i - 1] ^ x[j - 1]


# -- quantum protocol --------------------------------------------------------

def encode_hm_state(x) -> StateVector:
    """Amplitude ``(-1)^{x_i} / sqrt(N)`` on basis state ``i``."""
    x = parse_bits(x)
    if not x:
        raise ValueError("empty input string")
    signs = 1.0 - 2.0 * np.asarray(x, dtype=float)
    return StateVector(signs / math.sqrt(len(x)))


def matching_povm(matching: PerfectMatching) -> Povm:
    """``N``-outcome POVM; outcome ``2k + b`` is ``(|i_k> + (-1)^b |j_k>)/sqrt 2``.

    ``k`` is the 0-based position of the edge in canonical order. The vectors
    form an orthonormal basis, so completeness holds by construction and the
    dense check is skipped here (the tests verify it).
    """
    n = matching.n
    ij = matching.index_array
    k = np.arange(n // 2)
    inv = 1.0 / math.sqrt(2.0)
    rows = np.zeros((n, n), dtype=complex)
    rows[2 * k, ij[:, 0]] = rows[2 * k, ij[:, 1]] = rows[2 * k + 1, ij[:, 0]] = inv
    rows[2 * k + 1, ij[:, 1]] = -inv
    return Povm(rows, np.arange(n), n, check=False)


def decode_outcome(matching: PerfectMatching, outcome: int) -> Answer:
    k, b = divmod(outcome, 2)
    i, j = matching.pairs[k]
    return Answer(i, j, b)


def run_mhm_quantum(
    inst: MhmInstance, rng: np.random.Generator, session: Session | None = None
) -> tuple[list[Answer], CostLedger]:
    """One fresh copy of the sign state per matching; each Bob measures his copy."""
    session = session or Session()
    state = encode_hm_state(inst.x)
    answers = []
    for k, mt in enumerate(inst.matchings):
        register = session.send_quantum(state, receiver=f"bob{k + 1}")
        answers.append(decode_outcome(mt, measure_povm(register, matching_povm(mt), rng)))
    return answers, session.ledger


def quantum_cost(inst: MhmInstance, outputs=None) -> CostLedger:
    return CostLedger(qubits=inst.m * qubits_for_dim(inst.N))


# -- deterministic classical protocol ----------------------------------------

def det_prefix_length(n: int) -> int:
    return n // 2 + 1


def det_answer(prefix: Sequence[int], matching: PerfectMatching) -> Answer:
    """Lowest canonical edge with both endpoints inside the known prefix."""
    limit = len(prefix)
    for i, j in matching.pairs:
        if j <= limit:
            return Answer(i, j, prefix[i - 1] ^ prefix[j - 1])
    raise ValueError("prefix too short to cover an edge of every matching")


def run_mhm_det_classical(
    inst: MhmInstance, rng=None, session: Session | None = None
) -> tuple[list[Answer], CostLedger]:
    """Broadcast the first ``N/2 + 1`` bits once; every Bob re-uses them."""
    session = session or Session()
    message = session.send_classical(inst.x[: det_prefix_length(inst.N)])
    return [det_answer(message.payload, mt) for mt in inst.matchings], session.ledger


def det_cost(inst: MhmInstance, outputs=None) -> CostLedger:
    return CostLedger(classical_bits=det_prefix_length(inst.N))


# -- randomized classical protocol -------------------------------------------

DEFAULT_C = 3.0


def rand_subset_size(n: int, m: int, c: float = DEFAULT_C) -> int:
    """``min(N, ceil(c * sqrt(N) * (1 + ln m)))`` revealed nodes."""
    if c <= 0:
        raise ValueError("c must be positive")
    return min(n, math.ceil(c * math.sqrt(n) * (1.0 + math.log(m))))


def rand_bits_per_node(n: int) -> int:
    return qubits_for_dim(n) + 1


def run_mhm_rand_classical(
    inst: MhmInstance, rng: np.random.Generator, session: Session | None = None, c: float = DEFAULT_C
) -> tuple[list[Answer | None], CostLedger]:
    """Reveal ``(index, value)`` for a uniform random node subset.

    Each Bob answers with the lowest edge of his matching that lies inside the
    subset, or ``None`` if there is none.
    """
    session = session or Session()
    n = inst.N
    size = rand_subset_size(n, inst.m, c)
    chosen = np.sort(rng.choice(n, size=size, replace=False)) + 1
    width = qubits_for_dim(n)
    payload = []
    for node in chosen.tolist():
        payload.extend((node - 1) >> s & 1 for s in reversed(range(width)))
        payload.append(inst.x[node - 1])
    message = session.send_classical(payload)

    known = {}
    bits = message.payload
    for t in range(size):
        chunk = bits[t * (width + 1):(t + 1) * (width + 1)]
        idx = int("".join(map(str, chunk[:width])) or "0", 2) + 1
        known[idx] = chunk[width]
    answers: list[Answer | None] = []
    for mt in inst.matchings:
        answer = None
        for i, j in mt.pairs:
            if i in known and j in known:
                answer = Answer(i, j, known[i] ^ known[j])
                break
        answers.append(answer)
    return answers, session.ledger


def rand_cost(inst: MhmInstance, outputs=None, c: float = DEFAULT_C) -> CostLedger:
    return CostLedger(classical_bits=rand_subset_size(inst.N, inst.m, c) * rand_bits_per_node(inst.N))


register_protocol(ProtocolSpec("mhm-quantum", MhmInstance, "quantum", run_mhm_quantum, quantum_cost))
register_protocol(ProtocolSpec("mhm-det", MhmInstance, "classical", run_mhm_det_classical, det_cost))
register_protocol(ProtocolSpec("mhm-rand", MhmInstance, "classical", run_mhm_rand_classical, rand_cost))
