"""Machine checks of the deterministic Hidden Matching lower bound at tiny N.

Feasibility of a message class
------------------------------
A deterministic protocol answers ``(i, j, b)`` as a function of the message
and the matching only. So a set ``S`` of inputs can share one message iff for
every perfect matching there is an edge ``(i, j)`` whose parity
``x_i xor x_j`` is the same for all ``x`` in ``S``: if such an edge exists
the protocol can answer it, and if it does not, whatever edge is answered has
the wrong parity for some member of ``S``. This is checked one matching at a
time, which is exactly the row-constraint view of the protocol matrix.

Feasibility is inherited by subsets, so the largest feasible class is found
by a depth-first search that never extends an infeasible set.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable

from .matching import Answer, PerfectMatching, all_matchings, parse_bits

MAX_FEASIBLE_N = 8
SUPPORTED_VERIFY_N = (2, 4, 6)


def _check_n(n: int, limit: int = MAX_FEASIBLE_N) -> None:
    if n < 2 or n % 2:
        raise ValueError(f"N must be even and >= 2, got {n}")
    if n > limit:
        raise ValueError(f"N={n} is too large for exhaustive checking (limit {limit})")


@dataclass(frozen=True)
class MessageClass:
    n: int
    members: frozenset

    def __post_init__(self) -> None:
        members = frozenset(m if isinstance(m, str) else "".join(map(str, m)) for m in self.members)
        if not members:
            raise ValueError("a message class is nonempty")
        for m in members:
            if len(m) != self.n or set(m) - {"0", "1"}:
                raise ValueError(f"{m!r} is not a bit string of length {self.n}")
        object.__setattr__(self, "members", members)


def _parity(x: str, edge: tuple[int, int]) -> int:
    return int(x[edge[0] - 1]) ^ int(x[edge[1] - 1])


def class_feasible(S: MessageClass) -> bool:
    """True iff one message can serve every input in ``S`` for every matching."""
    _check_n(S.n)
    rows = list(S.members)
    for mt in all_matchings(S.n):
        if not any(len({_parity(x, e) for x in rows}) == 1 for e in mt.pairs):
            return False
    return True


class _Tables:
    """Bitmask tables for fast feasibility tests over all inputs of length n."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.edges = list(combinations(range(1, n + 1), 2))
        index = {e: t for t, e in enumerate(self.edges)}
        self.matching_masks = [sum(1 << index[e] for e in mt.pairs) for mt in all_matchings(n)]
        # agree[y]: edges whose endpoints carry equal bits in y (y = x xor x0)
        self.agree = []
        for y in range(1 << n):
            bit = [(y >> (n - k)) & 1 for k in range(1, n + 1)]
            self.agree.append(sum(1 << t for t, (i, j) in enumerate(self.edges) if bit[i - 1] == bit[j - 1]))
        self.full = (1 << len(self.edges)) - 1

    def feasible(self, mask: int) -> bool:
        return all(mask & mm for mm in self.matching_masks)


def _search_from(n: int, first: int, target: int) -> tuple[int, list[int]]:
    """Largest feasible class (capped at ``target``) whose smallest member is ``first``."""
    t = _Tables(n)
    total = 1 << n
    best: list[int] = [first]

    def dfs(members: list[int], mask: int, start: int) -> bool:
        nonlocal best
        if len(members) > len(best):
            best = list(members)
        if len(members) >= target:
            return True
        for y in range(start, total):
            new = mask & t.agree[y ^ first]
            if t.feasible(new):
                members.append(y)
                if dfs(members, new, y + 1):
                    return True
                members.pop()
        return False

    dfs([first], t.full, first + 1)
    return len(best), best


def max_feasible_class(n: int, cap: int | None = None, workers: int = 1) -> tuple[int, list[str]]:
    """Size of the largest feasible message class (searching no further than ``cap``).

    The search is partitioned by smallest member; with ``workers > 1`` the
    partitions run in a process pool.
    """
    _check_n(n)
    target = cap if cap is not None else 1 << n
    firsts = range(1 << n)
    args = [(n, f, target) for f in firsts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_search_star, args))
    else:
        results = []
        for a in args:
            results.append(_search_star(a))
            if results[-1][0] >= target:
                break
    size, members = max(results, key=lambda r: r[0])
    return size, [format(v, f"0{n}b") for v in members]


def _search_star(args) -> tuple[int, list[int]]:
    return _search_from(*args)


@dataclass(frozen=True)
class LowerBoundCertificate:
    n: int
    max_class: int
    implied_bits: int
    witness: tuple[str, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "max_class": self.max_class, "implied_bits": self.implied_bits}


def verify_det_lower_bound(n: int, workers: int = 1) -> LowerBoundCertificate:
    """Exhaustively determine the largest feasible message class for ``n``.

    Every class is searched, so the returned maximum is exact. The number of
    distinct messages is then at least ``2^n / max_class``, which is recorded
    as ``implied_bits``.
    """
    if n not in SUPPORTED_VERIFY_N:
        raise ValueError(f"supported N values are {SUPPORTED_VERIFY_N}, got {n}")
    size, witness = max_feasible_class(n, workers=workers)
    implied = math.ceil(math.log2((1 << n) / size))
    return LowerBoundCertificate(n, size, implied, tuple(witness))


def relative_parity_message(x) -> tuple[int, ...]:
    """``N/2`` bits: ``x_1 xor x_k`` for ``k = 2 .. N/2 + 1``.

    Knowing every parity inside the first ``N/2 + 1`` nodes is all the
    deterministic prefix protocol ever uses, so this message answers every
    matching with one bit fewer than sending the prefix itself.
    """
    x = parse_bits(x)
    return tuple(x[0] ^ x[k] for k in range(1, len(x) // 2 + 1))


def relative_parity_answer(message, matching: PerfectMatching) -> Answer:
    rel = (0,) + tuple(message)
    for i, j in matching.pairs:
        if j <= len(rel):
            return Answer(i, j, rel[i - 1] ^ rel[j - 1])
    raise ValueError("message too short to cover an edge of every matching")


# -- adversary construction --------------------------------------------------

class ProtocolViolation(RuntimeError):
    """The oracle answered with an edge that is not in the queried matching."""


class ConstraintGraph:
    """Parity constraints ``x_i xor x_j = b`` as a labelled graph on ``[N]``."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.edges: list[tuple[int, int, int]] = []
        self._parent = list(range(n + 1))

    def find(self, v: int) -> int:
        while self._parent[v] != v:
            self._parent[v] = self._parent[self._parent[v]]
            v = self._parent[v]
        return v

    def add(self, i: int, j: int, b: int) -> bool:
        """Add an edge; returns True if it joined two different components."""
        self.edges.append((i, j, b))
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self._parent[max(ri, rj)] = min(ri, rj)
        return True

    def touched(self) -> set[int]:
        return {v for i, j, _ in self.edges for v in (i, j)}

    def components(self) -> list[list[int]]:
        """Components of the touched nodes, largest first, ties by lowest node."""
        groups: dict[int, list[int]] = {}
        for v in sorted(self.touched()):
            groups.setdefault(self.find(v), []).append(v)
        return sorted(groups.values(), key=lambda c: (-len(c), c[0]))

    def degrees_of_freedom(self) -> int:
        """Free bits left in ``x``: one per component, isolated nodes included."""
        return len({self.find(v) for v in range(1, self.n + 1)})

    def consistent(self, x: str) -> bool:
        return all((int(x[i - 1]) ^ int(x[j - 1])) == b for i, j, b in self.edges)

    def solutions(self) -> list[str]:
        return [s for s in (format(v, f"0{self.n}b") for v in range(1 << self.n)) if self.consistent(s)]


Oracle = Callable[[PerfectMatching], Answer | tuple]


def _pair_up(nodes: Iterable[int]) -> list[tuple[int, int]]:
    nodes = list(nodes)
    return list(zip(nodes[0::2], nodes[1::2]))


def _cross_component_matching(components: list[list[int]]) -> list[tuple[int, int]]:
    """Final matching when all ``N/2`` components are edges.

    Components are grouped in twos, ``{a,b},{c,d}`` -> ``(a,c),(b,d)``. With
    an odd number of components the last group has three and is closed into a
    cycle ``(b,c),(d,e),(f,a)``.
    """
    pairs = []
    groups = [components[t:t + 2] for t in range(0, len(components), 2)]
    if len(groups) > 1 and len(groups[-1]) == 1:
        tail = groups.pop()
        groups[-1] = groups[-1] + tail
    for g in groups:
        if len(g) == 2:
            (a, b), (c, d) = g
            pairs += [(a, c), (b, d)]
        else:
            flat = [v for comp in g for v in comp]
            pairs += [(flat[k], flat[k + 1]) for k in range(1, len(flat) - 1, 2)] + [(flat[-1], flat[0])]
    return pairs


@dataclass
class AdversaryRun:
    matchings: list[PerfectMatching]
    graph: ConstraintGraph
    termination: str


def adversary_matchings(n: int, oracle: Oracle) -> AdversaryRun:
    """Drive a fixed-message protocol through matchings that force progress.

    Each queried matching avoids every edge inside an existing component, so
    whichever edge the oracle picks either merges two components or adds a new
    node, and no matching can repeat. Tie-breaks are lowest-index-first.
    """
    if n < 4 or n % 2:
        raise ValueError(f"N must be even and >= 4, got {n}")
    half = n // 2
    g = ConstraintGraph(n)
    queried: list[PerfectMatching] = []

    def ask(pairs) -> None:
        mt = PerfectMatching(n, tuple(pairs))
        if mt in queried:
            raise AssertionError(f"adversary repeated matching {mt.pairs}")
        i, j, b = oracle(mt)
        if (i, j) not in mt:
            raise ProtocolViolation(f"oracle answered ({i}, {j}) which is not in {mt.pairs}")
        if not g.add(min(i, j), max(i, j), int(b)):
            raise AssertionError("oracle edge fell inside a component")
        queried.append(mt)

    # phase (i): pair each connected node with a fresh one
    ask(_pair_up(range(1, n + 1)))
    while len(g.touched()) <= half:
        connected = sorted(g.touched())
        fresh = [v for v in range(1, n + 1) if v not in g.touched()]
        ask(list(zip(connected, fresh)) + _pair_up(fresh[len(connected):]))

    # phase (ii): split the ordered connected nodes at N/2
    while True:
        comps = g.components()
        if len(comps[0]) > half:
            return AdversaryRun(queried, g, "b")
        touched = g.touched()
        if len(touched) == n:
            if len(comps) < half:
                return AdversaryRun(queried, g, "a1")
            ask(_cross_component_matching(comps))
            return AdversaryRun(queried, g, "a2")
        order = [v for comp in comps for v in comp]
        lower, upper = order[:half], order[half:]
        fresh = [v for v in range(1, n + 1) if v not in touched]
        pairs = list(zip(upper, lower)) + list(zip(lower[len(upper):], fresh))
        ask(pairs)
