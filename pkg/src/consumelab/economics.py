"""Posted-price data auctions, production-function checks and consumability meters.

Logarithms in the market formulas are base 2, matching the qubit accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class QuantumMarketParams:
    N: int
    C: float = 1.0
    m_bar: int = 100

    def __post_init__(self) -> None:
        if self.N < 2 or self.C <= 0 or self.m_bar < 1:
            raise ValueError("need N >= 2, C > 0 and m_bar >= 1")

    @property
    def threshold(self) -> float:
        """Price at and above which Bob buys nothing."""
        return self.C / math.log2(self.N)


@dataclass(frozen=True)
class ClassicalMarketParams:
    kappa: int
    rho: float = 1.0

    def __post_init__(self) -> None:
        if self.kappa < 1 or not 0 < self.rho <= 1:
            raise ValueError("need kappa >= 1 and 0 < rho <= 1")


@dataclass(frozen=True)
class AuctionOutcome:
    price: float
    b_star: float
    v_A: float
    v_B: float


def bob_best_response_quantum(m: float, p: float, params: QuantumMarketParams) -> tuple[float, float]:
    """Maximiser of ``min(C b / log N, m) - p b``; returns ``(b_star, v_B)``."""
    if m < 1 or p < 0:
        raise ValueError("need m >= 1 and p >= 0")
    log_n = math.log2(params.N)
    if p < params.threshold:
        return m * log_n / params.C, m * (1.0 - p * log_n / params.C)
    return 0.0, 0.0


def alice_payoff_quantum(m: float, p: float, params: QuantumMarketParams) -> float:
    b_star, _ = bob_best_response_quantum(m, p, params)
    return p * b_star


def optimal_price_quantum(params: QuantumMarketParams, gamma: float = 0.01) -> float:
    """The supremum price is not attained; stay a fraction ``gamma`` below it."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return (1.0 - gamma) * params.threshold


def auction_quantum(m: float, p: float, params: QuantumMarketParams) -> AuctionOutcome:
    b_star, v_b = bob_best_response_quantum(m, p, params)
    return AuctionOutcome(p, b_star, p * b_star, v_b)


def bob_best_response_classical(m: float, p: float, params: ClassicalMarketParams) -> tuple[float, float]:
    """Bob buys the whole ``kappa``-bit message iff ``p < rho m / kappa``."""
    if m < 1 or p < 0:
        raise ValueError("need m >= 1 and p >= 0")
    if p < params.rho * m / params.kappa:
        return float(params.kappa), params.rho * m - p * params.kappa
    return 0.0, 0.0


def auction_classical(m: float, p: float, params: ClassicalMarketParams) -> AuctionOutcome:
    b_star, v_b = bob_best_response_classical(m, p, params)
    return AuctionOutcome(p, b_star, p * b_star, v_b)


def alice_guaranteed_price_classical(params: ClassicalMarketParams) -> tuple[float, Callable[[float], float]]:
    """Price ``rho / kappa`` and Alice's payoff as a function of ``m``.

    At ``m = 1`` this price leaves Bob indifferent (``v_B = 0`` either way);
    the payoff assumes he then buys, which is what makes it a guarantee.
    """
    p = params.rho / params.kappa

    def payoff(m: float) -> float:
        if m < 1:
            raise ValueError("m must be >= 1")
        return p * params.kappa if p <= params.rho * m / params.kappa else 0.0

    return p, payoff


def empirical_best_response(cost_curve: Mapping[int, float], m: float, p: float) -> tuple[int, float]:
    """Scan ``b`` for the best ``min(samples(b), m) - p b``; ties go to the lowest ``b``."""
    if not cost_curve:
        raise ValueError("empty cost curve")
    bs = sorted(cost_curve)
    values = [cost_curve[b] for b in bs]
    if any(v2 < v1 for v1, v2 in zip(values, values[1:])):
        raise ValueError("samples(b) must be nondecreasing in b")
    best_b, best_v = bs[0], -math.inf
    for b, s in zip(bs, values):
        v = min(s, m) - p * b
        if v > best_v + 1e-12:
            best_b, best_v = b, v
    return best_b, best_v


def linear_cost_curve(qubits_per_sample: float, b_max: int) -> dict[int, int]:
    """Samples obtainable from ``b`` qubits when each sample costs ``qubits_per_sample``."""
    return {b: math.floor(b / qubits_per_sample + 1e-9) for b in range(b_max + 1)}


# -- production theory ---------------------------------------------------------

def _gradient(F: Callable, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        step = h * x[i]
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        fu, fd = F(up), F(down)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise ValueError("F returned a non-finite value")
        grad[i] = (fu - fd) / (2 * step)
    return grad


def euler_residual(F: Callable[[np.ndarray], float], x, h: float = 1e-5) -> float:
    """``|F(x) - x . grad F(x)| / |F(x)|`` with central differences of step ``h x_i``.

    Zero for degree-1 homogeneous ``F`` (up to truncation error).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    fx = F(x)
    if not np.isfinite(fx):
        raise ValueError("F returned a non-finite value")
    if fx == 0:
        raise ValueError("F(x) must be nonzero")
    return abs(fx - float(x @ _gradient(F, x, h))) / abs(fx)


def nonrival_gap(F: Callable[[np.ndarray, np.ndarray], float], x, y, h: float = 1e-5) -> float:
    """``x . dF/dx + y . dF/dy - F(x, y)``.

    When ``F`` is degree-1 homogeneous in the rival inputs ``x`` alone, this is
    ``y . dF/dy`` and is positive whenever data helps: paying every input its
    marginal product would exceed the output.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = x.shape[0]
    z = np.concatenate([x, y])

    def joint(v: np.ndarray) -> float:
        return F(v[:k], v[k:])

    fz = joint(z)
    if not np.isfinite(fz):
        raise ValueError("F returned a non-finite value")
    return float(z @ _gradient(joint, z, h)) - fz


# -- consumability --------------------------------------------------------------

def consumability_bounds(model: str, K: int, m: int) -> float:
    """Unit-constant upper bounds on ``c(P^m) / c(P)`` (polylog factors suppressed)."""
    if K < 2 or m < 2:
        raise ValueError("need K >= 2 and m >= 2")
    if model == "deterministic":
        return 1.0
    if model == "randomized":
        return K * math.log2(m)
    if model == "quantum":
        return K * math.log2(m) ** 2
    raise ValueError(f"unknown model {model!r}")


def measure_consumability_rate(costs: Mapping[float, float]) -> float:
    """Least-squares slope of ``log cost`` against ``log m``."""
    ms = sorted(costs)
    if len(ms) < 3:
        raise ValueError("need at least three points")
    c = np.array([costs[m] for m in ms], dtype=float)
    if ms[0] <= 0 or np.any(c <= 0):
        raise ValueError("m values and costs must be positive")
    slope, _ = np.polyfit(np.log(ms), np.log(c), 1)
    return float(slope)


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Log-log least-squares slope; repeated ``xs`` are allowed."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or np.unique(x).size < 2:
        raise ValueError("need matching xs, ys with at least two distinct xs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("xs and ys must be positive")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)
