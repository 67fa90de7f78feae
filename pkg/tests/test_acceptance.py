"""Exit criteria, each run at its stated tolerance and runtime budget.

One PASS/FAIL line per criterion is printed in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import chisquare

from consumelab import economics, lowerbound, matching, mlrs, observables
from consumelab.quantum import make_rng, normalize, qubits_for_dim
from consumelab.runtime import run_protocol

pytestmark = pytest.mark.acceptance


class Budget:
    def __init__(self, seconds: float) -> None:
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False

    def check(self) -> None:
        assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


# -- 1 ---------------------------------------------------------------------------

@pytest.mark.criterion(1, "quantum Hidden Matching: zero error, exact qubit ledger, uniform edges")
def test_quantum_hidden_matching():
    trials = 10_000
    rng = make_rng(101)
    with Budget(60) as budget:
        for n in (4, 16, 64):
            for m in sorted({1, 4, n // 2}):
                counts = np.zeros(n // 2, dtype=np.int64)
                for _ in range(trials):
                    inst = matching.random_instance(n, m, rng)
                    run = run_protocol(inst, "mhm-quantum", rng)
                    assert run.ledger.qubits == m * qubits_for_dim(n)
                    assert run.ledger.classical_bits == 0
                    for mt, ans in zip(inst.matchings, run.outputs):
                        assert ans.b == inst.x[ans.i - 1] ^ inst.x[ans.j - 1]
                        counts[mt.pairs.index((ans.i, ans.j))] += 1
                p = chisquare(counts).pvalue
                assert p > 0.01, f"N={n} m={m}: edge-index chi-square p={p:.4f}"
    budget.check()


# -- 2 ---------------------------------------------------------------------------

@pytest.mark.criterion(2, "deterministic Hidden Matching: N/2+1 bits, exhaustive correctness at N=6")
def test_deterministic_hidden_matching():
    n = 6
    with Budget(60) as budget:
        everything = list(matching.all_matchings(n))
        assert len(everything) == 15
        for bits in itertools.product((0, 1), repeat=n):
            run = run_protocol(matching.MhmInstance(bits, everything), "mhm-det")
            assert run.ledger.classical_bits == n // 2 + 1
            assert all(matching.verify_output(bits, mt, a) for mt, a in zip(everything, run.outputs))
        rng = make_rng(2)
        for m in range(1, 16):
            inst = matching.MhmInstance(tuple(rng.integers(0, 2, n).tolist()), everything[:m])
            assert run_protocol(inst, "mhm-det").ledger.classical_bits == n // 2 + 1
    budget.check()


# -- 3 ---------------------------------------------------------------------------

@pytest.mark.criterion(3, "deterministic lower-bound oracle returns 2 at N=4 and 4 at N=6")
def test_deterministic_lower_bound_oracle():
    with Budget(600) as budget:
        got = {n: lowerbound.verify_det_lower_bound(n).max_class for n in (4, 6)}
    budget.check()
    assert got == {4: 2, 6: 4}


# -- 4 ---------------------------------------------------------------------------

@pytest.mark.criterion(4, "randomized Hidden Matching: success >= 2/3 and sqrt(N)(1+ln m) bit scaling")
def test_randomized_hidden_matching():
    trials = 1000
    rng = make_rng(404)
    ratios = {}
    with Budget(120) as budget:
        for n in (64, 256):
            for m in (1, 4, 16):
                ok = 0
                bits = set()
                for _ in range(trials):
                    inst = matching.random_instance(n, m, rng)
                    run = run_protocol(inst, "mhm-rand", rng, c=3.0)
                    bits.add(run.ledger.classical_bits)
                    ok += all(matching.verify_output(inst.x, mt, a) for mt, a in zip(inst.matchings, run.outputs))
                assert ok / trials >= 2 / 3, f"N={n} m={m}: success {ok / trials:.3f}"
                assert len(bits) == 1
                ratios[(n, m)] = bits.pop() / (math.sqrt(n) * (1 + math.log(m)))
    budget.check()
    # best constant for a multiplicative band: geometric midpoint of the extremes
    a = math.sqrt(max(ratios.values()) * min(ratios.values()))
    for cell, r in ratios.items():
        assert 1 / 1.5 <= r / a <= 1.5, f"{cell}: ratio {r:.2f} vs fitted a={a:.2f}"


# -- 5 ---------------------------------------------------------------------------

@pytest.mark.criterion(5, "MLRS sampling: TV <= 0.05 at 1e4 samples for identity and unary instances")
@pytest.mark.parametrize("kind", ["identity", "unary"])
@pytest.mark.parametrize("n", [16, 64])
def test_mlrs_sampling_fidelity(kind, n):
    rng = make_rng(500 + n)
    samples = 10_000
    with Budget(60) as budget:
        if kind == "identity":
            inst = mlrs.identity_instance(n, 1, rng)
        else:
            inst, _ = mlrs.unary_block_instance(n, 4, rng=rng)
        run = run_protocol(inst, "mlrs-quantum", rng, samples_per_matrix=samples)
        for got, B in zip(run.outputs.samples, inst.matrices):
            assert len(got) == samples
            tv = mlrs.tv_distance(mlrs.empirical_distribution(got, n), mlrs.target_distribution(inst.x, B))
            assert tv <= 0.05
    budget.check()


# -- 6 and 11 share ledgers ------------------------------------------------------

MLRS_MS = (2, 4, 8, 16, 32)


@pytest.fixture(scope="module")
def mlrs_ledgers():
    n, trials = 64, 100
    rng = make_rng(606)
    quantum, classical, attempts_per_sample = {}, {}, {}
    start = time.perf_counter()
    for m in MLRS_MS:
        q, c, a = [], [], []
        for _ in range(trials):
            inst, _ = mlrs.unary_block_instance(n, m, rng=rng)
            qr = run_protocol(inst, "mlrs-quantum", rng)
            cr = run_protocol(inst, "mlrs-classical", rng)
            q.append(qr.ledger.qubits)
            c.append(cr.ledger.classical_bits)
            a.append(qr.outputs.total_attempts() / m)
        quantum[m], classical[m], attempts_per_sample[m] = np.mean(q), np.mean(c), np.mean(a)
    return {
        "quantum": quantum, "classical": classical, "attempts": attempts_per_sample,
        "elapsed": time.perf_counter() - start,
    }


@pytest.mark.criterion(6, "MLRS separation: quantum exponent in [0.9, 1.1], classical in [-0.05, 0.05]")
class TestMlrsSeparation:
    def test_runtime(self, mlrs_ledgers):
        assert mlrs_ledgers["elapsed"] < 300

    def test_attempts_per_sample_track_m(self, mlrs_ledgers):
        for m, a in mlrs_ledgers["attempts"].items():
            assert m / 2 <= a <= 2 * m, f"m={m}: {a:.2f} attempts per sample"

    def test_classical_ledger_flat(self, mlrs_ledgers):
        assert set(mlrs_ledgers["classical"].values()) == {384.0}
        assert -0.05 <= economics.measure_consumability_rate(mlrs_ledgers["classical"]) <= 0.05

    def test_quantum_exponent(self, mlrs_ledgers):
        slope = economics.measure_consumability_rate(mlrs_ledgers["quantum"])
        assert 0.9 <= slope <= 1.1, f"fitted quantum exponent {slope:.3f}"


# -- 7 ---------------------------------------------------------------------------

@pytest.mark.criterion(7, "bit recovery: exact sampler 100%, >= 1-2*eta under TV-eta corruption")
def test_bit_recovery():
    n, m, eta, trials = 64, 4, 0.1, 1000
    rng = make_rng(707)
    hits_exact = np.zeros(m)
    hits_noisy = np.zeros(m)
    for _ in range(trials):
        inst, meta = mlrs.unary_block_instance(n, m, rng=rng)
        exact = run_protocol(inst, "mlrs-quantum", rng).outputs.samples
        rec, _ = mlrs.recover_bits([s[0] for s in exact], meta)
        hits_exact += np.array(rec) == np.array(meta.r)
        noisy = []
        for B in inst.matrices:
            p = mlrs.target_distribution(inst.x, B)
            q = mlrs.corrupt_distribution(p, eta)
            assert mlrs.tv_distance(p, q) == pytest.approx(eta)
            noisy.append(mlrs.draw(q, rng))
        rec, _ = mlrs.recover_bits(noisy, meta)
        hits_noisy += np.array([v == r for v, r in zip(rec, meta.r)])
    assert np.all(hits_exact == trials)
    assert np.all(hits_noisy / trials >= 1 - 2 * eta)


# -- 8 ---------------------------------------------------------------------------

@pytest.mark.criterion(8, "observable estimation: max error <= eps in >= 2/3 of runs, registers linear in m")
def test_observable_estimation():
    nq, eps, runs = 6, 0.1, 30
    copies = observables.copies_for_epsilon(eps)
    assert copies == 200
    rng = make_rng(808)
    success, registers = {}, {}
    with Budget(300) as budget:
        for m in (4, 8, 16, 32):
            ok, regs = 0, []
            for _ in range(runs):
                obs = observables.sample_observable_ensemble(nq, m, rng)
                dim = 1 << nq
                state = normalize(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
                run = observables.estimate_all(state, obs, copies, rng)
                ok += run.max_abs_error <= eps
                regs.append(run.copies_total)
            success[m], registers[m] = ok / runs, float(np.mean(regs))
    budget.check()
    assert economics.measure_consumability_rate(registers) >= 0.9
    for m, rate in success.items():
        assert rate >= 2 / 3, f"m={m}: max error <= eps in only {rate:.2f} of runs"


# -- 9 ---------------------------------------------------------------------------

@pytest.mark.criterion(9, "auction closed forms and grid-scan best responses")
def test_auction_closed_forms():
    with Budget(1) as budget:
        qp = economics.QuantumMarketParams(N=1024, C=1.0)
        gamma = 0.01
        p = economics.optimal_price_quantum(qp, gamma)
        log_n = math.log2(qp.N)
        for m in range(1, 101):
            assert economics.alice_payoff_quantum(m, p, qp) == pytest.approx((1 - gamma) * m, rel=1e-12)
        cp = economics.ClassicalMarketParams(kappa=10, rho=0.5)
        price, payoff = economics.alice_guaranteed_price_classical(cp)
        assert price == pytest.approx(0.05)
        assert all(payoff(m) == pytest.approx(cp.rho, abs=1e-15) for m in range(1, 1001))

        # grid scans against the closed forms
        curve = economics.linear_cost_curve(log_n / qp.C, 2000)
        for m in (1, 5, 37, 100):
            b, v = economics.empirical_best_response(curve, m, p)
            b_cf, v_cf = economics.bob_best_response_quantum(m, p, qp)
            assert b == pytest.approx(b_cf) and v == pytest.approx(v_cf)
            b, v = economics.empirical_best_response(curve, m, qp.threshold * 1.01)
            assert (b, v) == (0, 0.0)
        kappa = 10
        flat = economics.ClassicalMarketParams(kappa=kappa, rho=1.0)
        for m in (1, 3, 20):
            step = {b: (m if b >= kappa else 0) for b in range(0, 3 * kappa)}
            for p_c in (0.0, 0.5 * m / kappa, 2.0 * m / kappa):
                b, v = economics.empirical_best_response(step, m, p_c)
                b_cf, v_cf = economics.bob_best_response_classical(m, p_c, flat)
                assert b == b_cf and v == pytest.approx(v_cf)
    budget.check()


# -- 10 --------------------------------------------------------------------------

HOMOGENEOUS = [
    (lambda x: 2.0 * x[0] + 3.0 * x[1], [1.5, 2.5]),
    (lambda x: x[0] ** 0.5 * x[1] ** 0.5, [4.0, 9.0]),
    (lambda x: (0.3 * x[0] ** 0.5 + 0.7 * x[1] ** 0.5) ** 2, [2.0, 5.0]),
    (lambda x: (x[0] * x[1] * x[2]) ** (1 / 3), [1.0, 2.0, 3.0]),
    (lambda x: math.sqrt(x[0] ** 2 + x[1] ** 2), [3.0, 4.0]),
]


@pytest.mark.criterion(10, "production theory: Euler residuals, nonrival gap, degree-2 counterexample")
def test_production_theory():
    with Budget(1) as budget:
        for F, x in HOMOGENEOUS:
            assert economics.euler_residual(F, x) <= 1e-6

        def data_augmented(x, y):
            return x[0] * (1 + math.log1p(y[0]))

        for x, y in [(2.0, 3.0), (1.0, 0.5), (10.0, 100.0)]:
            assert economics.nonrival_gap(data_augmented, [x], [y]) > 0
        assert economics.euler_residual(lambda x: x[0] ** 2, [3.0]) >= 0.5
    budget.check()


# -- 11 --------------------------------------------------------------------------

@pytest.mark.criterion(11, "consumability-rate meter: synthetic exponents and measured MLRS ledgers")
class TestConsumabilityMeter:
    @pytest.mark.parametrize("exponent", [0.0, 0.5, 1.0])
    def test_synthetic_curves(self, exponent):
        costs = {m: 7.0 * m**exponent for m in (2, 4, 8, 16, 32, 64)}
        assert economics.measure_consumability_rate(costs) == pytest.approx(exponent, abs=0.02)

    def test_classical_ledgers(self, mlrs_ledgers):
        assert economics.measure_consumability_rate(mlrs_ledgers["classical"]) == pytest.approx(0.0, abs=0.05)

    def test_quantum_ledgers(self, mlrs_ledgers):
        assert economics.measure_consumability_rate(mlrs_ledgers["quantum"]) == pytest.approx(1.0, abs=0.1)
