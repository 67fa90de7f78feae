"""Seeded parameter sweeps with flat CSV output.

A config names a scenario, a parameter grid, a trial count and a base seed.
Cells are the cartesian product of the grid (keys in sorted order); trial
``t`` of cell ``c`` runs with seed ``base_seed + c * trials + t``, so any cell
can be re-run on its own and reproduce its rows.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import economics, matching, mlrs, observables
from .quantum import make_rng, normalize
from .runtime import run_protocol

SCHEMA_VERSION = 1

COMMON_COLUMNS = ["schema", "scenario", "cell", "trial", "seed"]


@dataclass
class ExperimentConfig:
    scenario: str
    grid: dict[str, list]
    trials: int = 1
    base_seed: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; known: {sorted(SCENARIOS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.grid or any(not isinstance(v, list) or not v for v in self.grid.values()):
            raise ValueError("grid must map parameter names to nonempty lists")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"scenario", "grid", "trials", "base_seed", "out"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def cells(self) -> list[dict]:
        keys = sorted(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def seed(self, cell: int, trial: int) -> int:
        return self.base_seed + cell * self.trials + trial


# -- scenarios -------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    columns: list[str]
    run: Callable[[dict, int], dict]


def _hm(protocol: str) -> Callable[[dict, int], dict]:
    def run(params: dict, seed: int) -> dict:
        rng = make_rng(seed)
        n, m = int(params["N"]), int(params["m"])
        inst = matching.random_instance(n, m, rng)
        extra = {"c": float(params.get("c", matching.DEFAULT_C))} if protocol == "mhm-rand" else {}
        res = run_protocol(inst, protocol, rng, **extra)
        ok = all(matching.verify_output(inst.x, mt, a) for mt, a in zip(inst.matchings, res.outputs))
        failures = sum(a is None for a in res.outputs)
        return {
            "N": n, "m": m, "c": extra.get("c", ""),
            "classical_bits": res.ledger.classical_bits, "qubits": res.ledger.qubits,
            "success": int(ok), "failures": failures,
        }
    return run


def _mlrs(params: dict, seed: int) -> dict:
    rng = make_rng(seed)
    n, m = int(params["N"]), int(params["m"])
    protocol = params.get("protocol", "quantum")
    kind = params.get("instance", "unary")
    samples = int(params.get("samples", 1))
    meta = None
    if kind == "unary":
        inst, meta = mlrs.unary_block_instance(n, m, rng=rng)
    elif kind == "identity":
        inst = mlrs.identity_instance(n, m, rng)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    res = run_protocol(inst, f"mlrs-{protocol}", rng, samples_per_matrix=samples)
    tvs = [
        mlrs.tv_distance(mlrs.empirical_distribution(s, n), mlrs.target_distribution(inst.x, B))
        for s, B in zip(res.outputs.samples, inst.matrices)
    ]
    row = {
        "N": n, "m": m, "protocol": protocol, "instance": kind, "samples": samples,
        "classical_bits": res.ledger.classical_bits, "qubits": res.ledger.qubits,
        "tv": float(np.mean(tvs)), "attempts": res.outputs.total_attempts(), "recovery_rate": "",
    }
    if meta is not None:
        _, rate = mlrs.recover_bits([s[0] for s in res.outputs.samples], meta)
        row["recovery_rate"] = rate
    return row


def _observables(params: dict, seed: int) -> dict:
    rng = make_rng(seed)
    nq, m, eps = int(params["n_qubits"]), int(params["m"]), float(params["epsilon"])
    obs = observables.sample_observable_ensemble(nq, m, rng)
    dim = 1 << nq
    state = normalize(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
    run = observables.estimate_all(state, obs, observables.copies_for_epsilon(eps), rng)
    return {
        "n_qubits": nq, "m": m, "epsilon": eps,
        "copies_total": run.copies_total, "qubits": run.qubits_total, "max_error": run.max_abs_error,
    }


def _auction(params: dict, seed: int) -> dict:
    market = params.get("market", "quantum")
    m = float(params["m"])
    if market == "quantum":
        qp = economics.QuantumMarketParams(int(params["N"]), float(params.get("C", 1.0)))
        price = float(params["price"]) if "price" in params else economics.optimal_price_quantum(
            qp, float(params.get("gamma", 0.01)))
        out = economics.auction_quantum(m, price, qp)
    elif market == "classical":
        cp = economics.ClassicalMarketParams(int(params["kappa"]), float(params.get("rho", 1.0)))
        price = float(params["price"]) if "price" in params else economics.alice_guaranteed_price_classical(cp)[0]
        out = economics.auction_classical(m, price, cp)
    else:
        raise ValueError(f"unknown market {market!r}")
    return {"market": market, "m": params["m"], **asdict(out)}


SCENARIOS: dict[str, Scenario] = {
    "hm-quantum": Scenario(["N", "m", "c", "classical_bits", "qubits", "success", "failures"], _hm("mhm-quantum")),
    "hm-det": Scenario(["N", "m", "c", "classical_bits", "qubits", "success", "failures"], _hm("mhm-det")),
    "hm-rand": Scenario(["N", "m", "c", "classical_bits", "qubits", "success", "failures"], _hm("mhm-rand")),
    "mlrs": Scenario(
        ["N", "m", "protocol", "instance", "samples", "classical_bits", "qubits", "tv", "attempts", "recovery_rate"],
        _mlrs,
    ),
    "observables": Scenario(["n_qubits", "m", "epsilon", "copies_total", "qubits", "max_error"], _observables),
    "auction": Scenario(["market", "m", "price", "b_star", "v_A", "v_B"], _auction),
}


def _run_task(task: tuple[str, int, int, int, dict]) -> dict:
    scenario, cell, trial, seed, params = task
    row = SCENARIOS[scenario].run(params, seed)
    return {"schema": SCHEMA_VERSION, "scenario": scenario, "cell": cell, "trial": trial, "seed": seed, **row}


def sweep_rows(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    tasks = [
        (config.scenario, c, t, config.seed(c, t), params)
        for c, params in enumerate(config.cells())
        for t in range(config.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_run_task(t) for t in tasks]


def rows_to_csv(rows: list[dict], scenario: str) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, COMMON_COLUMNS + SCENARIOS[scenario].columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_sweep(config: ExperimentConfig, out: str | Path | None = None, workers: int = 1) -> Path:
    """Run every (cell, trial) and write the CSV plus a ``.meta.json`` sidecar."""
    path = Path(out or config.out or f"{config.scenario}.csv")
    started = time.time()
    rows = sweep_rows(config, workers)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows, config.scenario), encoding="utf-8", newline="")
    sidecar = {
        "schema": SCHEMA_VERSION,
        "config": asdict(config),
        "started": started,
        "finished": time.time(),
        "rows": len(rows),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return path


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass
class PlotPoint:
    x: float
    y: float
    stderr: float
    n: int
    series: Any = None


def aggregate(rows: list[dict], x: str, y: str, series: str | None = None) -> list[PlotPoint]:
    """Mean and standard error of ``y`` for each ``(series, x)`` cell."""
    if rows:
        for col in [x, y] + ([series] if series else []):
            if col not in rows[0]:
                raise KeyError(f"unknown column {col!r}")
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        key = (r[series] if series else None, float(r[x]))
        groups.setdefault(key, []).append(float(r[y]))
    points = []
    for (s, xv), ys in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        arr = np.asarray(ys)
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        points.append(PlotPoint(xv, float(arr.mean()), se, int(arr.size), s))
    return points


def emit_plot_data(
    result: str | Path, x: str, y: str, series: str | None = None, out: str | Path | None = None
) -> list[PlotPoint]:
    """Tidy ``x, y, stderr, n, series`` table from a results CSV."""
    points = aggregate(read_rows(result), x, y, series)
    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "stderr", "n", "series"])
            for p in points:
                w.writerow([p.x, p.y, p.stderr, p.n, "" if p.series is None else p.series])
    return points


def fit_exponent(rows: list[dict], x: str = "m", y: str = "qubits") -> float:
    """Log-log slope of the per-cell means of ``y`` against ``x``."""
    pts = aggregate(rows, x, y)
    return economics.measure_consumability_rate({p.x: p.y for p in pts})
