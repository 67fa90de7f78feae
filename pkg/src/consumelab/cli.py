"""Command-line entry point: ``consumelab <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import economics, harness, lowerbound, mlrs
from .harness import ExperimentConfig
from .quantum import make_rng

DEFAULT_SEED = 0


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config (sweep schema)")
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p.add_argument("--out", type=Path, help="write CSV results here")
    p.add_argument("--workers", type=int, default=1)
    return p


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _sweep_from_flags(args, scenario: str, grid: dict) -> int:
    if args.config:
        config = ExperimentConfig.load(args.config)
        if config.scenario != scenario and args.command != "sweep":
            raise SystemExit(f"config scenario {config.scenario!r} does not match {scenario!r}")
        if args.seed is not None:
            config.base_seed = args.seed
    else:
        config = ExperimentConfig(scenario, grid, trials=args.trials,
                                  base_seed=args.seed if args.seed is not None else DEFAULT_SEED)
    if args.out or config.out:
        path = harness.run_sweep(config, args.out, workers=args.workers)
        rows = harness.read_rows(path)
    else:
        path = None
        rows = harness.sweep_rows(config, workers=args.workers)
    _emit(_summarize(scenario, rows, path))
    return 0


def _summarize(scenario: str, rows: list[dict], path) -> dict:
    summary: dict = {"scenario": scenario, "rows": len(rows)}
    if path is not None:
        summary["out"] = str(path)
    for col in ("classical_bits", "qubits", "success", "tv", "attempts", "max_error", "copies_total"):
        vals = [float(r[col]) for r in rows if r.get(col, "") != ""]
        if vals:
            summary[f"mean_{col}"] = float(np.mean(vals))
    if len(rows) == 1:
        summary["row"] = {k: v for k, v in rows[0].items()}
    return summary


def cmd_hm(args) -> int:
    grid = {"N": [args.n], "m": [args.m]}
    if args.command == "hm-rand":
        grid["c"] = [args.c]
    return _sweep_from_flags(args, args.command, grid)


def cmd_lb_verify(args) -> int:
    cert = lowerbound.verify_det_lower_bound(args.n, workers=args.workers)
    out = cert.to_dict()
    if args.out:
        args.out.write_text(json.dumps(out) + "\n")
    _emit(out)
    return 0


def cmd_mlrs(args) -> int:
    grid = {"N": [args.n], "m": [args.m], "protocol": [args.protocol],
            "instance": [args.instance], "samples": [args.samples]}
    return _sweep_from_flags(args, "mlrs", grid)


def cmd_mlrs_lb(args) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    rng = make_rng(seed)
    exact_rates, noisy_rates = [], []
    for _ in range(args.trials):
        inst, meta = mlrs.unary_block_instance(args.n, args.m, rng=rng)
        out, _ = mlrs.run_mlrs_quantum(inst, rng)
        exact_rates.append(mlrs.recover_bits([s[0] for s in out.samples], meta)[1])
        noisy = [
            mlrs.draw(mlrs.corrupt_distribution(mlrs.target_distribution(inst.x, B), args.eta), rng)
            for B in inst.matrices
        ]
        noisy_rates.append(mlrs.recover_bits(noisy, meta)[1])
    _emit({
        "N": args.n, "m": args.m, "eta": args.eta, "trials": args.trials, "seed": seed,
        "bits_encoded": args.m * int(np.log2(args.n // args.m)),
        "exact_recovery": float(np.mean(exact_rates)),
        "corrupted_recovery": float(np.mean(noisy_rates)),
        "bound": 1 - 2 * args.eta,
    })
    return 0


def cmd_observables(args) -> int:
    grid = {"n_qubits": [args.n_qubits], "m": [args.m], "epsilon": [args.epsilon]}
    return _sweep_from_flags(args, "observables", grid)


def cmd_auction(args) -> int:
    if args.config:
        data = json.loads(args.config.read_text())
        config = ExperimentConfig.from_dict(data) if "grid" in data else ExperimentConfig("auction", {
            k: v if isinstance(v, list) else [v] for k, v in data.items()
        })
    else:
        grid = {"market": [args.market], "m": list(range(1, args.m_max + 1))}
        if args.market == "quantum":
            grid |= {"N": [args.N], "C": [args.C], "gamma": [args.gamma]}
        else:
            grid |= {"kappa": [args.kappa], "rho": [args.rho]}
        if args.price is not None:
            grid["price"] = [args.price]
        config = ExperimentConfig("auction", grid)
    text = harness.rows_to_csv(harness.sweep_rows(config), "auction")
    if args.out:
        args.out.write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return 0


EULER_SUITE = {
    "linear": (lambda x: 2.0 * x[0] + 3.0 * x[1], [1.5, 2.5]),
    "cobb-douglas": (lambda x: x[0] ** 0.5 * x[1] ** 0.5, [4.0, 9.0]),
    "ces": (lambda x: (0.3 * x[0] ** 0.5 + 0.7 * x[1] ** 0.5) ** 2, [2.0, 5.0]),
    "geometric-mean-3": (lambda x: (x[0] * x[1] * x[2]) ** (1 / 3), [1.0, 2.0, 3.0]),
    "euclidean-norm": (lambda x: float(np.sqrt(x @ x)), [3.0, 4.0]),
    "quadratic (degree 2)": (lambda x: x[0] ** 2, [3.0]),
}


def cmd_euler(args) -> int:
    results = {name: economics.euler_residual(f, x) for name, (f, x) in EULER_SUITE.items()}
    gap = economics.nonrival_gap(lambda x, y: x[0] * (1 + np.log1p(y[0])), [2.0], [3.0])
    _emit({"euler_residuals": results, "nonrival_gap_x(1+ln(1+y))_at_(2,3)": gap})
    return 0


def cmd_sweep(args) -> int:
    if not args.config:
        raise SystemExit("sweep requires --config")
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.base_seed = args.seed
    path = harness.run_sweep(config, args.out, workers=args.workers)
    _emit(_summarize(config.scenario, harness.read_rows(path), path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consumelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    common = _common()

    for name, help_text in [("hm-quantum", "quantum Multiple Hidden Matchings"),
                            ("hm-det", "deterministic N/2+1-bit protocol"),
                            ("hm-rand", "randomized subset protocol")]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--n", type=int, default=16)
        p.add_argument("--m", type=int, default=4)
        p.add_argument("--trials", type=int, default=1)
        if name == "hm-rand":
            p.add_argument("--c", type=float, default=3.0)
        p.set_defaults(func=cmd_hm)

    p = sub.add_parser("lb-verify", parents=[common], help="exhaustive deterministic lower-bound check")
    p.add_argument("--n", type=int, choices=lowerbound.SUPPORTED_VERIFY_N, required=True)
    p.set_defaults(func=cmd_lb_verify)

    p = sub.add_parser("mlrs", parents=[common], help="linear regression sampling")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--protocol", choices=["quantum", "classical"], default="quantum")
    p.add_argument("--instance", choices=["unary", "identity"], default="unary")
    p.add_argument("--samples", type=int, default=1, help="samples per matrix")
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_mlrs)

    p = sub.add_parser("mlrs-lb", parents=[common], help="random-access recovery on unary instances")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_mlrs_lb)

    p = sub.add_parser("observables", parents=[common], help="single-copy observable estimation")
    p.add_argument("--n-qubits", type=int, default=6)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_observables)

    p = sub.add_parser("auction", parents=[common], help="posted-price auction outcomes as CSV")
    p.add_argument("--market", choices=["quantum", "classical"], default="quantum")
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--kappa", type=int, default=10)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--price", type=float, default=None)
    p.add_argument("--m-max", type=int, default=10)
    p.set_defaults(func=cmd_auction)

    p = sub.add_parser("euler", parents=[common], help="production-function homogeneity checks")
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("sweep", parents=[common], help="run a JSON-configured sweep")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"consumelab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
