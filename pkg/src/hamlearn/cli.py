"""Command-line entry point: ``hamlearn <subcommand> <config.json>``.

Exit codes: 0 success, 2 configuration error, 3 singular TQCM.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import analysis
from .experiments import (
    ConfigError,
    ExperimentConfig,
    load_config,
    run_learn,
    scan_shots,
    scan_states,
    simulate,
)
from .tomography import shot_budget

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR = 0, 2, 3


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.outputs.get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {"seed": args.seed}
    if args.no_noise:
        overrides["noise"] = False
    if args.exact_tqcm:
        overrides["exact_tqcm"] = True
    return cfg.with_overrides(**overrides)


def cmd_learn(args) -> int:
    cfg = _load(args)
    report = run_learn(cfg)
    path = _out_dir(args, cfg) / "report.json"
    path.write_text(report.to_json() + "\n")
    print(f"wrote {path}")
    if report.singular:
        print(f"TQCM is singular (rank {report.rank}/{len(cfg.ansatz)}); couplings are unreliable", file=sys.stderr)
        return EXIT_SINGULAR
    return EXIT_OK


def cmd_scan_shots(args) -> int:
    cfg = _load(args)
    result = scan_shots(cfg)
    path = _out_dir(args, cfg) / "scan.csv"
    result.to_csv(path)
    print(f"wrote {path} ({len(result.rows)} rows)")
    return EXIT_OK


def cmd_scan_states(args) -> int:
    cfg = _load(args)
    result = scan_states(cfg, args.count, include_optimal=args.include_optimal)
    path = _out_dir(args, cfg) / "scan.csv"
    result.to_csv(path)
    print(f"wrote {path} ({len(result.rows)} rows)")
    return EXIT_OK


def cmd_ipr(args) -> int:
    cfg = _load(args)
    if cfg.unitary_mode:
        raise ConfigError(["ipr needs a Hamiltonian, not a unitary schedule"])
    sim = simulate(cfg, n_steps=2)
    out = {
        "ipr": analysis.ipr(sim.rho0, sim.hamiltonian),
        "ipr_min": 2.0 ** -cfg.n_qubits,
        "degenerate": sim.hamiltonian.is_degenerate(),
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = _load(args)
    if cfg.unitary_mode:
        raise ConfigError(["bound needs a known Hamiltonian"])
    report = run_learn(cfg)
    sim = simulate(cfg, n_steps=2)
    out = {
        "epsilon": report.epsilon,
        "bound": report.bound,
        "delta_b_bound": analysis.delta_b_bound(
            cfg.n_qubits, cfg.n_measurements, cfg.n_steps, cfg.dt, sim.hamiltonian.norm
        ),
        "n_shots": shot_budget(cfg.n_qubits, cfg.n_steps, cfg.n_measurements),
        "inv_frobenius_scaled": report.inv_frobenius_scaled,
        "singular": report.singular,
    }
    print(json.dumps(_finite(out)))
    return EXIT_SINGULAR if report.singular else EXIT_OK


def _finite(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamlearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--no-noise", action="store_true", help="disable simulated shot noise")
        p.add_argument("--exact-tqcm", action="store_true", help="compute the TQCM from noiseless states")
        p.set_defaults(func=func)
        return p

    add("learn", cmd_learn, "learn couplings and write report.json")
    add("scan-shots", cmd_scan_shots, "error vs shot budget over n_steps_schedule; writes scan.csv")
    p = add("scan-states", cmd_scan_states, "IPR vs TQCM information for random states; writes scan.csv")
    p.add_argument("--count", type=int, default=200, help="number of random states")
    p.add_argument("--include-optimal", action="store_true", help="add the minimal-IPR state as seed -1")
    add("ipr", cmd_ipr, "print the IPR of the configured initial state")
    add("bound", cmd_bound, "run once and print the error bound next to the measured error")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
