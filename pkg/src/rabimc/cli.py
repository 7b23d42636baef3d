"""Command-line entry points.

Subcommands: kernel-table, sweep, bkt-fit, ed-check, relax, resistance.
The RABIMC_THREADS environment variable overrides --threads; every override
is echoed into the output metadata.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError
from .harness import (THREADS_ENV_VAR, RunConfig, cmd_bkt_fit, cmd_ed_check,
                      cmd_kernel_table, cmd_relax, cmd_sweep, resistance_estimate)


def _add_common(p: argparse.ArgumentParser, config_required: bool = True):
    p.add_argument("--config", required=config_required, help="path to a key=value run configuration")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--resume", action="store_true", help="resume from checkpoints in --out")
    p.add_argument("--threads", type=int, default=1, help="worker processes for chains")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rabimc",
                                     description="dissipative qubit-resonator simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (("kernel-table", "build and export certified kernel tables"),
                       ("sweep", "run the (coupling, beta) Monte Carlo grid"),
                       ("ed-check", "exact-diagonalization identity suite"),
                       ("relax", "relaxation traces at exact-diagonalization scale")):
        p = sub.add_parser(name, help=desc)
        _add_common(p)

    p = sub.add_parser("bkt-fit", help="crossing analysis over sweep result tables")
    p.add_argument("results", nargs="+", help="results.csv files from sweep runs")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("resistance", help="shunt resistance realizing a damping strength")
    p.add_argument("--alpha-cav", type=float, default=None)
    p.add_argument("--config", default=None)
    return parser


def _load_config(args) -> tuple[RunConfig, dict, int]:
    cfg = RunConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed_cli"] = args.seed
        cfg.values["seed"] = args.seed
    threads = args.threads
    env = os.environ.get(THREADS_ENV_VAR)
    if env is not None:
        overrides["threads_env"] = env
        threads = int(env)
    overrides["threads_used"] = threads
    return cfg, overrides, threads


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "resistance":
            alpha = args.alpha_cav
            if alpha is None:
                if args.config is None:
                    raise ConfigError("resistance needs --alpha-cav or --config")
                alpha = RunConfig.from_file(args.config).alpha_cav
            print(f"R = {resistance_estimate(alpha):.6g} kOhm (alpha_cav = {alpha:g})")
            return 0
        if args.command == "bkt-fit":
            report = cmd_bkt_fit(args.results, args.out, seed=args.seed)
            gc = "n/a" if report["g_c"] is None else f"{report['g_c']:.6g} +/- {report['g_c_err']:.2g}"
            print(f"alpha_c = {report['alpha_c']:.6g} +/- {report['alpha_c_err']:.2g}")
            print(f"g_c     = {gc}")
            print(f"beta0   = {report['beta0']:.6g} +/- {report['beta0_err']:.2g}")
            return 0

        cfg, overrides, threads = _load_config(args)
        if args.command == "kernel-table":
            files = cmd_kernel_table(cfg, args.out)
            print(f"wrote {len(files)} kernel tables to {args.out}")
        elif args.command == "sweep":
            rows = cmd_sweep(cfg, args.out, resume=args.resume, threads=threads, overrides=overrides)
            print(f"wrote {len(rows)} rows to {os.path.join(args.out, 'results.csv')}")
        elif args.command == "ed-check":
            report = cmd_ed_check(cfg, args.out)
            ok = True
            for name, passed in sorted(report["checks"].items()):
                print(f"[{'PASS' if passed else 'FAIL'}] {name}")
                ok = ok and passed
            return 0 if ok else 1
        elif args.command == "relax":
            files = cmd_relax(cfg, args.out)
            print(f"wrote {len(files)} relaxation traces to {args.out}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
