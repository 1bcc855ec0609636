"""Command line entry point.

Subcommands::

    run         Monte Carlo sweep over schemes and surface sizes
    oracle      compare the solvers with exhaustive search on tiny instances
    dump-alloc  write the RB grids of one realization

Exit status is 0 on success, 1 for invalid configuration or arguments and
2 when the computation itself fails.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import channel_model
from .alternating_optimizer import SCHEMES, random_schedule, run_scheme, solve_p1
from .experiment import dump_allocation, emit_summary, ordered_schemes, run_monte_carlo
from .oracle import brute_force_oracle
from .resource_allocation import DualSettings, solve_p11
from .scenario import STREAM_SOLVER, ScenarioConfig, generate_realization, substream

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# tiny setting used by ``oracle`` when no config file is given
ORACLE_DEFAULTS = dict(K=2, N=2, Q=1, M=1, I=20, L0=2, L1=1, L2=2,
                       num_realizations=20)
ORACLE_STREAM = 99


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario file")
    common.add_argument("--out", type=Path, default=Path("results"),
                        help="output directory (default: results)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--schemes", type=_csv_list,
                        help=f"comma separated subset of {','.join(SCHEMES)}")
    common.add_argument("--m-values", type=_csv_list,
                        help="comma separated IRS sizes, e.g. 20,40,80")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes (default: 1)")

    parser = _Parser(prog="irs-ofdma",
                     description="IRS-aided OFDMA max-min rate simulator")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="Monte Carlo sweep")
    p = sub.add_parser("oracle", parents=[common],
                       help="solver vs exhaustive search on tiny instances")
    p.add_argument("--mode", choices=("allocation", "joint"), default="joint",
                   help="fixed-reflection allocation or joint problem")
    p.add_argument("--grid-points", type=int, default=None,
                   help="phase grid size of the exhaustive search")
    p = sub.add_parser("dump-alloc", parents=[common],
                       help="write RB allocation grids of one realization")
    p.add_argument("--realization", type=int, default=0)
    return parser


def load_config(args, defaults: dict | None = None) -> ScenarioConfig:
    try:
        if args.config is not None:
            cfg = ScenarioConfig.from_json(args.config)
        else:
            cfg = ScenarioConfig.from_dict(defaults or {})
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _schemes(args, default) -> list:
    schemes = args.schemes or list(default)
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
    return schemes


def _m_values(args, cfg) -> list:
    if not args.m_values:
        return [cfg.M]
    try:
        values = [int(m) for m in args.m_values]
    except ValueError as exc:
        raise ConfigError(f"invalid --m-values: {exc}") from exc
    if any(m < 1 for m in values):
        raise ConfigError("--m-values must be positive")
    return values


def cmd_run(args) -> int:
    cfg = load_config(args)
    schemes = _schemes(args, SCHEMES)
    M_values = _m_values(args, cfg)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    t0 = time.perf_counter()

    def progress(done, total):
        print(f"\r{done}/{total} work items, {time.perf_counter() - t0:.0f} s",
              end="", file=sys.stderr, flush=True)

    summary = run_monte_carlo(cfg, schemes, M_values, workers=args.threads,
                              progress=progress)
    print(file=sys.stderr)
    paths = emit_summary(summary, args.out)
    print(f"{'scheme':16s}{'M':>5s}{'mean R':>12s}{'stderr':>11s}{'n':>6s}")
    for s in summary.stats():
        print(f"{s.scheme:16s}{s.M:5d}{s.mean:12.5f}{s.stderr:11.5f}{s.n:6d}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = load_config(args, ORACLE_DEFAULTS)
    gs2 = cfg.gamma * cfg.sigma2
    rows = []
    for i in range(cfg.num_realizations):
        real = generate_realization(cfg, i)
        try:
            if args.mode == "allocation":
                rng = substream(cfg.seed, i, STREAM_SOLVER, ORACLE_STREAM)
                schedule = random_schedule(rng, cfg.M, cfg.Q)
                g = channel_model.cnr_grid(real.h_d, real.V, schedule, 1.0, gs2)
                rate = solve_p11(g, cfg.P, DualSettings.from_config(cfg)).rate
                ref = brute_force_oracle(g, cfg.P)
            else:
                rate = solve_p1(real, cfg).common_rate
                ref = brute_force_oracle(real, cfg.P, gs2, args.grid_points, cfg.Q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append((i, rate, ref, rate / ref if ref > 0 else float("nan")))
        print(f"instance {i:3d}: solver {rate:.6f}  oracle {ref:.6f}  "
              f"ratio {rows[-1][3]:.4f}")
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"oracle_{args.mode}.csv"
    with open(path, "w") as fh:
        fh.write("instance,solver_rate,oracle_rate,ratio\n")
        for i, rate, ref, ratio in rows:
            fh.write(f"{i},{rate:.9g},{ref:.9g},{ratio:.9g}\n")
    ratios = np.array([r[3] for r in rows])
    print(f"min ratio {np.nanmin(ratios):.4f} over {len(rows)} instances; "
          f"wrote {path}")
    return EXIT_OK


def cmd_dump_alloc(args) -> int:
    cfg = load_config(args)
    schemes = _schemes(args, ("dynamic", "fixed"))
    M = _m_values(args, cfg)[0]
    if args.realization < 0:
        raise ConfigError("--realization must be non-negative")
    cfg = cfg.replace(M=M)
    real = generate_realization(cfg, args.realization)
    args.out.mkdir(parents=True, exist_ok=True)
    done = {}
    for scheme in ordered_schemes(schemes):
        res = run_scheme(scheme, real, cfg, warm_start=done.get("fixed"))
        done[scheme] = res
        path = dump_allocation(res, args.out / f"alloc_{scheme}_{args.realization}.csv")
        print(f"{scheme:16s} R={res.common_rate:.5f}  distinct users/slot="
              f"{res.distinct_users_per_slot:.3f}  -> {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "oracle": cmd_oracle, "dump-alloc": cmd_dump_alloc}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
