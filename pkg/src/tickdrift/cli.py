"""``tickdrift`` command line.

Exit codes: 0 success, 2 configuration error, 3 oracle mismatch, 4 internal fault
(including a violated run invariant such as compensated drift above one tick).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import OUT_ENV, ConfigError, ScenarioConfig, load_config, parse_config
from .runner import COMMANDS, SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_FAULT = 0, 2, 3, 4

log = logging.getLogger("tickdrift")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario config (JSON)")
    common.add_argument("--mode", choices=["baseline", "uncompensated", "compensated", "all"])
    common.add_argument("--seed", type=int, help="u64 seed, overrides the config")
    common.add_argument("--out", type=Path, help=f"output directory (default: config, ${OUT_ENV}, ./out)")
    common.add_argument("--format", choices=["csv"], default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tickdrift", description="SysTick drift experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("drift", "analytic drift model and Monte Carlo check"),
                           ("sim", "end-to-end simulation, event trace and sweep reports"),
                           ("plant", "closed-loop motor case study"),
                           ("oracle", "sweep-vs-replay and round-robin oracles")]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name == "oracle":
            sp.add_argument("--cases", type=int, help="randomized kernel cases (default 10000)")
            sp.add_argument("--mutation", choices=["skip_timer_command", "skip_promotion", "stale_slice"],
                            help="inject a known bug to check the oracle catches it")
        if name == "plant":
            sp.add_argument("--plant", choices=["plant1", "plant2"])
    sp = sub.add_parser("suite", parents=[common], help="named experiment bundle")
    sp.add_argument("name", choices=[*SUITES, "all"])
    return p


def _config_for(args) -> ScenarioConfig:
    overrides = {"mode": args.mode, "seed": args.seed}
    if args.command == "oracle" and (args.cases is not None or args.mutation):
        overrides["oracle"] = {k: v for k, v in (("cases", args.cases), ("mutation", args.mutation)) if v is not None}
    if args.command == "plant" and args.plant:
        overrides["plant"] = {"name": args.plant}
    if args.config is not None:
        return load_config(args.config, overrides)
    return parse_config({"name": args.command, **{k: v for k, v in overrides.items() if v is not None}})


def _out_dir(args, configured: str | None = None) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV) or configured or "out")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "suite":
            names = SUITES if args.name == "all" else (args.name,)
            out = _out_dir(args)
            seed = args.seed or 0
            mode = None if args.mode in (None, "all") else args.mode
            results = [run_suite(n, out, seed, mode) for n in names]
            ok = all(r.ok for r in results)
            for r in results:
                for why in r.problems:
                    print(f"FAIL {why}", file=sys.stderr)
            print(f"wrote {sum(len(r.files) for r in results)} files under {out}")
            return EXIT_OK if ok else EXIT_FAULT
        cfg = _config_for(args)
        out = _out_dir(args, cfg.output_dir)
        res = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a bug or a tripped consistency check
        log.debug("internal fault", exc_info=True)
        print(f"internal fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    for row in res.comparison:
        print(f"{row['scenario']:>12} {row['mode']:>14} {row['metric']:<26} {row['value']}")
    for why in res.problems:
        print(f"FAIL {why}", file=sys.stderr)
    if res.ok:
        return EXIT_OK
    return EXIT_MISMATCH if args.command == "oracle" else EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
