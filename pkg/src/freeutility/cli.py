"""Command-line front end.

Subcommands ``solve-control``, ``estimate``, ``bcr``, ``gvp`` and ``verify``
read a YAML experiment config and write CSV rows with columns
``experiment_id, kind, alpha, seed, metric, value, wall_ms``.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 problem
too large for exact solution.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, parse_config, parse_text
from .errors import CapacityError, DegenerateError, ParameterError, ValidationError, ZeroProbabilityError
from .runner import run, summary_table, to_csv, verify_report

SUBCOMMANDS = {
    "solve-control": "control",
    "estimate": "estimate",
    "bcr": "bcr",
    "gvp": "gvp",
    "verify": "verify",
}

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, config_required: bool):
    p.add_argument("--config", required=config_required, help="YAML experiment config")
    p.add_argument("--alpha", help="temperature or comma separated sweep, e.g. 0.001,0.1,1,10")
    p.add_argument("--seed", help="seed, comma list or range such as 0-99")
    p.add_argument("--horizon", type=int, help="number of interaction cycles")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--log-base", choices=("2", "e"), default="2",
                   help="units for kl_cost and log_loss: bits (2) or nats (e)")
    p.add_argument("--summary", action="store_true", help="print an aligned summary table")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for (alpha, seed) cells")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value; dotted keys reach into sections")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock ms per cell (otherwise wall_ms is 0 so reruns are byte-identical)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeutility", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve-control": "soft-optimal control of a known environment",
        "estimate": "sequential Bayesian estimation of a symbol source",
        "bcr": "Bayesian control rule simulations",
        "gvp": "solve a declared sequence variational problem",
        "verify": "run the seeded property suites",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p, config_required=name != "verify")
        if name == "verify":
            p.add_argument("--suite", action="append", default=[],
                           help="suite to run (repeatable; default all)")
            p.add_argument("--scale", type=float, help="shrink sample counts by this factor")
    return parser


def _overrides(args) -> list:
    out = list(args.set)
    if args.alpha is not None:
        out.append(f"alpha={args.alpha}")
    if args.seed is not None:
        out.append(f"seeds={args.seed}")
    if args.horizon is not None:
        out.append(f"horizon={args.horizon}")
    if args.out is not None:
        out.append(f"out={args.out}")
    if getattr(args, "suite", None):
        out.append(f"verify.suites={','.join(args.suite)}")
    if getattr(args, "scale", None) is not None:
        out.append(f"verify.scale={args.scale}")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    try:
        overrides = _overrides(args)
        if args.config:
            cfg = parse_config(args.config, overrides)
        else:
            cfg = parse_text("kind: verify\n", "<default verify>", overrides)
        if cfg.kind != kind:
            raise ConfigError(f"{cfg.source}: config kind is {cfg.kind!r}; "
                              f"'{args.command}' expects kind {kind!r}")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if kind in ("verify", "gvp") and args.horizon is not None:
            print(f"note: --horizon has no effect on {kind} experiments", file=sys.stderr)
        rows, results = run(cfg, args.log_base, args.jobs, args.timing)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, DegenerateError, ParameterError, ZeroProbabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = to_csv(rows)
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        human = sys.stdout
    else:
        sys.stdout.write(text)
        human = sys.stderr
    if args.summary:
        print(summary_table(rows), file=human)
    if kind == "verify":
        print(verify_report(results), file=human)
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
