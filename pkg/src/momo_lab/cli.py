"""``momo-lab`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 extraction failure
(partial outputs are still written).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .arith import build_arith_table, chebyshev_psi, load_table, mertens, save_table
from .errors import MomoLabError
from .pipelines import ExperimentConfig, run_config

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# flag -> config key; shared by the experiment subcommands
COMMON = {
    "--horizon": "horizon",
    "--checkpoints": "checkpoints",
    "--system": "system",
    "--weights": "weights",
    "--H-schedule": "H_schedule",
    "--H0-schedule": "H0_schedule",
    "--tail-fraction": "tail_fraction",
    "--grid-size": "grid_size",
    "--seed": "seed",
    "--recheck-samples": "recheck_samples",
    "--table": "table",
    "--out-dir": "out_dir",
}
EXTRA = {
    "average": {},
    "momo": {"--phi": "phi"},
    "extract": {},
    "bfree": {"--base": "base", "--eps-schedule": "eps_schedule"},
    "pnt": {"--a": "a", "--eps": "eps"},
    "erg1": {"--dictionary-size": "dictionary_size", "--kappa": "kappa"},
}
KIND_OF = {"average": "average", "momo": "momo", "extract": "sarnak",
           "bfree": "bfree", "pnt": "pnt", "erg1": "erg1"}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="momo-lab", description="Moebius orthogonality lab")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("sieve", help="build and cache the mu / Lambda table")
    s.add_argument("--n-max", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--block-size", type=int, default=None)
    for name, extra in EXTRA.items():
        sp = sub.add_parser(name, help=f"run the {KIND_OF[name]} experiment")
        sp.add_argument("--config", help="key=value config file; flags override it")
        for flag, key in {**COMMON, **extra}.items():
            sp.add_argument(flag, dest=key, default=None)
    return p


def _config(args) -> ExperimentConfig:
    keys = set(COMMON.values()) | set(EXTRA[args.command].values())
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    overrides["kind"] = KIND_OF[args.command]
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_mapping(overrides)


def _sieve(args) -> int:
    kw = {} if args.block_size is None else {"block_size": args.block_size}
    table = build_arith_table(args.n_max, **kw)
    save_table(table, args.out)
    back = load_table(args.out)
    same = (back.mu == table.mu).all() and (back.lam == table.lam).all()
    print(f"sieve: n_max={table.n_max} M={mertens(table, table.n_max)} "
          f"psi/x={chebyshev_psi(table, table.n_max) / table.n_max:.6f} "
          f"roundtrip={'ok' if same else 'MISMATCH'} -> {args.out}")
    return EXIT_OK if same else EXIT_FAILED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sieve":
            return _sieve(args)
        cfg = _config(args)
        report = run_config(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (MomoLabError, ValueError, OSError) as exc:
        print(f"momo-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report.write(Path(cfg.out_dir))
    print(report.one_line())
    return EXIT_OK if report.ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
