"""Command-line runner: ``ldtail run | validate | list-experiments``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import parse_config, read_config_data
from .errors import BudgetExceeded, CertificateError, ConfigError, LdtailError
from .experiments import list_experiments, run_experiment, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_CERTIFICATE = 4
OUT_ENV = "LDTAIL_OUT"


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, CertificateError):
        return EXIT_CERTIFICATE
    return EXIT_CONFIG


def _resolve(args):
    """Merge the config file with command-line overrides and validate once."""
    data = read_config_data(args.config) if args.config else {}
    overrides = {
        "experiment": args.experiment,
        "seed": args.seed,
        "threads": args.threads,
        "budget_states": args.budget_states,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "lz_overlay", False):
        data["lz_overlay"] = True
    return parse_config(data)


def _out_dir(args, cfg) -> str:
    return args.out or cfg.output.dir or os.environ.get(OUT_ENV) or "ldtail-out"


def cmd_run(args) -> int:
    cfg = _resolve(args)
    out = run_experiment(cfg)
    csv_path, audit_path = write_outputs(cfg, out, _out_dir(args, cfg))
    print(f"wrote {csv_path} and {audit_path} ({len(out.records)} rows, {out.status})")
    if out.exception is not None:
        print(f"error: {out.error}", file=sys.stderr)
        return _exit_code(out.exception)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _resolve(args)
    print(json.dumps({"status": "ok", "resolved": cfg.model_dump()}, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_list(args) -> int:
    for name, text in list_experiments().items():
        print(f"{name:12s} {text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldtail", description="Upper-tail rate functions and their error budgets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--experiment", help="experiment name (overrides the config)")
        p.add_argument("--config", metavar="PATH", help="YAML or JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--budget-states", type=int, dest="budget_states", help="largest state count enumerated exactly")
        p.add_argument("--lz-overlay", action="store_true", dest="lz_overlay", help="add the closed-form triangle column")

    run = sub.add_parser("run", help="run an experiment and write CSV and JSON")
    common(run)
    run.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./ldtail-out)")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config without computing")
    common(val)
    val.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-experiments", help="list experiment names")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, CertificateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except LdtailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
