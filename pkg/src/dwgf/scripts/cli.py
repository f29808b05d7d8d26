"""`dwgf` command line: run an experiment, verify a property suite, sweep a parameter.

Exit codes: 0 on success, 1 on numeric failures (or a failed verification), 2 on configuration and usage errors.
"""
import argparse
import logging
import os
from typing import Optional, Sequence

from dotenv import load_dotenv

from dwgf.data.problem import load_config
from dwgf.errors import ConfigError, DWGFError, NumericError
from dwgf.scripts.run import run
from dwgf.scripts.sweep import parse_values, sweep
from dwgf.scripts.verify import verify
from dwgf.utils.verification import Suite

pylogger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "DWGF_OUTPUT_DIR"

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwgf", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run the particle flow on an experiment config.")
    run_parser.add_argument("config", help="Path to the experiment YAML file.")
    run_parser.add_argument("overrides", nargs="*", help="Dotted key=value overrides, e.g. flow.gamma=0.5")

    verify_parser = subparsers.add_parser("verify", help="Run a built-in property suite.")
    verify_parser.add_argument("suite", choices=[suite.value for suite in Suite])

    sweep_parser = subparsers.add_parser("sweep", help="Run an experiment once per value of a parameter.")
    sweep_parser.add_argument("config", help="Path to the experiment YAML file.")
    sweep_parser.add_argument("--param", required=True, help="Dotted config key, e.g. flow.gamma")
    sweep_parser.add_argument("--values", required=True, help="Comma-separated values, e.g. 0,0.15,0.5")
    sweep_parser.add_argument("overrides", nargs="*", help="Dotted key=value overrides applied to every run.")

    return parser


def load_experiment_config(config_path: str, overrides: Sequence[str] = ()):
    """Compose the config and apply the output-directory override from the environment (or a `.env` file)."""
    load_dotenv()
    cfg = load_config(config_path, overrides)

    output_dir = os.environ.get(OUTPUT_DIR_ENV)
    if output_dir:
        pylogger.info(f"Output directory overridden by {OUTPUT_DIR_ENV}: <{output_dir}>")
        cfg.output.dir = output_dir
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    # overrides may also follow the options, e.g. `sweep conf.yaml --param p --values 1,2 flow.seed=3`
    args, extra = parser.parse_known_args(argv)
    if extra and args.command == "verify":
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    overrides = [*getattr(args, "overrides", []), *extra]

    try:
        if args.command == "run":
            run(load_experiment_config(args.config, overrides))
        elif args.command == "verify":
            return EXIT_OK if verify(args.suite) else EXIT_FAILURE
        elif args.command == "sweep":
            sweep(load_experiment_config(args.config, overrides), args.param, parse_values(args.values))
    except ConfigError as err:
        pylogger.error(f"Invalid configuration: {err}")
        return EXIT_USAGE
    except NumericError as err:
        pylogger.error(f"Numeric failure: {err}")
        return EXIT_FAILURE
    except DWGFError as err:
        pylogger.error(str(err))
        return EXIT_FAILURE

    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
