"""Command-line entry point.

::

    windclime <stage> --config PATH [--seed N] [--out DIR]
    windclime --validate-config --config PATH
    windclime --version

Exit status is 0 on success, 1 for input or validation errors and 2 when a
numerical routine fails to converge.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import STAGES, load_config, validate_config
from .errors import ConvergenceError, WindclimeError

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="windclime",
                                description="Wind-hazard classification and mixed-climate design wind speeds.")
    p.add_argument("stage", nargs="?", choices=STAGES, help="pipeline stage to run")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--validate-config", action="store_true",
                   help="check the config and referenced paths, then exit")
    p.add_argument("--version", action="version", version=f"windclime {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="windclime: %(levelname)s: %(message)s")
    if args.config is None:
        print("windclime: error: --config is required", file=sys.stderr)
        return EXIT_INPUT
    if args.stage is None and not args.validate_config:
        print("windclime: error: name a stage or pass --validate-config", file=sys.stderr)
        return EXIT_INPUT
    # imported late so --version and argument errors stay fast
    from .pipeline import run_stage

    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if args.validate_config:
            problems = validate_config(cfg)
            for msg in problems:
                print(f"windclime: error: {msg}", file=sys.stderr)
            if problems:
                return EXIT_INPUT
            if args.stage is None:
                print(f"{args.config}: ok")
                return EXIT_OK
        written = run_stage(args.stage, cfg)
    except ConvergenceError as exc:
        print(f"windclime: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (WindclimeError, ValueError, KeyError, OSError) as exc:
        print(f"windclime: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not args.quiet:
        for path in written:
            print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
