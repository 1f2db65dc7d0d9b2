"""``aflab run|twin|spectrum|verify-spinorial <config.json>``

Exit status: 0 when every assertion passes, 2 when one fails, 3 on a usage
error (bad arguments, invalid config, unmet scenario precondition).
"""
from __future__ import annotations

import argparse
import logging
import sys

from aflab.config import ConfigError, ExperimentConfig, validate
from aflab.experiment import UsageError, run, spectrum, twin, verify_spinorial

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 2, 3

COMMANDS = {"run": run, "twin": twin, "spectrum": spectrum, "verify-spinorial": verify_spinorial}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aflab", description="Conformal-factor flow laboratory.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="experiment config (JSON)")
        s.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
        s.add_argument("--seed", type=int, metavar="N", help="seed for random initial data")
        s.add_argument("--threads", type=int, metavar="N",
                       help="thread count; recorded, kernels are serial")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.output.dir = args.out
        validate(cfg)
        report = COMMANDS[args.command](cfg, cfg.output.dir)
    except (ConfigError, UsageError) as exc:
        print(f"aflab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for a in report.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'} {a.name} value={a.value} limit={a.limit}")
    print(f"{report.kind}: {'all assertions passed' if report.passed else 'assertion failure'}")
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
