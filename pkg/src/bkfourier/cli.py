import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import CHECK_NAMES, GROUP_NAMES, CheckConfig
from .errors import BKFourierError, ConfigError
from .report import emit_report
from .suites import run_checks
from .utils import parse_int_list, split_names

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bkfourier", description="Exhaustive checks of Braverman-Kazhdan Fourier kernels."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON check configuration to start from.")
    parser.add_argument("--groups", help=f"Comma list from {', '.join(GROUP_NAMES)}.")
    parser.add_argument("--q", dest="q_list", help="Comma list of field sizes.")
    parser.add_argument("--checks", help=f"Comma list from {', '.join(CHECK_NAMES)}, or all.")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--matrix-cap", type=int)
    parser.add_argument("--format", choices=["text", "json"])
    parser.add_argument("--out", dest="out_path")
    parser.add_argument("--export-tables", metavar="DIR")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--save-config", metavar="PATH", help="Write the resolved configuration.")
    return parser


def config_from_args(args: argparse.Namespace) -> CheckConfig:
    config = CheckConfig.load(Path(args.config)) if args.config else CheckConfig()
    config.from_env()
    if args.groups:
        config.groups = split_names(args.groups)
    if args.q_list:
        try:
            config.q_list = parse_int_list(args.q_list)
        except ValueError as exc:
            raise ConfigError(f"--q: {exc}") from exc
    if args.checks:
        config.checks = split_names(args.checks)
    if args.threads is not None:
        config.threads = args.threads
    if args.matrix_cap is not None:
        config.matrix_cap = args.matrix_cap
    if args.format:
        config.format = args.format
    if args.out_path:
        config.out_path = args.out_path
    if args.export_tables:
        config.export_tables = True
        config.tables_dir = args.export_tables
    if args.log_level:
        config.log_level = args.log_level
    return config.validate()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"bkfourier: {exc}", file=sys.stderr)
        return 2

    logging.basicConfig(level=config.log_level.upper(), format=LOG_FORMAT)

    if args.save_config:
        path = Path(args.save_config)
        path.parent.mkdir(parents=True, exist_ok=True)
        config.save(path)
        print(f"Saved config to {path}")

    try:
        report = run_checks(config)
        out_path = Path(config.out_path) if config.out_path else None
        text = emit_report(report, config.format, out_path)
    except ConfigError as exc:
        print(f"bkfourier: {exc}", file=sys.stderr)
        return 2
    except BKFourierError as exc:
        print(f"bkfourier: {exc}", file=sys.stderr)
        return 1

    if out_path is None:
        print(text, end="")
    else:
        print(f"Saved report to {out_path}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
