"""
Command-line entry point for the PFGC toolkit.

Every RunConfig key is also a flag with a kebab-case name; flags override
the JSON file given with --config. Errors end the process with a single
'error=<Class> message="..."' line on standard error: exit code 1 for data
and numerical failures, 2 for configuration and usage mistakes.
"""

import argparse
import json
import sys
from typing import Any, Callable, Dict, List, NoReturn, Optional

import structlog

from cli.models import RunConfig
from config.configuration_manager import ConfigurationManager
from coordinator.main_coordinator import PFGCCoordinator
from models.errors import ConfigError, PFGCError, UsageError
from utils.logging_setup import configure_logging

logger = structlog.get_logger(__name__)

PROGRAM_NAME = "pfgc"

# Short spellings used in the documented invocations.
FLAG_ALIASES = {"dataset": ["--input"], "out_dir": ["--out"], "n_nodes": ["--n"]}


class PFGCArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports mistakes as UsageError instead of printing usage."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON file with run settings")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    for name, field in RunConfig.model_fields.items():
        flags = [f"--{name.replace('_', '-')}", *FLAG_ALIASES.get(name, [])]
        if field.annotation is bool:
            parser.add_argument(*flags, dest=name, action=argparse.BooleanOptionalAction, default=None, help=field.description)
        else:
            parser.add_argument(*flags, dest=name, default=None, help=field.description)


def build_parser() -> PFGCArgumentParser:
    parser = PFGCArgumentParser(prog=PROGRAM_NAME, description="Graph clustering with restructured graphs and adaptive filters")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, summary in (
        ("restructure", "build the homophilic and heterophilic graphs"),
        ("train", "train and evaluate one model per seed (or the lattice with --grid)"),
        ("evaluate", "recompute metrics from a checkpoint"),
        ("verify-theorem", "compare global and local filters on block-model graphs"),
        ("commonality", "score neighbour overlap as a homophily predictor"),
        ("grid", "grid search over the hyper-parameter lattice"),
    ):
        _add_run_flags(subparsers.add_parser(name, help=summary))
    return parser


def cmd_restructure(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    return coordinator.restructure()


def cmd_train(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    if coordinator.run_config.grid:
        return coordinator.grid()
    return coordinator.train().model_dump(mode="json", exclude={"config"})


def cmd_evaluate(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    return coordinator.evaluate().model_dump(mode="json", exclude={"config"})


def cmd_verify_theorem(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    reports = coordinator.verify_theorem()
    verdicts: Dict[str, int] = {}
    for report in reports:
        verdicts[report.verdict.value] = verdicts.get(report.verdict.value, 0) + 1
    return {"rows": len(reports), "verdicts": verdicts}


def cmd_commonality(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    return coordinator.commonality()


def cmd_grid(coordinator: PFGCCoordinator) -> Dict[str, Any]:
    return coordinator.grid()


COMMANDS: Dict[str, Callable[[PFGCCoordinator], Dict[str, Any]]] = {
    "restructure": cmd_restructure,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "verify-theorem": cmd_verify_theorem,
    "commonality": cmd_commonality,
    "grid": cmd_grid,
}


def _report_error(error: Exception) -> None:
    print(f"error={type(error).__name__} message={json.dumps(str(error))}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name; sys.argv when omitted

    Returns:
        int: Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        config_manager = ConfigurationManager()
    except (UsageError, ConfigError) as e:
        _report_error(e)
        return e.exit_code
    configure_logging(args.log_level or config_manager.get_log_level(), config_manager.get_log_json())

    try:
        overrides = {name: getattr(args, name) for name in RunConfig.model_fields}
        run_config = config_manager.load_configuration(args.config, overrides)
        coordinator = PFGCCoordinator(config_manager, run_config)
        summary = COMMANDS[args.command](coordinator)
    except PFGCError as e:
        logger.debug("command failed", command=args.command, exc_info=True)
        _report_error(e)
        return e.exit_code
    except Exception as e:
        logger.error("unexpected failure", command=args.command, exc_info=True)
        _report_error(e)
        return 1
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
