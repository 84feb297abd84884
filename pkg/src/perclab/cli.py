import sys
import signal
import argparse

from pydantic import ValidationError

from .config_manager import ConfigError, ConfigManager
from .config_models import Experiment, ExperimentConfig, RunSection, SelftestParams
from .experiments import run
from .misc import APPNAME
from .process_mgmt import ExperimentInterrupted, default_workers, shutdown_event
from .project_logger import getMainLogger, initMainLogger
from .runner import SampleRunner


class ExitCode:
    SUCCESS = 0
    INVALID_INPUT = 1
    SELFTEST_FAILED = 2
    INTERRUPTED = 130


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=f"{APPNAME}",
        description="Monte Carlo experiments on Poisson-Voronoi percolation.",
    )
    parser.add_argument("experiment", choices=[e.value for e in Experiment])
    parser.add_argument(
        "--config",
        "-c",
        default=None,
        help="""
            Experiment file ([run] section plus one parameter section) or the .meta of a
            previous run. Optional for selftest only.
            """,
    )
    parser.add_argument("--seed", type=int, default=None, help="Master seed, overrides [run] seed")
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes. Defaults to [run] workers, else the machine parallelism",
    )
    parser.add_argument("--out", default=None, help="Output prefix, overrides [run] output")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug output on stderr")
    return parser


def _load(cli_args) -> ExperimentConfig:
    experiment = Experiment(cli_args.experiment)
    if cli_args.config is None:
        if experiment != Experiment.SELFTEST:
            raise ConfigError(f"Experiment [{experiment}] needs --config FILE")
        config = ExperimentConfig(run=RunSection(experiment=experiment), params=SelftestParams())
    else:
        config = ConfigManager(cli_args.config).config
        if config.experiment != experiment:
            raise ConfigError(
                f"Config describes [{config.experiment}], command line asks for [{experiment}]",
                cli_args.config,
            )
    overrides = {
        key: value
        for key, value in (
            ("seed", cli_args.seed),
            ("workers", cli_args.workers),
            ("output", cli_args.out),
        )
        if value is not None
    }
    if overrides:
        try:
            run_section = RunSection.model_validate({**config.run.model_dump(), **overrides})
        except ValidationError as err:
            raise ConfigError(f"Invalid command-line override: {err}")
        config = ExperimentConfig(run=run_section, params=config.params)
    return config


def main(argv: list[str] | None = None) -> int:

    def signal_handler(rcv_signal, frame):
        if rcv_signal == signal.SIGINT:
            logger.info(f"Main Process -  SIGINT [{rcv_signal}] received")
        elif rcv_signal == signal.SIGTERM:
            logger.info(f"Main Process -  SIGTERM [{rcv_signal}] received")
        shutdown_event.set()

    argv = sys.argv[1:] if argv is None else argv
    cli_args = _parser().parse_args(argv)

    try:
        initMainLogger(verbose=cli_args.verbose)
    except Exception as err:
        print(f"Failed to init main logger: {err}", file=sys.stderr)
        return ExitCode.INVALID_INPUT
    logger = getMainLogger()

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        config = _load(cli_args)
    except (ConfigError, OSError) as err:
        logger.error(f"{err}")
        return ExitCode.INVALID_INPUT

    workers = config.run.workers or default_workers()
    logger.info(f"============== {APPNAME} {config.experiment} ==============")
    try:
        result = run(config, SampleRunner(workers))
    except ExperimentInterrupted as err:
        logger.warning(f"{err}")
        return ExitCode.INTERRUPTED
    except (ValueError, OSError) as err:
        logger.error(f"{err}")
        return ExitCode.INVALID_INPUT

    # stdout carries the machine-readable summary only
    for key, value in result.summary.items():
        print(f"{key}\t{value}")
    print(f"output\t{config.run.output}")

    if config.experiment == Experiment.SELFTEST and not result.passed:
        logger.error("Selftest failed")
        return ExitCode.SELFTEST_FAILED
    return ExitCode.SUCCESS


def entrypoint() -> None:
    sys.exit(main())
