import sys, os, asyncio, json, logging, argparse
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional
from src.config.enums import Method, OutputFormat
from src.config.settings import Settings
from src.core.runner import EnsembleRunner
from src.models.run import RunConfig
from src.services.exceptions import SIMULATION_ERRORS, ConfigurationError
from src.services.observables import kron_delta_demo, offdiagonal_std
from src.services.simulation import Simulation
from src.utils.formatters import Formatters, write_text

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_WARNINGS = 0, 1, 2, 3


def configure_logging(settings: Optional[Settings] = None):
    """Stdout-only logging; JSON records in containers or with RABI_LOG_FORMAT=json."""
    settings = settings or Settings.get_instance()
    in_container = os.path.exists('/.dockerenv') or os.getenv('KUBERNETES_SERVICE_HOST')

    if in_container or settings.log_format == "json":
        class JSONFormatter(logging.Formatter):
            def format(self, record):
                log_data = {
                    'timestamp': datetime.now(timezone.utc).isoformat(),
                    'level': record.levelname,
                    'logger': record.name,
                    'message': record.getMessage(),
                    'module': record.module,
                    'function': record.funcName,
                }
                if record.exc_info:
                    log_data['exception'] = self.formatException(record.exc_info)
                return json.dumps(log_data, ensure_ascii=False)

        formatter = JSONFormatter()
    else:
        formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(name)s: %(message)s")

    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(settings.log_level)
    root_logger.handlers.clear()
    root_logger.addHandler(stream_handler)

    for name in ("asyncio", "numpy", "scipy"):
        logging.getLogger(name).setLevel(logging.WARNING)


logger = logging.getLogger("src")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Thermal dynamics of the quantum Rabi model")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="propagate one method or compare all of them")
    run.add_argument("--config", help="JSON file with run configuration keys")
    run.add_argument("--method", choices=[m.value for m in Method])
    run.add_argument("--mode", choices=["full", "simplified"])
    run.add_argument("--epsilon", type=float)
    run.add_argument("--V", type=float)
    run.add_argument("--omega", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--hbar", type=float)
    run.add_argument("--kB", type=float)
    run.add_argument("--temperature", "-T", type=float)
    run.add_argument("--realizations", "-N", type=int)
    run.add_argument("--samples", "--N-s", dest="samples", type=int)
    run.add_argument("--fock-trunc-M", "-M", dest="fock_trunc_M", type=int)
    run.add_argument("--boltzmann-trunc-NT", "--N-T", dest="boltzmann_trunc_NT", type=int)
    run.add_argument("--expand-trunc-jmax", "--j-max", dest="expand_trunc_jmax", type=int)
    run.add_argument("--tail-tolerance", type=float)
    run.add_argument("--t-max", type=float)
    run.add_argument("--dt-out", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--output", "-o")
    run.add_argument("--format", choices=[f.value for f in OutputFormat])
    run.add_argument("--rel-tol", type=float)
    run.add_argument("--abs-tol", type=float)
    run.add_argument("--max-step", type=float)
    run.add_argument("--regularization-floor", type=float)
    run.add_argument("--initial-perturbation", type=float)
    run.add_argument("--g-phase", type=float)
    run.add_argument("--allow-warnings", action="store_true", default=None)

    delta = sub.add_parser("delta", help="sampled Kronecker delta (1/N) Σ s_n s_m")
    delta.add_argument("--samples", "-N", type=int, default=100)
    delta.add_argument("--levels", "-M", type=int, default=7)
    delta.add_argument("--seed", type=int, default=12345)
    delta.add_argument("--output", "-o")
    delta.add_argument("--format", choices=[f.value for f in OutputFormat])
    return parser


def run_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "config"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


async def run_command(args: argparse.Namespace, settings: Settings) -> int:
    overrides = run_overrides(args)
    config = RunConfig.from_sources(args.config, overrides, defaults={"format": settings.default_format})
    async with EnsembleRunner(settings.max_workers) as runner:
        outcome = await Simulation(config, runner).execute()
        logger.debug(f"Runner stats: {runner.get_stats()}")

    warnings: List[str] = outcome.warnings
    for path in outcome.paths:
        print(path)
    if warnings and not (config.allow_warnings or settings.allow_warnings):
        logger.error(f"{len(warnings)} diagnostic warning(s) flagged; rerun with --allow-warnings to accept")
        return EXIT_WARNINGS
    return EXIT_OK


async def delta_command(args: argparse.Namespace, settings: Settings) -> int:
    if args.samples < 1 or args.levels < 1:
        raise ConfigurationError("samples" if args.samples < 1 else "levels", "must be at least 1")
    fmt = OutputFormat(args.format or settings.default_format)
    matrix = kron_delta_demo(args.samples, args.levels, args.seed)
    logger.info(f"Kronecker delta: N={args.samples}, M={args.levels}, off-diagonal std {offdiagonal_std(matrix):.4f}")
    path = args.output or os.path.join(settings.output_dir, f"delta{fmt.extension}")
    metadata = {"samples": args.samples, "levels": args.levels, "seed": args.seed}
    print(await write_text(path, Formatters.matrix(matrix, fmt, metadata)))
    return EXIT_OK


async def main(argv: Optional[List[str]] = None) -> int:
    """Entrypoint: parse, run, map failures to exit codes."""
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.get_instance()
    except ValueError as e:
        logging.basicConfig()
        logger.error(f"Invalid environment settings: {e}")
        return EXIT_CONFIG
    configure_logging(settings)

    try:
        if args.command == "delta":
            return await delta_command(args, settings)
        return await run_command(args, settings)
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except SIMULATION_ERRORS as e:
        logger.error(f"Run failed: {e}")
        return EXIT_FAILURE
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"Could not write output: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logger.info("Exit requested by user.")
        sys.exit(EXIT_FAILURE)
    except Exception as e:
        logger.exception(f"Unhandled runtime exception: {e}")
        sys.exit(EXIT_FAILURE)
