import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from hybridqf import __version__
from hybridqf.commands import CommandContext, CommandRegistry, default_registry, parse_times
from hybridqf.errors import ConfigError, HybridError
from hybridqf.io import Provenance
from hybridqf.logging_setup import configure_logging
from hybridqf.otel import configure_tracing, get_tracer, traced
from hybridqf.schemas import load_model_config
from hybridqf.settings import Settings, get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONFIG = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="Model/experiment YAML file.")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: settings.output_dir).")
    parser.add_argument("--tol", type=float, default=None, help="Positivity tolerance.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for samples and Monte Carlo runs.")
    parser.add_argument("--times", type=str, default=None, help="Comma-separated evaluation times.")
    parser.add_argument("--grid", type=str, default=None, help="ξ-grid as L:N or L1,..,Ld:N1,..,Nd (odd N).")
    parser.add_argument("--force", action="store_true", help="Run even when the model fails validation.")
    parser.add_argument("--log-level", type=str, default=None, help="Override the configured log level.")


def create_parser(registry: CommandRegistry) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridqf", description="Quasi-free hybrid quantum-classical dynamics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in registry.list().items():
        sub = subparsers.add_parser(name, help=command.help, description=command.help)
        _add_common(sub)
        command.configure(sub)
    return parser


def _effective_settings(args: argparse.Namespace, settings: Settings) -> Settings:
    update = {}
    if args.log_level:
        update["log_level"] = args.log_level
    if getattr(args, "workers", None):
        update["n_workers"] = args.workers
    return settings.model_copy(update=update) if update else settings


_UNRECORDED_FLAGS = ("--out", "--workers", "--log-level")


def _recorded_command(argv: List[str]) -> str:
    """The command line for output headers, without flags that cannot change results."""

    kept: List[str] = []
    skip = False
    for token in argv:
        if skip:
            skip = False
        elif token in _UNRECORDED_FLAGS:
            skip = True
        elif not token.startswith(tuple(f"{flag}=" for flag in _UNRECORDED_FLAGS)):
            kept.append(token)
    return " ".join(["hybridqf", *kept])


def main(argv: Optional[List[str]] = None, settings: Optional[Settings] = None) -> int:
    registry = default_registry()
    parser = create_parser(registry)
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)

    settings = _effective_settings(args, settings or get_settings())
    configure_logging(settings)
    tracer_provider = configure_tracing(settings)
    tracer = get_tracer(__name__)

    try:
        if args.times is not None:
            args.times = parse_times(args.times)
        command = registry.get(args.command)
        loaded = load_model_config(args.config)
        seed = args.seed if args.seed is not None else loaded.model.run.seed
        provenance = Provenance(
            config_sha256=loaded.sha256, command=_recorded_command(argv), version=__version__, seed=seed
        )
        out_dir = args.out or settings.output_dir
        context = CommandContext(
            loaded=loaded, args=args, settings=settings, out_dir=Path(out_dir), provenance=provenance
        )
        with traced(tracer, f"hybridqf.{command.name}", config_sha256=loaded.sha256, seed=seed, times=args.times):
            code = command.run(context)
        logger.info("Command finished", extra={"command": command.name, "exit_code": code})
        return code
    except ConfigError as exc:
        logger.error("Malformed configuration", extra={"error": str(exc), "location": exc.location})
        print(f"hybridqf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HybridError as exc:
        logger.error("Command failed", extra={"error": str(exc), "error_type": type(exc).__name__})
        print(f"hybridqf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        if tracer_provider is not None:
            tracer_provider.shutdown()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
