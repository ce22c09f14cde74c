"""
main.py – command-line entry point of the splitting lab

Subcommands: check, separatrix, melnikov, inner, measure, fit, report.
Every subcommand takes --config and the run overrides; results land in --out.
Errors of the lab are printed to stderr as one JSON object (exit code 2).
"""
import cProfile
import functools
import io
import json
import logging
import os
import pstats
import sys

import click

from . import workbench
from .errors import SplittingError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'
LOG_FILE = "run.log.jsonl"

# LogRecord attributes that are not user ``extra=`` fields
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonFormatter(logging.Formatter):
    """One JSON object per event: time, level, logger, event and any extra fields."""

    def format(self, record):
        payload = {
            "time": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
            "event": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED:
                payload[key] = value
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def setup_logging(out, verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)
    os.makedirs(out, exist_ok=True)
    handler = logging.FileHandler(os.path.join(out, LOG_FILE), mode="a")
    handler.setFormatter(JsonFormatter())
    handler.setLevel(logging.DEBUG)
    root = logging.getLogger()
    root.handlers = [h for h in root.handlers if getattr(h, "_splitting", False) is False]
    handler._splitting = True
    root.addHandler(handler)


def _fail(exc, code=2):
    if isinstance(exc, SplittingError):
        payload = exc.to_dict()
    else:
        payload = {"error": type(exc).__name__, "message": str(exc), "details": {}}
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(code)


def run_options(func):
    @click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                  help="Hamiltonian / run configuration (.toml or .json)")
    @click.option("--digits", type=int, default=None, help="Working precision override")
    @click.option("--workers", type=int, default=None, help="Worker processes for measure")
    @click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
    @click.option("--resume", is_flag=True, default=None, help="Reuse cached measure jobs")
    @click.option("--profile", is_flag=True, default=False, help="Log a cProfile report")
    @click.option("--verbose", "-v", is_flag=True, default=False)
    @functools.wraps(func)
    def wrapper(config_path, digits, workers, out, resume, profile, verbose, **kwargs):
        try:
            config = workbench.RunConfig.from_file(config_path, {
                "digits": digits, "workers": workers, "out": out, "resume": resume or None})
        except (SplittingError, FileNotFoundError) as exc:
            _fail(exc)
        setup_logging(config.out, verbose)
        store = workbench.ResultStore(config.out)
        profiler = cProfile.Profile() if profile else None
        try:
            if profiler is not None:
                profiler.enable()
            return func(config, store, **kwargs)
        except (SplittingError, FileNotFoundError) as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            _fail(exc)
        finally:
            if profiler is not None:
                profiler.disable()
                buf = io.StringIO()
                pstats.Stats(profiler, stream=buf).sort_stats('cumulative').print_stats(20)
                logger.info("profile:\n%s", buf.getvalue())
    return wrapper


@click.group()
def cli():
    """Exponentially small splitting of separatrices near a resonance."""


@cli.command()
@run_options
def check(config, store):
    """Check HP1-HP6; exit code 1 when a hypothesis fails."""
    report, payload = workbench.cli_check(config, store)
    click.echo(json.dumps(payload, sort_keys=True, indent=2))
    sys.exit(0 if report.passed else 1)


@cli.command()
@run_options
def separatrix(config, store):
    """Saddle, separatrix and its nearest complex singularity."""
    _, payload = workbench.cli_separatrix(config, store)
    click.echo(json.dumps(payload["singularity"], sort_keys=True, indent=2))


@cli.command()
@run_options
def melnikov(config, store):
    """Melnikov harmonics over the eps grid."""
    _, f0 = workbench.cli_melnikov(config, store)
    click.echo(f"melnikov.csv written; f0 limit {workbench.fmt(f0, 15)}")


@cli.command()
@run_options
def inner(config, store):
    """Inner equation: chi^[-1], b and f for every mu."""
    payload = workbench.cli_inner(config, store)
    click.echo(json.dumps(payload["results"], sort_keys=True, indent=2))


@cli.command()
@run_options
def measure(config, store):
    """Lobe areas over the eps x mu grid."""
    samples, _ = workbench.cli_measure(config, store)
    click.echo(f"{len(samples)} rows written to {store.path('samples.csv')}")


@cli.command()
@run_options
def fit(config, store):
    """Fit the area law and compare with the predictions."""
    workbench.cli_fit(config, store)
    click.echo(workbench.cli_report(config, store))


@cli.command()
@run_options
def report(config, store):
    """Print the summary of an existing report.json."""
    click.echo(workbench.cli_report(config, store))


if __name__ == "__main__":
    cli()
