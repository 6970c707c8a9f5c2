"""
Command-line interface: ``crystab <command> <scenario> [options]``.

Summaries go to stdout as ``key=value`` lines, diagnostics to stderr.
Exit codes: 0 success, 1 invalid input, 2 runtime abort, 3 certificate
failure under ``--strict``.
"""

import logging
import os
import sys

import click
import django
from django.core.exceptions import ImproperlyConfigured

from . import views
from .apps import set_log_level
from .exceptions import CertificateFailure, CrystabError, RuntimeAbort, ScenarioError

logger = logging.getLogger("crystab")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2
EXIT_CERTIFICATE = 3

scenario_argument = click.argument(
    "scenario", type=click.Path(exists=True, dir_okay=False)
)
output_option = click.option(
    "-o", "--output", type=click.Path(dir_okay=False), default=None, help="CSV output path."
)
grid_option = click.option(
    "--grid", "n_cells", type=click.IntRange(min=1), default=None, help="Number of grid cells."
)


def echo_summary(summary):
    for line in views.summary_lines(summary):
        click.echo(line)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Overrides CRYSTAB_LOG_LEVEL.",
)
def crystab(log_level):
    """Stability analysis and feedback design for crystallizer models."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "crystab_project.settings")
    django.setup(set_prefix=False)
    if log_level:
        set_log_level(log_level.upper())


@crystab.command()
@scenario_argument
@output_option
@grid_option
def steady(scenario, output, n_cells):
    """Compute the steady state."""
    echo_summary(views.steady(views.load_scenario(scenario, n_cells), output))


@crystab.command()
@scenario_argument
@output_option
@grid_option
@click.option(
    "--beta-term",
    type=click.Choice(["consistent", "printed"]),
    default="consistent",
    help="Form of the nucleation term in theta.",
)
def linearize(scenario, output, n_cells, beta_term):
    """Compute the linearization coefficients."""
    scenario = views.load_scenario(scenario, n_cells)
    echo_summary(views.linearize(scenario, output, beta_term=beta_term))


@crystab.command()
@scenario_argument
@output_option
@grid_option
def weights(scenario, output, n_cells):
    """Compute the Lyapunov density weights."""
    echo_summary(views.weights(views.load_scenario(scenario, n_cells), output))


@crystab.command()
@scenario_argument
@output_option
@grid_option
@click.option("--closed/--open", default=True, help="Apply the feedback law.")
@click.option("--t-end", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--cfl", type=click.FloatRange(min=0, max=1, min_open=True), default=None)
@click.option("--stride", type=click.IntRange(min=1), default=1)
@click.option("--seed", type=int, default=None)
@click.option(
    "--mode",
    type=click.Choice(["linear", "nonlinear", "quasilinear"]),
    default=None,
    help="Model variant; linear (cooling) or quasilinear (enantiomer) by default.",
)
@click.option("--snapshot", "snapshots", type=float, multiple=True, help="Snapshot time.")
def simulate(scenario, output, n_cells, closed, t_end, cfl, stride, seed, mode, snapshots):
    """Simulate the closed or open loop."""
    scenario = views.load_scenario(scenario, n_cells)
    summary = views.simulate(
        scenario,
        output,
        closed=closed,
        t_end=t_end,
        cfl=cfl,
        stride=stride,
        seed=seed,
        mode=mode,
        snapshot_times=snapshots,
    )
    echo_summary(summary)


@crystab.command()
@scenario_argument
@grid_option
@click.option("--strict", is_flag=True, help="Exit with 3 when a certificate fails.")
@click.option("--t-end", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--cfl", type=click.FloatRange(min=0, max=1, min_open=True), default=None)
@click.option("--seed", type=int, default=None)
def verify(scenario, n_cells, strict, t_end, cfl, seed):
    """Run the stability certificates."""
    scenario = views.load_scenario(scenario, n_cells)
    try:
        report = views.verify(scenario, strict=strict, t_end=t_end, cfl=cfl, seed=seed)
    except CertificateFailure as e:
        echo_summary(e.report)
        raise
    echo_summary(report)


@crystab.command()
@scenario_argument
@output_option
@grid_option
@click.option("--param", "parameter", required=True, help="kappa, gamma, N, cfl or h-scale.")
@click.option("--values", required=True, help="Comma-separated parameter values.")
@click.option("--t-end", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--cfl", type=click.FloatRange(min=0, max=1, min_open=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
def sweep(scenario, output, n_cells, parameter, values, t_end, cfl, seed, workers):
    """Sweep one parameter over closed-loop simulations."""
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise ScenarioError(f"--values must be numbers: {e}") from e
    scenario = views.load_scenario(scenario, n_cells)
    rows = views.sweep(
        scenario, parameter, parsed, output, t_end=t_end, cfl=cfl, seed=seed, workers=workers
    )
    click.echo(",".join(views.SWEEP_COLUMNS))
    for row in rows:
        click.echo(",".join(views.format_value(row[c]) for c in views.SWEEP_COLUMNS))


def run(argv=None) -> int:
    """
    Run the command line and map errors onto exit codes.

    Parameters:
    argv (list | None): Arguments without the program name.

    Returns:
    int: The exit code.
    """
    try:
        crystab.main(args=argv, prog_name="crystab", standalone_mode=False)
    except ScenarioError as e:
        click.echo(f"error: {e.message}", err=True)
        return EXIT_INVALID
    except click.exceptions.Abort:
        return EXIT_INVALID
    except click.ClickException as e:
        e.show()
        return EXIT_INVALID
    except RuntimeAbort as e:
        logger.error(f"Aborted: {e}")
        click.echo(f"aborted: {e}", err=True)
        return EXIT_ABORT
    except CertificateFailure as e:
        click.echo(f"certificate failure: {e}", err=True)
        return EXIT_CERTIFICATE
    except CrystabError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INVALID
    except ImproperlyConfigured as e:
        click.echo(f"configuration error: {e}", err=True)
        return EXIT_INVALID
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run())
