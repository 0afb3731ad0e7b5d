import logging

import click

from piezoscatter.cli.dependencies import EXIT_FAILED, handle_errors
from piezoscatter.core.settings import get_settings
from piezoscatter.repository.results import write_report
from piezoscatter.service.verification import SUITES, run_suite

logger = logging.getLogger(__name__)


@click.command("verify")
@click.argument("suite", type=click.Choice(SUITES + ("all",)))
@click.option("--seed", type=int, default=None, help="Seed of the randomized checks")
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False),
    default="report.json",
    show_default=True,
)
@handle_errors
def verify(suite, seed, output):
    """Run a verification suite; exit 1 if any check fails."""
    seed = get_settings().seed if seed is None else seed
    report = run_suite(suite, seed)
    write_report(report, output)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        click.echo(
            f"{status} {check.suite}.{check.quantity}: {check.actual:.4g} "
            f"(slack {check.slack:.3g})"
        )
    outcome = "pass" if report.passed else "FAIL"
    click.echo(f"{suite}: {outcome} ({report.elapsed_s:.1f}s)")
    if not report.passed:
        raise click.exceptions.Exit(EXIT_FAILED)
