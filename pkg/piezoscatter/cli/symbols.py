import logging

import click
import numpy as np

from piezoscatter.cli.dependencies import (
    config_option,
    handle_errors,
    load_inputs,
    mesh_option,
)
from piezoscatter.repository.results import write_report
from piezoscatter.service.symbols import (
    MIN_SAMPLES,
    SYMBOL_NAMES,
    build_symbol,
    estimate_symbol_index,
)

logger = logging.getLogger(__name__)


@click.command("estimate-symbol")
@click.argument("name", type=click.Choice(SYMBOL_NAMES))
@config_option
@mesh_option
@click.option(
    "--sigma",
    "sigmas",
    type=float,
    multiple=True,
    default=(0.5, 1.0, 2.0),
    show_default=True,
    help="Lines Re s = sigma (repeatable)",
)
@click.option("--omega-max", type=float, default=50.0, show_default=True)
@click.option("--samples", type=int, default=MIN_SAMPLES, show_default=True)
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False),
    default="symbol.report.json",
    show_default=True,
)
@handle_errors
def estimate_symbol(name, config_path, mesh_path, sigmas, omega_max, samples, output):
    """Fit the growth exponents of an operator norm in |s| and 1/Re s."""
    config, mesh = load_inputs(config_path, mesh_path)
    norm = build_symbol(name, mesh, config.material_params(), config.annulus_factor)
    omegas = np.geomspace(1.0, omega_max, samples)
    report = estimate_symbol_index(norm, sigmas, omegas, name=name)
    write_report(report, output)
    mu = "n/a" if report.mu_hat is None else f"{report.mu_hat:.3f}"
    m = "n/a" if report.m_hat is None else f"{report.m_hat:.3f}"
    click.echo(f"{name}: mu_hat = {mu}, m_hat = {m}, R^2 = {report.r_squared:.4f}")
