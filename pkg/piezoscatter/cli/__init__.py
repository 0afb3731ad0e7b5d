# Command group with one module per command family
import logging

import click

from piezoscatter.core.settings import init_settings

from . import mesh, solve, symbols, verify


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level")
@click.option("--workers", type=int, default=None, help="Frequency solve threads")
def cli(verbose, workers):
    """Wave-structure interaction of thermo-piezoelectric solids in a fluid."""
    settings = init_settings(workers=workers)
    logging.getLogger().setLevel(logging.DEBUG if verbose else settings.log_level)


cli.add_command(solve.solve_laplace)
cli.add_command(solve.solve_time)
cli.add_command(solve.reconstruct)
cli.add_command(solve.sweep)
cli.add_command(verify.verify)
cli.add_command(symbols.estimate_symbol)
cli.add_command(mesh.make_mesh)
