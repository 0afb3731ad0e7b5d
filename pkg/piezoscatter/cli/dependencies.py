import functools
import logging
from pathlib import Path
from typing import Tuple

import click

from piezoscatter.core.exceptions import (
    ConfigError,
    PersistenceError,
    PiezoScatterError,
)
from piezoscatter.core.laplace import LaplaceParameter, parse_laplace_parameter
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.dto.config import ProblemConfigDTO
from piezoscatter.repository.config import load_config
from piezoscatter.repository.mesh import load_mesh

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT_ERROR = 2

config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Problem configuration (JSON)",
)
mesh_option = click.option(
    "--mesh",
    "mesh_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Volume mesh in the ASCII mesh format",
)


class LaplaceParamType(click.ParamType):
    """``RE,IM`` with RE > 0."""

    name = "RE,IM"

    def convert(self, value, param, ctx) -> LaplaceParameter:
        if isinstance(value, LaplaceParameter):
            return value
        try:
            return parse_laplace_parameter(value)
        except ConfigError as e:
            self.fail(str(e), param, ctx)


LAPLACE_PARAMETER = LaplaceParamType()


def handle_errors(command):
    """Map input errors to exit code 2 with the message on stderr."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except PiezoScatterError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            raise click.exceptions.Exit(EXIT_INPUT_ERROR)

    return wrapper


def load_inputs(config_path, mesh_path) -> Tuple[ProblemConfigDTO, CoupledMesh]:
    return load_config(config_path), load_mesh(mesh_path)


def output_dir(path) -> Path:
    target = Path(path)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PersistenceError(f"cannot create directory: {e.strerror or e}", path)
    return target
