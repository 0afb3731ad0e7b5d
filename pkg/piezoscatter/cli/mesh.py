import click

from piezoscatter.cli.dependencies import handle_errors
from piezoscatter.repository.mesh import MeshRepository
from piezoscatter.service.primitives import build_primitive


@click.command("make-mesh")
@click.argument("kind", type=click.Choice(["tet", "cube", "icosphere"]))
@click.option(
    "--size",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Refinements (tet), cells per edge (cube) or subdivision level (icosphere)",
)
@click.option("--output", "-o", type=click.Path(dir_okay=False), required=True)
@handle_errors
def make_mesh(kind, size, output):
    """Write a shipped primitive in the ASCII mesh format."""
    mesh = build_primitive(kind, size)
    target = MeshRepository().save(mesh, output)
    click.echo(
        f"Wrote {target}: {mesh.n_vertices} vertices, {mesh.n_tets} cells, "
        f"{mesh.n_tris} boundary faces"
    )
