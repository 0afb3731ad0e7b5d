import logging
from typing import Optional

import click
import numpy as np

from piezoscatter.cli.dependencies import (
    LAPLACE_PARAMETER,
    config_option,
    handle_errors,
    load_inputs,
    mesh_option,
    output_dir,
)
from piezoscatter.core.exceptions import PersistenceError
from piezoscatter.dto.report import TimeDomainReportDTO, TimeseriesRowDTO
from piezoscatter.repository.results import (
    ArrayRepository,
    dump_matrix,
    write_report,
    write_sweep,
    write_timeseries,
)
from piezoscatter.service.coupled_solver import (
    growth_exponent,
    solve_problem,
    stability_sweep,
)
from piezoscatter.service.cq_time import (
    RULES,
    CQPlan,
    bound_audit,
    series_rows,
    solve_time_domain,
)
from piezoscatter.service.field_eval import (
    ProbeSet,
    derived_fields,
    reconstruct_pressure,
    reconstruct_pressure_series,
)

logger = logging.getLogger(__name__)

output_option = click.option(
    "--output",
    "-o",
    type=click.Path(file_okay=False),
    default="out",
    show_default=True,
    help="Output directory",
)


@click.command("solve-laplace")
@config_option
@mesh_option
@click.option("--s", "s", type=LAPLACE_PARAMETER, required=True, help="Re s > 0")
@click.option(
    "--dump-matrix",
    "matrix_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also write the coupled matrix in MatrixMarket form",
)
@output_option
@handle_errors
def solve_laplace(config_path, mesh_path, s, matrix_path, output):
    """Solve the coupled FEM-BEM system at one Laplace parameter."""
    config, mesh = load_inputs(config_path, mesh_path)
    mat = config.material_params()
    probes = ProbeSet.build(mesh, config.probes)
    interior, exterior = probes.select("interior"), probes.select("exterior")
    pairs = None
    if len(interior) and len(exterior):
        pairs = (interior.points, exterior.points)

    solution = solve_problem(config, mesh, s, probes=pairs)
    fields = solution.fields
    pressure = reconstruct_pressure(
        mesh,
        s,
        mat.sound_c,
        fields["phi_gamma"],
        fields["lambda"],
        probes,
        allow_interior=True,
    )
    derived = derived_fields(mesh, mat, fields["u"], fields["theta"], fields["phi"])

    target = output_dir(output)
    write_report(solution.to_dto(), target / "solve.report.json")
    ArrayRepository().save(
        target / "solution.npz",
        s=np.array([s.s]),
        x=solution.x,
        probe_labels=np.array(probes.labels, dtype=str),
        probe_points=probes.points,
        probe_pressure=pressure,
        centroids=derived.centroids,
        stress=derived.stress,
        entropy=derived.entropy,
        displacement=derived.displacement,
        **fields,
    )
    if matrix_path:
        dump_matrix(solution.system.matrix, matrix_path, comment=f"s = {s}")

    d = solution.diagnostics
    click.echo(f"s = {s}: {solution.system.n_unknowns} unknowns ({d.method})")
    click.echo(f"residual {d.residual:.3e}, stability ratio {d.stability_ratio:.3e}")
    for label, value in zip(probes.labels, pressure):
        click.echo(f"p[{label}] = {value.real:.6e}{value.imag:+.6e}j")


@click.command("solve-time")
@config_option
@mesh_option
@click.option("--rule", type=click.Choice(sorted(RULES)), default=None)
@click.option("--dt", type=float, default=None, help="Time step")
@click.option("--steps", type=int, default=None, help="Number of steps N")
@output_option
@handle_errors
def solve_time(config_path, mesh_path, rule, dt, steps, output):
    """Causal time-domain run by convolution quadrature."""
    config, mesh = load_inputs(config_path, mesh_path)
    mat = config.material_params()
    cq = config.cq
    plan = CQPlan(
        rule=rule or cq.rule,
        dt=dt if dt is not None else cq.dt,
        n_steps=steps if steps is not None else cq.n_steps,
        eps_target=cq.eps_target,
    )
    probes = ProbeSet.build(mesh, config.probes)
    result = solve_time_domain(
        config, mesh, plan, points=probes.points, labels=probes.labels
    )
    audit = bound_audit(result.times, result.energy_series(mesh, mat), result.data)

    target = output_dir(output)
    write_timeseries(result.to_rows(), target / "probes.csv")
    report = TimeDomainReportDTO(
        rule=plan.rule,
        dt=plan.dt,
        n_steps=plan.n_steps,
        contour_radius=plan.contour_radius,
        first_arrival=result.first_arrival,
        causality_residual=result.causality_residual(),
        imaginary_residue=result.imaginary_residue,
        bound_ratios={name: audit.max_ratio(name) for name in audit.ratios},
        bounded=audit.bounded,
        probes=probes.labels,
    )
    write_report(report, target / "time.report.json")
    ArrayRepository().save(
        target / "densities.npz",
        times=result.times,
        rule=np.array(plan.rule),
        dt=np.array(plan.dt),
        n_steps=np.array(plan.n_steps),
        eps_target=np.array(plan.eps_target),
        phi_gamma=result.field("phi_gamma"),
        **{"lambda": result.field("lambda")},
    )
    click.echo(
        f"{plan.rule}, dt = {plan.dt}, N = {plan.n_steps}: causality residual "
        f"{report.causality_residual:.2e}, imaginary residue "
        f"{report.imaginary_residue:.2e}"
    )


def _archive_field(archive: dict, key: str, path) -> np.ndarray:
    if key not in archive:
        raise PersistenceError(f"archive has no {key!r} entry", path)
    return archive[key]


@click.command("reconstruct")
@config_option
@mesh_option
@click.option(
    "--densities",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="solution.npz from solve-laplace or densities.npz from solve-time",
)
@click.option("--allow-interior", is_flag=True, help="Evaluate interior probes too")
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False),
    default="pressure.csv",
    show_default=True,
)
@handle_errors
def reconstruct(config_path, mesh_path, densities, allow_interior, output):
    """Exterior pressure at the configured probes from boundary densities."""
    config, mesh = load_inputs(config_path, mesh_path)
    c = config.material_params().sound_c
    probes = ProbeSet.build(mesh, config.probes)
    archive = ArrayRepository().load(densities)
    phi = _archive_field(archive, "phi_gamma", densities)
    lam = _archive_field(archive, "lambda", densities)

    s: Optional[complex] = complex(archive["s"][0]) if "s" in archive else None
    if s is not None:
        values = reconstruct_pressure(mesh, s, c, phi, lam, probes, allow_interior)
        rows = [
            TimeseriesRowDTO(
                t=0.0, probe=label, field="p_hat", re=value.real, im=value.imag
            )
            for label, value in zip(probes.labels, values)
        ]
    else:
        plan = CQPlan(
            rule=str(_archive_field(archive, "rule", densities)),
            dt=float(_archive_field(archive, "dt", densities)),
            n_steps=int(_archive_field(archive, "n_steps", densities)),
            eps_target=float(_archive_field(archive, "eps_target", densities)),
        )
        series = reconstruct_pressure_series(
            mesh, plan, c, phi, lam, probes, allow_interior
        )
        rows = series_rows(plan.times, series, probes.labels)
    target = write_timeseries(rows, output)
    click.echo(f"Wrote {len(rows)} rows to {target}")


@click.command("sweep")
@config_option
@mesh_option
@click.option("--sigma", type=click.FloatRange(min=0.0, min_open=True), default=1.0)
@click.option("--omega-max", type=float, default=100.0, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=8, show_default=True)
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False),
    default="sweep.csv",
    show_default=True,
)
@handle_errors
def sweep(config_path, mesh_path, sigma, omega_max, samples, output):
    """Solution norm against the stability bound along Re s = sigma."""
    config, mesh = load_inputs(config_path, mesh_path)
    omegas = np.geomspace(1.0, omega_max, samples) if samples > 1 else [1.0]
    rows = stability_sweep(config, mesh, [complex(sigma, w) for w in omegas])
    target = write_sweep(rows, output)
    worst = max(r.ratio for r in rows)
    click.echo(f"Wrote {len(rows)} rows to {target}; max ratio {worst:.3e}")
    if len(rows) > 1:
        click.echo(f"growth exponent of ||x|| / ||d||: {growth_exponent(rows):.3f}")
