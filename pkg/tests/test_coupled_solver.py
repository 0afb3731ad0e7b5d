from dataclasses import replace

import numpy as np
import pytest
from scipy.sparse import csr_matrix

from piezoscatter.core.exceptions import (
    ConvergenceError,
    DimensionError,
    ProbeError,
    SingularSystemError,
)
from piezoscatter.dto.common import ComplexDTO
from piezoscatter.dto.report import SweepRowDTO
from piezoscatter.service.coupled_solver import (
    FIELDS,
    apply_scaling,
    assemble_rhs,
    assemble_system,
    coercivity_probe,
    continuity_audit,
    default_probes,
    growth_exponent,
    interior_vanishing_check,
    solve,
    solve_problem,
    stability_bound,
    stability_sweep,
    trace_audit,
    uniqueness_check,
)
from piezoscatter.service.primitives import cube
from tests.conftest import make_material

S = 1.0 + 1.0j


@pytest.fixture(scope="module")
def system(cube2):
    return assemble_system(cube2, make_material(), S)


@pytest.fixture
def loaded(system, rng):
    rhs = rng.standard_normal(system.n_unknowns) + 1j * rng.standard_normal(
        system.n_unknowns
    )
    return system.with_rhs(rhs)


def test_block_layout(system, cube2):
    n_v = cube2.n_vertices
    assert system.sizes == (
        3 * n_v,
        n_v,
        n_v,
        1,
        len(cube2.boundary_vertices),
        cube2.n_tris,
    )
    assert list(system.offsets) == list(FIELDS)
    assert system.matrix.shape == (system.n_unknowns, system.n_unknowns)
    assert system.block("lambda", "lambda").shape == (cube2.n_tris, cube2.n_tris)
    assert system.block("theta", "lambda").nnz == 0


def test_split_and_join(system):
    x = system.join({"theta": np.ones(system.sizes[1])})
    parts = system.split(x)
    np.testing.assert_allclose(parts["theta"], 1.0)
    np.testing.assert_allclose(parts["u"], 0.0)
    with pytest.raises(DimensionError):
        system.split(np.zeros(3))
    with pytest.raises(DimensionError):
        system.join({"u": np.zeros(2)})
    with pytest.raises(DimensionError):
        system.with_rhs(np.zeros(2))


def test_lu_solve(loaded):
    solution = solve(loaded, method="lu")
    assert solution.diagnostics.method == "lu"
    assert solution.diagnostics.residual < 1e-10
    assert solution.diagnostics.solution_norm > 0.0


def test_gmres_matches_lu(loaded):
    direct = solve(loaded, method="lu").x
    iterative = solve(loaded, method="gmres", tol=1e-10, max_iter=2000)
    assert iterative.diagnostics.method == "gmres"
    assert np.linalg.norm(iterative.x - direct) < 1e-6 * np.linalg.norm(direct)


def test_gmres_stall_raises(loaded):
    with pytest.raises(ConvergenceError) as info:
        solve(loaded, method="gmres", tol=1e-30, max_iter=1)
    assert info.value.residual > info.value.tolerance
    assert info.value.s == pytest.approx(S)


def test_gmres_residual_is_on_the_scaled_system(loaded):
    solution = solve(loaded, method="gmres", tol=1e-10, max_iter=2000)
    scaled = apply_scaling(loaded)
    defect = np.linalg.norm(scaled.matrix @ solution.x - scaled.rhs)
    assert solution.diagnostics.residual == pytest.approx(
        defect / np.linalg.norm(scaled.rhs)
    )
    assert solution.diagnostics.residual <= 1e-10


def test_unknown_method(loaded):
    with pytest.raises(DimensionError):
        solve(loaded, method="cholesky")


def test_scaling_keeps_solution(loaded):
    scaled = apply_scaling(loaded)
    assert apply_scaling(scaled) is scaled
    np.testing.assert_allclose(scaled.rhs, scaled.row_scale * loaded.rhs)
    x = solve(scaled, method="lu").x
    np.testing.assert_allclose(x, solve(loaded, method="lu").x, rtol=1e-8)
    rescaled = scaled.with_rhs(loaded.rhs)
    np.testing.assert_allclose(rescaled.rhs, scaled.rhs)


def test_singular_system(system):
    broken = replace(system, matrix=0 * system.matrix)
    broken = broken.with_rhs(np.ones(system.n_unknowns))
    with pytest.raises(SingularSystemError):
        solve(broken, method="lu")


def test_zero_data_gives_zero(system):
    report = uniqueness_check(system)
    assert report.zero_rhs_norm == 0.0
    assert report.min_singular > 0.0


def test_rhs_blocks(unit_cube, sample_config):
    loads = assemble_rhs(sample_config, unit_cube, S)
    assert list(loads) == list(FIELDS)
    np.testing.assert_allclose(loads["lambda"], 0.0)
    np.testing.assert_allclose(loads["theta"], 0.0)
    assert np.abs(loads["phi_gamma"]).max() > 0.0


def test_solve_problem(unit_cube, sample_config):
    solution = solve_problem(sample_config, unit_cube, S)
    assert solution.diagnostics.residual < 1e-8
    report = solution.to_dto()
    assert report.s.to_complex() == S
    assert report.block_sizes == list(solution.system.sizes)
    pressure = solution.pressure(np.array([[0.5, 0.5, 3.0]]))
    assert pressure.shape == (1,)


def test_stability_bound():
    assert stability_bound(1.0) == pytest.approx(1.0)
    assert stability_bound(2.0) == pytest.approx(4.0)
    assert stability_bound(0.5) == pytest.approx(0.125 / (0.5 * 0.5**6))


def _row(s, gain):
    return SweepRowDTO(
        s=ComplexDTO.from_complex(s),
        solution_norm=gain,
        rhs_norm=1.0,
        bound=1.0,
        ratio=gain,
    )


def test_growth_exponent():
    rows = [_row(complex(1.0, w), abs(complex(1.0, w)) ** 2) for w in (0, 2, 4, 8)]
    assert growth_exponent(rows) == pytest.approx(2.0)
    with pytest.raises(DimensionError):
        growth_exponent(rows[:1])


def test_default_probes(cube2):
    with pytest.raises(ProbeError):
        default_probes(cube2)
    mesh = cube(4)
    interior, exterior = default_probes(mesh)
    assert len(interior) >= 1
    assert exterior.shape == (6, 3)
    assert not mesh.contains(exterior).any()


def test_vanishing_check_rejects_shallow_probes(unit_cube, sample_config):
    solution = solve_problem(sample_config, unit_cube, S)
    with pytest.raises(ProbeError):
        interior_vanishing_check(
            solution, np.array([[0.5, 0.5, 0.95]]), np.array([[0.5, 0.5, 3.0]])
        )


def test_continuity_and_trace_audits(cube2, sample_config):
    solution = solve_problem(sample_config, cube2, S)
    continuity = continuity_audit(solution.system, n_samples=5, seed=1)
    assert 0.0 < continuity.normalized < 1e3
    audit = trace_audit(solution)
    assert audit.phi_half > 0.0
    assert audit.lambda_minus_half > 0.0


def test_coercivity_ratio(system):
    report = coercivity_probe(system, n_samples=200, seed=3)
    assert report.min_ratio >= 1.0 - 1e-10
    assert report.n_samples == 200


@pytest.mark.slow
def test_coercivity_ratio_at_random_frequencies(cube2):
    mat = make_material()
    rng = np.random.default_rng(7)
    for s in rng.uniform(0.2, 3.0, 5) + 1j * rng.uniform(-6.0, 6.0, 5):
        system = assemble_system(cube2, mat, complex(s))
        report = coercivity_probe(system, n_samples=1000)
        assert report.min_ratio >= 1.0 - 1e-10, s


def _rescaled_block(system, row, col, factor):
    matrix = system.matrix.toarray()
    matrix[system.offsets[row], system.offsets[col]] *= factor
    return replace(system, matrix=csr_matrix(matrix))


def test_coercivity_detects_broken_trace_coupling(system):
    broken = _rescaled_block(system, "phi_gamma", "u", 50.0)
    assert coercivity_probe(broken, n_samples=200, seed=3).min_ratio < 1.0


def test_coercivity_detects_flipped_exterior_rows(system):
    broken = _rescaled_block(system, "phi_gamma", "phi_gamma", -1.0)
    broken = _rescaled_block(broken, "phi_gamma", "lambda", -1.0)
    assert coercivity_probe(broken, n_samples=200, seed=3).min_ratio < 1.0


def test_coercivity_with_heavy_heat_capacity_and_light_fluid(cube2):
    mat = make_material(c_eps=2.0, rho_f=0.25, pyro_p=[0.99, 0.0, 0.0])
    report = coercivity_probe(
        assemble_system(cube2, mat, 2.0 + 3.0j), n_samples=200, seed=5
    )
    assert report.c1 == pytest.approx((2.0 - 0.99) / 2.0)
    assert report.c2 == pytest.approx(0.01)
    assert report.min_ratio >= 1.0 - 1e-10


@pytest.mark.slow
def test_interior_pressure_vanishes_under_refinement(
    sample_config, icosphere1, icosphere2
):
    coarse = interior_vanishing_check(solve_problem(sample_config, icosphere1, S))
    fine = interior_vanishing_check(solve_problem(sample_config, icosphere2, S))
    assert coarse.ratio < 0.1
    assert fine.ratio < coarse.ratio


def test_stability_sweep(reference_tet, sample_config):
    rows = stability_sweep(sample_config, reference_tet, [S, 1.0 + 4.0j], workers=2)
    assert [r.s.to_complex() for r in rows] == [S, 1.0 + 4.0j]
    assert all(np.isfinite(r.ratio) and r.ratio > 0.0 for r in rows)
    assert rows[1].bound == pytest.approx(stability_bound(1.0 + 4.0j))
    single = stability_sweep(sample_config, reference_tet, [S])
    assert len(single) == 1
