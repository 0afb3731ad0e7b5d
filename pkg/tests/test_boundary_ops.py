import numpy as np
import pytest

from piezoscatter.core.exceptions import DimensionError, ProbeError
from piezoscatter.service.boundary_ops import (
    assemble_operators,
    calderon_residual,
    evaluate_potentials,
    jump_refinement,
    smooth_cauchy_data,
    trace_jumps,
    trace_spaces,
)
from piezoscatter.service.kernel import kernel_radial, kernel_value
from piezoscatter.service.sphere import elastic_sphere_monopole, sphere_oracle


@pytest.fixture(scope="module")
def sphere_ops(icosphere1):
    return assemble_operators(icosphere1, 1.0, 1.0)


def test_trace_spaces(icosphere1):
    spaces = trace_spaces(icosphere1)
    assert spaces.n_dirichlet == 42
    assert spaces.n_neumann == 80
    spaces.check()
    area = spaces.neumann_mass.sum()
    assert area == pytest.approx(spaces.dirichlet_mass.sum())
    assert area < 4.0 * np.pi
    assert spaces.mixed_mass.sum() == pytest.approx(area)


def test_trace_spaces_are_shared(icosphere1):
    assert trace_spaces(icosphere1) is trace_spaces(icosphere1)


def test_operator_shapes(sphere_ops):
    assert sphere_ops.V.shape == (80, 80)
    assert sphere_ops.K.shape == (80, 42)
    assert sphere_ops.W.shape == (42, 42)


def test_symmetry(sphere_ops):
    v_defect, w_defect = sphere_ops.symmetry_defects()
    assert v_defect < 1e-8
    assert w_defect < 1e-8
    assert sphere_ops.adjoint_defect() < 0.05


def test_single_layer_degree_zero(sphere_ops):
    ones = np.ones(sphere_ops.spaces.n_neumann)
    area = sphere_ops.spaces.neumann_mass.sum()
    rayleigh = np.real(ones @ sphere_ops.V @ ones) / area
    exact = sphere_oracle(0, 1.0, 1.0).V.real
    assert rayleigh == pytest.approx(exact, rel=0.1)


def test_single_layer_is_positive(icosphere1, rng):
    ops = assemble_operators(icosphere1, 2.0 + 3.0j, 1.0)
    for _ in range(5):
        lam = rng.standard_normal(80) + 1j * rng.standard_normal(80)
        assert np.real(np.conj(2.0 + 3.0j) * np.vdot(lam, ops.V @ lam)) > 0


def _point_source_traces(mesh, kappa):
    boundary = mesh.vertices[mesh.boundary_vertices]
    phi = kernel_value(np.linalg.norm(boundary, axis=1), kappa)
    x = mesh.tri_centroids
    r = np.linalg.norm(x, axis=1)
    lam = -kernel_radial(r, kappa) * np.einsum("ki,ki->k", x, mesh.tri_normals)
    return phi, lam


def test_kirchhoff_representation(icosphere1):
    phi, lam = _point_source_traces(icosphere1, 1.0)
    points = np.array([[3.0, 0.0, 0.0], [0.0, -2.0, 2.0]])
    values = evaluate_potentials(icosphere1, phi, lam, 1.0, 1.0, points)
    exact = kernel_value(np.linalg.norm(points, axis=1), 1.0)
    np.testing.assert_allclose(values, exact, rtol=0.1)


def test_potential_argument_checks(icosphere1):
    phi, lam = np.zeros(42), np.zeros(80)
    with pytest.raises(DimensionError):
        evaluate_potentials(icosphere1, phi[:-1], lam, 1.0, 1.0, [[3.0, 0, 0]])
    with pytest.raises(ProbeError):
        vertex = icosphere1.vertices[icosphere1.boundary_vertices[0]]
        evaluate_potentials(icosphere1, phi, lam, 1.0, 1.0, vertex[None])


def test_calderon_residual_of_zero_data(sphere_ops):
    zero = (np.zeros(42), np.zeros(80))
    assert calderon_residual(sphere_ops, data=zero) == 0.0


@pytest.mark.slow
def test_calderon_residual_decreases(icosphere1, icosphere2):
    coarse = calderon_residual(assemble_operators(icosphere1, 1.0, 1.0))
    fine = calderon_residual(assemble_operators(icosphere2, 1.0, 1.0))
    assert coarse < 0.1
    assert coarse >= 2.0 * fine


@pytest.mark.slow
def test_single_layer_degree_zero_refined(icosphere2):
    ops = assemble_operators(icosphere2, 1.0, 1.0)
    ones = np.ones(ops.spaces.n_neumann)
    rayleigh = np.real(ones @ ops.V @ ones) / ops.spaces.neumann_mass.sum()
    assert rayleigh == pytest.approx((1.0 - np.exp(-2.0)) / 2.0, rel=0.03)


@pytest.mark.slow
def test_trace_jumps(icosphere2, rng):
    phi, lam = smooth_cauchy_data(icosphere2, rng)
    faces = np.arange(0, icosphere2.n_tris, 16)
    delta = 0.05 * icosphere2.h_max
    jumps = trace_jumps(icosphere2, phi, lam, 1.0 + 1.0j, 1.0, delta, faces=faces)
    assert jumps.dirichlet < 0.1
    assert jumps.neumann < 0.2


@pytest.mark.slow
def test_jump_errors_decrease_under_refinement(icosphere1, icosphere2):
    refinement = jump_refinement([icosphere1, icosphere2], 1.0 + 1.0j, 1.0)
    assert refinement.h[1] < refinement.h[0]
    assert refinement.order("dirichlet") >= 0.5
    assert refinement.order("neumann") >= 0.5


def test_jump_order_needs_two_meshes(icosphere1):
    refinement = jump_refinement([icosphere1], 1.0 + 1.0j, 1.0, n_faces=4)
    assert len(refinement.errors) == 1
    with pytest.raises(DimensionError):
        refinement.order("dirichlet")


@pytest.mark.parametrize("n", range(6))
def test_sphere_calderon_identity(n):
    modes = sphere_oracle(n, 1.0 + 1.0j, 1.0)
    assert modes.calderon_defect() < 1e-10 * max(1.0, abs(modes.V * modes.W))
    assert modes.K == modes.Kp


def test_sphere_static_limit():
    assert sphere_oracle(0, 1e-4, 1.0).V.real == pytest.approx(1.0, rel=1e-3)
    assert sphere_oracle(3, 1e-4, 1.0, radius=2.0).V.real == pytest.approx(
        2.0 / 7.0, rel=1e-3
    )


def test_sphere_negative_degree():
    with pytest.raises(DimensionError):
        sphere_oracle(-1, 1.0, 1.0)


def test_monopole_oracle(sample_material):
    mat = sample_material.decoupled()
    oracle = elastic_sphere_monopole(mat, 1.0 + 1.0j)
    assert oracle.kappa == 1.0 + 1.0j
    assert np.isfinite(oracle.A) and np.isfinite(oracle.B)
    r = np.array([1.5, 3.0])
    assert np.all(np.abs(oracle.scattered_pressure(r)) > 0)
