import numpy as np
import pytest

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.service.annulus import INNER_FACTOR, Annulus, exterior_field
from piezoscatter.service.boundary_ops import assemble_operators, trace_spaces
from piezoscatter.service.norms import (
    check_norm_equivalences,
    energy_norm_phi,
    energy_norm_theta,
    energy_norm_u,
    energy_norms,
    h_half_norm,
    h_minus_half_norm,
    korn_ratio_bounds,
    phi_l2_norm,
)


def _random(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_translation_has_kinetic_energy_only(unit_cube, sample_material):
    u = np.tile([1.0, 0.0, 0.0], unit_cube.n_vertices)
    assert energy_norm_u(unit_cube, u, sample_material, 1.0) == pytest.approx(1.0)
    assert energy_norm_u(unit_cube, u, sample_material, 3.0 + 4.0j) == pytest.approx(
        5.0
    )


def test_theta_and_phi_norms(unit_cube, sample_material):
    ones = np.ones(unit_cube.n_vertices)
    assert energy_norm_theta(unit_cube, ones, sample_material, 4.0) == pytest.approx(
        2.0
    )
    assert energy_norm_phi(unit_cube, ones) == pytest.approx(0.0, abs=1e-12)
    assert phi_l2_norm(unit_cube, ones) == pytest.approx(1.0)
    x = unit_cube.vertices[:, 0]
    assert energy_norm_phi(unit_cube, x) == pytest.approx(1.0)


def test_wrong_length(unit_cube, sample_material):
    with pytest.raises(DimensionError):
        energy_norm_u(unit_cube, np.zeros(5), sample_material, 1.0)


def test_homogeneity(cube2, sample_material, rng):
    n = cube2.n_vertices
    u, theta, phi = _random(rng, 3 * n), _random(rng, n), _random(rng, n)
    s = 2.0 + 1.0j
    base = energy_norms(cube2, sample_material, s, u, theta, phi)
    scaled = energy_norms(cube2, sample_material, s, 3 * u, 3 * theta, 3 * phi)
    assert scaled.u_norm == pytest.approx(3 * base.u_norm, rel=1e-12)
    assert scaled.theta_norm == pytest.approx(3 * base.theta_norm, rel=1e-12)
    assert scaled.phi_norm == pytest.approx(3 * base.phi_norm, rel=1e-12)
    assert base.unit is not None and base.unit.unit is None
    assert base.p_norm is None


@pytest.mark.parametrize("s", [0.5, 0.5 + 3.0j, 2.0 + 10.0j])
def test_norm_equivalences(cube2, sample_material, rng, s):
    n = cube2.n_vertices
    slacks = check_norm_equivalences(
        cube2, sample_material, s, _random(rng, 3 * n), _random(rng, n)
    )
    assert [sl.name for sl in slacks] == ["u", "theta"]
    assert min(sl.worst for sl in slacks) >= -1e-12


def test_norm_equivalences_with_exterior(unit_cube, sample_material, rng):
    s = 0.5 + 3.0j
    annulus = Annulus.around(unit_cube)
    matrices = annulus.potentials(unit_cube, s, sample_material.sound_c)
    spaces = trace_spaces(unit_cube)
    phi, lam = _random(rng, spaces.n_dirichlet), _random(rng, spaces.n_neumann)
    field = exterior_field(annulus, matrices, phi, lam)
    n = unit_cube.n_vertices
    slacks = check_norm_equivalences(
        unit_cube, sample_material, s, _random(rng, 3 * n), _random(rng, n), field
    )
    assert slacks[-1].name == "p"
    assert slacks[-1].worst >= -1e-12


def test_annulus_volume(unit_cube):
    annulus = Annulus.around(unit_cube, factor=2.0)
    radius = unit_cube.circumradius
    expected = 4.0 / 3.0 * np.pi * radius**3 * (2.0**3 - INNER_FACTOR**3)
    assert annulus.volume == pytest.approx(expected, rel=1e-12)
    assert np.all(np.linalg.norm(annulus.points - unit_cube.center, axis=1) > radius)


def test_annulus_factor_must_exceed_inner(unit_cube):
    with pytest.raises(DimensionError):
        Annulus.around(unit_cube, factor=INNER_FACTOR)


def test_annulus_energy_shape_check(unit_cube):
    annulus = Annulus.around(unit_cube)
    with pytest.raises(DimensionError):
        annulus.energy(np.zeros(3), np.zeros((3, 3)), 1.0, 1.0)


def test_korn_bounds(unit_cube, sample_material):
    low, high = korn_ratio_bounds(unit_cube, sample_material)
    assert 0.0 < low <= high < np.inf


def test_trace_norms(unit_cube):
    ones = np.ones(len(unit_cube.boundary_vertices))
    assert h_half_norm(unit_cube, ones) == pytest.approx(np.sqrt(6.0), rel=1e-10)
    unit_ops = assemble_operators(unit_cube, 1.0, 1.0)
    assert h_minus_half_norm(unit_ops, np.ones(unit_cube.n_tris)) > 0.0


# Degree-2 tetrahedron rule in barycentric coordinates
_A, _B = 0.5854101966249685, 0.1381966011250105
TET_POINTS = np.full((4, 4), _B) + (_A - _B) * np.eye(4)


def _cells(mesh):
    for tet in mesh.tets:
        matrix = np.column_stack([np.ones(4), mesh.vertices[tet]])
        vol = abs(np.linalg.det(matrix)) / 6.0
        yield tet, vol, np.linalg.inv(matrix)[1:].T


def _elementwise_norm_u(mesh, u, mat, s):
    u = u.reshape(-1, 3)
    total = 0.0
    for tet, vol, g in _cells(mesh):
        du = u[tet].T @ g
        eps = 0.5 * (du + du.T)
        total += vol * (
            mat.lame_lambda * abs(np.trace(eps)) ** 2
            + 2.0 * mat.lame_mu * np.sum(np.abs(eps) ** 2)
        )
        values = TET_POINTS @ u[tet]
        total += mat.rho_e * abs(s) ** 2 * vol / 4.0 * np.sum(np.abs(values) ** 2)
    return np.sqrt(total)


def _elementwise_norm_theta(mesh, theta, mat, s):
    total = 0.0
    for tet, vol, g in _cells(mesh):
        total += vol * np.sum(np.abs(theta[tet] @ g) ** 2)
        values = TET_POINTS @ theta[tet]
        total += abs(s) / mat.c_eps * vol / 4.0 * np.sum(np.abs(values) ** 2)
    return np.sqrt(total)


@pytest.mark.parametrize("s", [0.5, 1.0 + 1.0j, 2.0 + 10.0j])
def test_energy_norms_match_elementwise_quadrature(icosphere1, sample_material, rng, s):
    n = icosphere1.n_vertices
    for _ in range(5):
        u, theta = _random(rng, 3 * n), _random(rng, n)
        assert energy_norm_u(icosphere1, u, sample_material, s) == pytest.approx(
            _elementwise_norm_u(icosphere1, u, sample_material, s), rel=1e-12
        )
        assert energy_norm_theta(
            icosphere1, theta, sample_material, s
        ) == pytest.approx(
            _elementwise_norm_theta(icosphere1, theta, sample_material, s), rel=1e-12
        )
