import numpy as np
import pytest

from piezoscatter.core.exceptions import DimensionError, ProbeError
from piezoscatter.dto.config import ProbeDTO
from piezoscatter.service.constitutive import StateAtPoint, stress
from piezoscatter.service.cq_time import CQPlan
from piezoscatter.service.field_eval import (
    ProbeSet,
    derived_fields,
    reconstruct_pressure,
    reconstruct_pressure_series,
)

S = 1.0 + 1.0j


def _probes(*items):
    return [ProbeDTO(label=label, point=point, tag=tag) for label, point, tag in items]


@pytest.fixture
def probe_set(unit_cube):
    return ProbeSet.build(
        unit_cube,
        _probes(
            ("core", [0.5, 0.5, 0.5], "interior"),
            ("above", [0.5, 0.5, 2.0], "exterior"),
            ("side", [-1.0, 0.5, 0.5], "exterior"),
        ),
    )


def test_probe_set(probe_set):
    assert len(probe_set) == 3
    assert probe_set.min_distance == pytest.approx(0.5)
    exterior = probe_set.select("exterior")
    assert exterior.labels == ["above", "side"]
    assert exterior.points.shape == (2, 3)
    assert len(probe_set.select("interior")) == 1


def test_empty_probe_set(unit_cube):
    probes = ProbeSet.build(unit_cube, [])
    assert len(probes) == 0
    assert probes.points.shape == (0, 3)
    assert reconstruct_pressure(unit_cube, S, 1.0, None, None, probes).shape == (0,)


def test_wrong_tag(unit_cube):
    with pytest.raises(ProbeError, match="tagged"):
        ProbeSet.build(unit_cube, _probes(("x", [0.5, 0.5, 0.5], "exterior")))


def test_probe_on_boundary(unit_cube):
    with pytest.raises(ProbeError, match="from the boundary"):
        ProbeSet.build(unit_cube, _probes(("x", [0.5, 0.5, 1.0 + 1e-5], "exterior")))


def test_reconstruction_is_linear(unit_cube, probe_set, rng):
    exterior = probe_set.select("exterior")
    phi = rng.standard_normal(len(unit_cube.boundary_vertices))
    lam = rng.standard_normal(unit_cube.n_tris)
    p = reconstruct_pressure(unit_cube, S, 1.0, phi, lam, exterior)
    assert p.shape == (2,)
    np.testing.assert_allclose(
        reconstruct_pressure(unit_cube, S, 1.0, 2 * phi, 2 * lam, exterior), 2 * p
    )
    zero = reconstruct_pressure(unit_cube, S, 1.0, 0 * phi, 0 * lam, exterior)
    np.testing.assert_allclose(zero, 0.0, atol=1e-15)


def test_reconstruction_rejects_interior(unit_cube, probe_set):
    phi = np.zeros(len(unit_cube.boundary_vertices))
    lam = np.zeros(unit_cube.n_tris)
    with pytest.raises(ProbeError):
        reconstruct_pressure(unit_cube, S, 1.0, phi, lam, probe_set)
    values = reconstruct_pressure(
        unit_cube, S, 1.0, phi, lam, probe_set, allow_interior=True
    )
    assert values.shape == (3,)


def test_pressure_series(unit_cube, probe_set, rng):
    plan = CQPlan("bdf2", 0.2, 10)
    exterior = probe_set.select("exterior")
    n_d = len(unit_cube.boundary_vertices)
    profile = plan.times**2
    phi = profile[:, None] * rng.standard_normal(n_d)
    lam = profile[:, None] * rng.standard_normal(unit_cube.n_tris)
    series = reconstruct_pressure_series(unit_cube, plan, 1.0, phi, lam, exterior)
    assert series.shape == (11, 2)
    assert np.abs(series[0]).max() < 1e-8
    with pytest.raises(DimensionError):
        reconstruct_pressure_series(unit_cube, plan, 1.0, phi[:, 1:], lam, exterior)


def test_derived_fields_of_affine_state(cube2, sample_material):
    gradient = np.array([[0.1, 0.2, 0.0], [0.0, -0.1, 0.3], [0.05, 0.0, 0.2]])
    field = np.array([0.4, -0.2, 0.1])
    x = cube2.vertices
    u = (x @ gradient.T).ravel()
    theta = np.full(cube2.n_vertices, 0.3)
    phi = x @ field
    out = derived_fields(cube2, sample_material, u, theta, phi)
    assert out.stress.shape == (cube2.n_tets, 3, 3)
    assert out.displacement.shape == (cube2.n_tets, 3)
    assert out.entropy.shape == (cube2.n_tets,)
    state = StateAtPoint.from_gradients(gradient, 0.3, field)
    expected = stress(state, sample_material)
    np.testing.assert_allclose(
        out.stress, np.broadcast_to(expected, out.stress.shape), atol=1e-12
    )
    np.testing.assert_allclose(out.centroids, cube2.tet_centroids)


def test_derived_fields_shapes(cube2, sample_material):
    n = cube2.n_vertices
    with pytest.raises(DimensionError):
        derived_fields(cube2, sample_material, np.zeros(n), np.zeros(n), np.zeros(n))
