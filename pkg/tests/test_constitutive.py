import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.service.constitutive import (
    PiezoTensor,
    StateAtPoint,
    electric_displacement,
    entropy_density,
    stress,
    voigt_strain,
)
from tests.conftest import make_material

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
matrices = arrays(np.float64, (3, 3), elements=finite)
vectors = arrays(np.float64, (3,), elements=finite)
voigts = arrays(np.float64, (3, 6), elements=finite)


def _symmetric(m):
    return 0.5 * (m + m.T)


@settings(max_examples=100, deadline=None)
@given(voigts, matrices, vectors)
def test_piezo_adjoint(voigt, m, d):
    tensor = PiezoTensor(voigt)
    strain = _symmetric(m)
    left = d @ tensor.apply(strain)
    right = np.sum(strain * tensor.adjoint(d))
    assert left == pytest.approx(right, rel=1e-12, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(voigts)
def test_full_tensor_is_symmetric(voigt):
    full = PiezoTensor(voigt).full
    np.testing.assert_array_equal(full, full.transpose(0, 2, 1))


@settings(max_examples=50, deadline=None)
@given(matrices, matrices, finite, finite)
def test_stress_is_linear(grad_a, grad_b, alpha, beta):
    mat = make_material()
    state_a = StateAtPoint.from_gradients(grad_a, 0.5, grad_a[0])
    state_b = StateAtPoint.from_gradients(grad_b, -1.0, grad_b[1])
    combined = StateAtPoint.from_gradients(
        alpha * grad_a + beta * grad_b,
        alpha * 0.5 - beta,
        alpha * grad_a[0] + beta * grad_b[1],
    )
    expected = alpha * stress(state_a, mat) + beta * stress(state_b, mat)
    np.testing.assert_allclose(stress(combined, mat), expected, atol=1e-9)


def test_voigt_strain_engineering_shear():
    strain = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    np.testing.assert_array_equal(voigt_strain(strain), [1, 4, 6, 10, 6, 4])


def test_uniaxial_patch(sample_material):
    mat = sample_material.decoupled()
    grad_u = np.zeros((3, 3))
    grad_u[0, 0] = 1.0
    state = StateAtPoint.from_gradients(grad_u, 0.0, np.zeros(3))
    expected = mat.lame_lambda * np.eye(3)
    expected[0, 0] += 2.0 * mat.lame_mu
    np.testing.assert_allclose(stress(state, mat), expected)


def test_thermal_and_electric_terms(sample_material):
    mat = sample_material
    state = StateAtPoint(np.zeros((3, 3)), 2.0, np.array([1.0, 0.0, 0.0]))
    expected = -2.0 * mat.zeta * np.eye(3) - mat.piezo_e[0]
    np.testing.assert_allclose(stress(state, mat), expected)
    assert entropy_density(state, mat) == pytest.approx(
        2.0 * mat.heat_ratio + mat.pyro_p[0]
    )
    np.testing.assert_allclose(
        electric_displacement(state, mat),
        2.0 * mat.pyro_p + mat.dielectric_eps * np.array([1.0, 0.0, 0.0]),
    )


def test_batched_state(sample_material, rng):
    grads = rng.standard_normal((5, 4, 3, 3))
    state = StateAtPoint.from_gradients(grads, np.ones((5, 4)), grads[..., 0, :])
    assert stress(state, sample_material).shape == (5, 4, 3, 3)
    assert entropy_density(state, sample_material).shape == (5, 4)
    assert electric_displacement(state, sample_material).shape == (5, 4, 3)


def test_asymmetric_strain_rejected():
    strain = np.zeros((3, 3))
    strain[0, 1] = 1.0
    with pytest.raises(DimensionError):
        StateAtPoint(strain, 0.0, np.zeros(3))


def test_bad_voigt_shape():
    with pytest.raises(DimensionError):
        PiezoTensor(np.zeros((3, 3)))
