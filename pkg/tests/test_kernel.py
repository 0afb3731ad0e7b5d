import numpy as np
import pytest

from piezoscatter.core.exceptions import ConfigError, SingularityError
from piezoscatter.service.kernel import (
    eval_kernel,
    kernel_value,
    smooth_value,
    verify_pde,
    wavenumber,
)

S = 1.0 + 2.0j


def test_coincident_points_raise():
    with pytest.raises(SingularityError):
        eval_kernel([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], S, 1.0)


def test_non_positive_real_part_rejected():
    with pytest.raises(ConfigError):
        eval_kernel([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1j, 1.0)


def test_value_matches_closed_form():
    x, y = np.array([1.0, 2.0, 2.0]), np.zeros(3)
    kappa = wavenumber(S, 2.0)
    expected = np.exp(-kappa * 3.0) / (4.0 * np.pi * 3.0)
    assert eval_kernel(x, y, S, 2.0).value == pytest.approx(expected, rel=1e-14)


def test_symmetry(rng):
    for _ in range(10):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        forward = eval_kernel(x, y, S, 1.5)
        backward = eval_kernel(y, x, S, 1.5)
        assert forward.value == backward.value
        np.testing.assert_allclose(forward.grad_y, -backward.grad_y, rtol=1e-14)


def test_gradient_by_finite_differences():
    x, y = np.array([0.3, -0.2, 0.9]), np.array([0.1, 0.4, -0.3])
    h = 1e-6
    grad = eval_kernel(x, y, S, 1.0).grad_y
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        fd = (
            eval_kernel(x, y + step, S, 1.0).value
            - eval_kernel(x, y - step, S, 1.0).value
        ) / (2 * h)
        assert abs(fd - grad[axis]) < 1e-7


def test_decay_for_real_parameter():
    r = np.linspace(0.5, 5.0, 20)
    values = kernel_value(r, wavenumber(2.0, 1.0))
    assert np.all(values.real > 0)
    assert np.all(np.diff(values.real) < 0)


def test_pde_residual_second_order():
    grid = np.array([[1.0, 0.5, 0.0], [0.0, 1.5, 1.0], [-1.0, -1.0, 1.0]])
    coarse = verify_pde(grid, np.zeros(3), S, 1.0, 0.02)
    fine = verify_pde(grid, np.zeros(3), S, 1.0, 0.01)
    assert np.log2(coarse / fine) == pytest.approx(2.0, abs=0.3)


def test_smooth_remainder():
    kappa = wavenumber(S, 1.0)
    r = np.array([0.0, 1e-3, 0.5, 2.0])
    values = smooth_value(r, kappa)
    assert values[0] == -kappa / (4.0 * np.pi)
    np.testing.assert_allclose(
        values[1:] + 1.0 / (4.0 * np.pi * r[1:]), kernel_value(r[1:], kappa)
    )
    assert abs(values[1] - values[0]) < 1e-2
