"""Fundamental solution of -Laplace + (s/c)^2 and its derivatives."""

import logging
from dataclasses import dataclass

import numpy as np

from piezoscatter.core.exceptions import SingularityError
from piezoscatter.core.laplace import LaplaceParameter

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class KernelEval:
    """Kernel value and its gradient with respect to the source point."""

    value: complex
    grad_y: np.ndarray


def wavenumber(s, c: float) -> complex:
    return complex(LaplaceParameter.of(s).s) / c


def kernel_value(r: np.ndarray, kappa: complex) -> np.ndarray:
    """e^{-kappa r} / (4 pi r) for r > 0."""
    return np.exp(-kappa * r) / (FOUR_PI * r)


def kernel_radial(r: np.ndarray, kappa: complex) -> np.ndarray:
    """(1 + kappa r) e^{-kappa r} / (4 pi r^3), so grad_y E = radial * (x - y)."""
    return (1.0 + kappa * r) * np.exp(-kappa * r) / (FOUR_PI * r**3)


def eval_kernel(x, y, s, c: float) -> KernelEval:
    """
    Evaluate E(x, y) = e^{-s|x-y|/c} / (4 pi |x-y|) and its y-gradient.

    Raises:
        SingularityError: If x and y coincide
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        raise SingularityError(f"kernel evaluated at coincident points {x.tolist()}")
    kappa = wavenumber(s, c)
    value = complex(kernel_value(r, kappa))
    grad_y = kernel_radial(r, kappa) * diff
    return KernelEval(value=value, grad_y=grad_y)


def verify_pde(x_grid, y, s, c: float, h: float) -> float:
    """
    Max residual of the seven-point discrete -Laplace E + (s/c)^2 E over a grid.

    Args:
        x_grid: (P, 3) evaluation points, none closer than 2h to y
        y: source point
        s: Laplace parameter
        c: sound speed
        h: finite-difference step

    Returns:
        Largest absolute residual over the grid
    """
    points = np.atleast_2d(np.asarray(x_grid, dtype=float))
    y = np.asarray(y, dtype=float)
    kappa = wavenumber(s, c)

    def field(p):
        return kernel_value(np.linalg.norm(p - y, axis=-1), kappa)

    centre = field(points)
    laplacian = -6.0 * centre
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        laplacian = laplacian + field(points + step) + field(points - step)
    laplacian /= h * h
    residual = np.abs(-laplacian + kappa**2 * centre)
    return float(residual.max())


def smooth_value(r: np.ndarray, kappa: complex) -> np.ndarray:
    """Bounded remainder E - 1/(4 pi r) = expm1(-kappa r) / (4 pi r)."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0.0, r, 1.0)
    out = np.expm1(-kappa * safe) / (FOUR_PI * safe)
    return np.where(r > 0.0, out, -kappa / FOUR_PI)


def smooth_radial(r: np.ndarray, kappa: complex) -> np.ndarray:
    """
    Remainder of ``kernel_radial`` after removing the static 1/(4 pi r^3) part.

    Multiplied by (x - y) it stays bounded; the value at r = 0 is set to 0
    since every caller multiplies by a vanishing factor there.
    """
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0.0, r, 1.0)
    z = kappa * safe
    out = (np.expm1(-z) + z * np.exp(-z)) / (FOUR_PI * safe**3)
    return np.where(r > 0.0, out, 0.0)


def kernel_double_radial(r: np.ndarray, kappa: complex) -> np.ndarray:
    """
    e^{-kappa r} (kappa^2 r^2 + 3 kappa r + 3) / (4 pi r^5).

    grad_x of the source-normal derivative is
    ``kernel_radial * n_y - kernel_double_radial * ((x - y) . n_y) (x - y)``.
    """
    kr = kappa * r
    return np.exp(-kr) * (kr * kr + 3.0 * kr + 3.0) / (FOUR_PI * r**5)
