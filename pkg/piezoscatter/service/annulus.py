"""Truncated spherical annulus used as a surrogate for the unbounded exterior."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.service.boundary_ops import PotentialMatrices, potential_matrices
from piezoscatter.service.quadrature import gauss_points

logger = logging.getLogger(__name__)

INNER_FACTOR = 1.25


@dataclass(frozen=True, eq=False)
class Annulus:
    """
    Tensor Gauss rule on {inner <= |x - center| <= outer}.

    Radial and polar directions use Gauss-Legendre points, the azimuth the
    periodic trapezoidal rule.
    """

    center: np.ndarray
    inner: float
    outer: float
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def around(
        cls,
        mesh: CoupledMesh,
        factor: float = 2.0,
        n_radial: int = 3,
        n_polar: int = 6,
        n_azimuth: int = 10,
    ) -> "Annulus":
        """
        Annulus between 1.25 and ``factor`` times the circumradius of the mesh.

        Raises:
            DimensionError: If ``factor`` does not exceed the inner factor
        """
        if factor <= INNER_FACTOR:
            raise DimensionError(
                f"annulus factor must exceed {INNER_FACTOR}, got {factor}"
            )
        radius = mesh.circumradius
        inner, outer = INNER_FACTOR * radius, factor * radius
        xr, wr = gauss_points(n_radial)
        r = inner + (outer - inner) * xr
        wr = (outer - inner) * wr * r**2
        xm, wm = gauss_points(n_polar)
        cos_t = 2.0 * xm - 1.0
        wm = 2.0 * wm
        phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        wp = np.full(n_azimuth, 2.0 * np.pi / n_azimuth)

        R, C, P = np.meshgrid(r, cos_t, phi, indexing="ij")
        S = np.sqrt(1.0 - C**2)
        directions = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1)
        points = mesh.center + R[..., None] * directions
        weights = wr[:, None, None] * wm[None, :, None] * wp[None, None, :]
        return cls(
            center=np.asarray(mesh.center),
            inner=inner,
            outer=outer,
            points=points.reshape(-1, 3),
            weights=weights.ravel(),
        )

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def potentials(
        self, mesh: CoupledMesh, s, c: float, quad_order: Optional[int] = None
    ) -> PotentialMatrices:
        """Layer potentials and their gradients at the annulus points."""
        return potential_matrices(
            mesh, s, c, self.points, gradient=True, quad_order=quad_order
        )

    def energy(self, values, gradients, parameter: float, c: float) -> float:
        """||grad p||^2 + (parameter / c)^2 ||p||^2 over the annulus."""
        values = np.asarray(values)
        gradients = np.asarray(gradients)
        if values.shape != self.weights.shape or gradients.shape != (
            len(self.weights),
            3,
        ):
            raise DimensionError("annulus field does not match the quadrature points")
        grad2 = np.sum(np.abs(gradients) ** 2, axis=-1)
        value2 = np.abs(values) ** 2
        return float(self.weights @ (grad2 + (parameter / c) ** 2 * value2))


@dataclass(frozen=True, eq=False)
class ExteriorField:
    """Exterior pressure and its gradient sampled on an annulus."""

    annulus: Annulus
    values: np.ndarray
    gradients: np.ndarray

    def energy(self, s, c: float) -> float:
        """Squared exterior energy norm at parameter |s|."""
        return self.annulus.energy(
            self.values, self.gradients, LaplaceParameter.of(s).modulus, c
        )

    def energy_unit(self, c: float) -> float:
        """Squared exterior energy norm at parameter 1."""
        return self.annulus.energy(self.values, self.gradients, 1.0, c)


def exterior_field(
    annulus: Annulus, matrices: PotentialMatrices, phi, lam
) -> ExteriorField:
    """Sample D phi - S lambda and its gradient on the annulus."""
    return ExteriorField(
        annulus=annulus,
        values=matrices.apply(phi, lam),
        gradients=matrices.apply_gradient(phi, lam),
    )
