"""
Manufactured solutions for the coupled system.

Interior fields are quadratic polynomials, the exterior pressure a
decaying spherical wave centred inside the solid. The loads are the weak
forms of the coupled rows applied to the exact fields, so the discrete
solution converges to them at the rate of the P1 interpolation.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.service.constitutive import (
    StateAtPoint,
    electric_displacement,
    entropy_density,
    stress,
)
from piezoscatter.service.coupled_solver import assemble_system, solve
from piezoscatter.service.quadrature import triangle_rule

logger = logging.getLogger(__name__)

# Degree-2 rule on the tetrahedron: barycentric points, equal weights
TET_A, TET_B = 0.5854101966249685, 0.1381966011250105
TET_BARY = np.full((4, 4), TET_B) + (TET_A - TET_B) * np.eye(4)


@dataclass(frozen=True)
class Quadratic:
    """c + L xi + xi^T H xi / 2 per component, with xi = x - center."""

    center: np.ndarray
    constant: np.ndarray
    linear: np.ndarray
    hessian: np.ndarray

    def value(self, x) -> np.ndarray:
        """Shape (..., components)."""
        xi = np.asarray(x) - self.center
        linear = np.einsum("cj,...j->...c", self.linear, xi)
        quadratic = 0.5 * np.einsum("...j,cjk,...k->...c", xi, self.hessian, xi)
        return self.constant + linear + quadratic

    def gradient(self, x) -> np.ndarray:
        """Shape (..., components, 3)."""
        xi = np.asarray(x) - self.center
        return self.linear + np.einsum("cjk,...k->...cj", self.hessian, xi)

    @classmethod
    def random(cls, rng, center, components: int, scale: float = 1.0) -> "Quadratic":
        hessian = rng.standard_normal((components, 3, 3))
        return cls(
            center=np.asarray(center, dtype=float),
            constant=scale * rng.standard_normal(components),
            linear=scale * rng.standard_normal((components, 3)),
            hessian=0.5 * scale * (hessian + np.swapaxes(hessian, 1, 2)),
        )


@dataclass(frozen=True)
class SphericalWave:
    """amplitude exp(-kappa r) / r about ``center`` with kappa = s / c."""

    center: np.ndarray
    amplitude: float
    kappa: complex

    def value(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x) - self.center, axis=-1)
        return self.amplitude * np.exp(-self.kappa * r) / r

    def gradient(self, x) -> np.ndarray:
        diff = np.asarray(x) - self.center
        r = np.linalg.norm(diff, axis=-1)
        radial = -self.value(x) * (self.kappa * r + 1.0) / r
        return (radial / r)[..., None] * diff


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact interior fields and exterior pressure."""

    u: Quadratic
    theta: Quadratic
    phi: Quadratic
    pressure: SphericalWave

    @classmethod
    def random(
        cls, mesh: CoupledMesh, s, c: float, seed: int = 0
    ) -> "ManufacturedSolution":
        rng = np.random.default_rng(seed)
        center = mesh.center
        s = LaplaceParameter.of(s)
        return cls(
            u=Quadratic.random(rng, center, 3),
            theta=Quadratic.random(rng, center, 1),
            phi=Quadratic.random(rng, center, 1),
            pressure=SphericalWave(
                center=np.asarray(center), amplitude=1.0, kappa=s.s / c
            ),
        )

    def state(self, x) -> StateAtPoint:
        return StateAtPoint.from_gradients(
            self.u.gradient(x),
            self.theta.value(x)[..., 0],
            self.phi.gradient(x)[..., 0, :],
        )


def _volume_points(mesh: CoupledMesh):
    """Quadrature points (M, 4, 3), weights (M, 4) and shape values (4, 4)."""
    points = np.einsum("qa,mai->mqi", TET_BARY, mesh.vertices[mesh.tets])
    weights = np.repeat(mesh.tet_volumes[:, None] / 4.0, 4, axis=1)
    return points, weights, TET_BARY


def manufactured_loads(
    mesh: CoupledMesh, mat: MaterialParams, s, exact: ManufacturedSolution
) -> Dict[str, np.ndarray]:
    """Weak forms of every coupled row applied to the exact fields."""
    s = LaplaceParameter.of(s).s
    n = mesh.n_vertices
    tets = mesh.tets
    g = mesh.tet_gradients
    points, weights, shape = _volume_points(mesh)
    state = exact.state(points)

    sigma = stress(state, mat)
    u_values = exact.u.value(points)
    local_u = np.einsum("mq,mqij,maj->mai", weights, sigma, g) + (
        mat.rho_e * s * s
    ) * np.einsum("mq,mqi,qa->mai", weights, u_values, shape)
    load_u = np.zeros(3 * n, dtype=complex)
    np.add.at(load_u, (3 * tets[:, :, None] + np.arange(3)).ravel(), local_u.ravel())

    eta = entropy_density(state, mat)
    grad_theta = exact.theta.gradient(points)[..., 0, :]
    local_theta = s * np.einsum("mq,mq,qa->ma", weights, eta, shape) + np.einsum(
        "mq,mqj,maj->ma", weights, grad_theta, g
    ) / mat.T0
    load_theta = np.zeros(n, dtype=complex)
    np.add.at(load_theta, tets.ravel(), local_theta.ravel())

    flux = electric_displacement(state, mat)
    local_phi = -np.einsum("mq,mqj,maj->ma", weights, flux, g)
    load_phi = np.zeros(n, dtype=complex)
    np.add.at(load_phi, tets.ravel(), local_phi.ravel())
    mean = np.sum(weights * exact.phi.value(points)[..., 0])

    rule = triangle_rule(6)
    bary = rule.points_x
    face_points = np.einsum("qa,kai->kqi", bary, mesh.tri_points)
    face_weights = rule.weights[None, :] * 2.0 * mesh.tri_areas[:, None]
    normals = mesh.tri_normals
    p_values = exact.pressure.value(face_points)
    p_flux = np.einsum("kqi,ki->kq", exact.pressure.gradient(face_points), normals)
    u_normal = np.einsum("kqi,ki->kq", exact.u.value(face_points), normals)

    local_trace = np.einsum("kq,kq,qa,ki->kai", face_weights, p_values, bary, normals)
    np.add.at(
        load_u,
        (3 * mesh.boundary_tris[:, :, None] + np.arange(3)).ravel(),
        local_trace.ravel(),
    )
    local_gamma = np.einsum(
        "kq,kq,qa->ka", face_weights, -s * s * u_normal - p_flux / mat.rho_f, bary
    )
    load_gamma = np.zeros(len(mesh.boundary_vertices), dtype=complex)
    np.add.at(load_gamma, mesh.tris_local.ravel(), local_gamma.ravel())

    return {
        "u": load_u,
        "theta": load_theta,
        "phi": load_phi,
        "multiplier": np.array([mean], dtype=complex),
        "phi_gamma": load_gamma,
        "lambda": np.zeros(mesh.n_tris, dtype=complex),
    }


@dataclass(frozen=True)
class ManufacturedErrors:
    """H^1 errors of the interior fields and the mesh size."""

    h: float
    u: float
    theta: float
    phi: float

    @property
    def total(self) -> float:
        return float(np.sqrt(self.u**2 + self.theta**2 + self.phi**2))


def _h1_error(mesh: CoupledMesh, coefficients, exact: Quadratic, components: int):
    points, weights, shape = _volume_points(mesh)
    nodal = np.asarray(coefficients).reshape(mesh.n_vertices, components)[mesh.tets]
    values = np.einsum("mac,qa->mqc", nodal, shape)
    gradients = np.einsum("mac,maj->mcj", nodal, mesh.tet_gradients)[:, None]
    value_error = np.abs(values - exact.value(points)) ** 2
    gradient_error = np.abs(gradients - exact.gradient(points)) ** 2
    total = np.einsum("mq,mqc->", weights, value_error) + np.einsum(
        "mq,mqcj->", weights, gradient_error
    )
    return float(np.sqrt(total))


def manufactured_errors(
    mesh: CoupledMesh, mat: MaterialParams, s, seed: int = 0
) -> ManufacturedErrors:
    """Solve with manufactured loads and measure the interior H^1 errors."""
    exact = ManufacturedSolution.random(mesh, s, mat.sound_c, seed)
    loads = manufactured_loads(mesh, mat, s, exact)
    system = assemble_system(mesh, mat, s, loads)
    fields = solve(system, method="lu").fields
    errors = ManufacturedErrors(
        h=mesh.h_max,
        u=_h1_error(mesh, fields["u"], exact.u, 3),
        theta=_h1_error(mesh, fields["theta"], exact.theta, 1),
        phi=_h1_error(mesh, fields["phi"], exact.phi, 1),
    )
    logger.info(
        f"Manufactured solution on h = {errors.h:.3g}: H1 error {errors.total:.3e}"
    )
    return errors
