"""
Discrete energy norms of the interior and exterior fields and the
equivalences between the norms at parameter |s| and at parameter 1.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import identity, kron

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.service.annulus import ExteriorField
from piezoscatter.service.boundary_ops import BoundaryOperatorSet, trace_spaces
from piezoscatter.service.interior_fem import assemble_forms

logger = logging.getLogger(__name__)


def _quadratic(matrix, x: np.ndarray) -> float:
    value = np.real(np.vdot(x, matrix @ x))
    return float(max(value, 0.0))


def _field(values, length: int, name: str) -> np.ndarray:
    array = np.asarray(values)
    if array.shape != (length,):
        raise DimensionError(f"{name} must have shape ({length},), got {array.shape}")
    return array


def energy_norm_u(mesh: CoupledMesh, u, mat: MaterialParams, s) -> float:
    """
    sqrt((sigma_e(u), eps(u)) + rho_e |s|^2 ||u||^2).

    Args:
        mesh: Mesh carrying the interleaved P1 displacement ``u``
        u: Coefficients of length 3 N_v
        mat: Material constants
        s: Laplace parameter or a positive real parameter

    Raises:
        DimensionError: If ``u`` does not match the mesh
    """
    forms = assemble_forms(mesh)
    u = _field(u, 3 * mesh.n_vertices, "u")
    modulus = _modulus(s)
    stiffness = _quadratic(forms.elastic(mat), u)
    mass = _quadratic(forms.vector_mass, u)
    return float(np.sqrt(stiffness + mat.rho_e * modulus**2 * mass))


def energy_norm_theta(mesh: CoupledMesh, theta, mat: MaterialParams, s) -> float:
    """sqrt(||grad theta||^2 + c_eps^-1 |s| ||theta||^2)."""
    forms = assemble_forms(mesh)
    theta = _field(theta, mesh.n_vertices, "theta")
    gradient = _quadratic(forms.laplace, theta)
    mass = _quadratic(forms.mass, theta)
    return float(np.sqrt(gradient + _modulus(s) * mass / mat.c_eps))


def energy_norm_phi(mesh: CoupledMesh, phi) -> float:
    """Gradient seminorm of the zero-mean part of ``phi``."""
    forms = assemble_forms(mesh)
    phi = zero_mean(mesh, _field(phi, mesh.n_vertices, "phi"))
    return float(np.sqrt(_quadratic(forms.laplace, phi)))


def phi_l2_norm(mesh: CoupledMesh, phi) -> float:
    forms = assemble_forms(mesh)
    phi = _field(phi, mesh.n_vertices, "phi")
    return float(np.sqrt(_quadratic(forms.mass, phi)))


def zero_mean(mesh: CoupledMesh, phi: np.ndarray) -> np.ndarray:
    """Subtract the volume average."""
    forms = assemble_forms(mesh)
    return phi - (forms.mean @ phi) / mesh.volume


def _modulus(s) -> float:
    if isinstance(s, (int, float)) and s > 0:
        return float(s)
    return LaplaceParameter.of(s).modulus


@dataclass(frozen=True)
class EnergyNormReport:
    """Energy norms at parameter |s|; ``unit`` holds the same norms at 1."""

    u_norm: float
    theta_norm: float
    phi_norm: float
    phi_l2: float
    p_norm: Optional[float] = None
    unit: Optional["EnergyNormReport"] = None


def energy_norms(
    mesh: CoupledMesh,
    mat: MaterialParams,
    s,
    u,
    theta,
    phi,
    exterior: Optional[ExteriorField] = None,
) -> EnergyNormReport:
    """All four energy norms at |s| and at 1."""
    s = LaplaceParameter.of(s)

    def at(parameter) -> EnergyNormReport:
        p_norm = None
        if exterior is not None:
            p_norm = float(
                np.sqrt(
                    exterior.annulus.energy(
                        exterior.values, exterior.gradients, parameter, mat.sound_c
                    )
                )
            )
        return EnergyNormReport(
            u_norm=energy_norm_u(mesh, u, mat, parameter),
            theta_norm=energy_norm_theta(mesh, theta, mat, parameter),
            phi_norm=energy_norm_phi(mesh, phi),
            phi_l2=phi_l2_norm(mesh, phi),
            p_norm=p_norm,
        )

    return replace(at(s.modulus), unit=at(1.0))


@dataclass(frozen=True)
class NormSlack:
    """
    Relative margins of
    sigma_-^a |||x|||_1 <= |||x|||_s <= (|s|/sigma_-)^a |||x|||_1.
    """

    name: str
    left: float
    right: float

    @property
    def worst(self) -> float:
        return min(self.left, self.right)


def _sandwich(name: str, unit: float, scaled: float, s, power: float) -> NormSlack:
    s = LaplaceParameter.of(s)
    low = s.sigma_under**power * unit
    high = (s.modulus / s.sigma_under) ** power * unit
    scale = max(high, scaled, 1e-300)
    return NormSlack(
        name=name, left=(scaled - low) / scale, right=(high - scaled) / scale
    )


def check_norm_equivalences(
    mesh: CoupledMesh,
    mat: MaterialParams,
    s,
    u,
    theta,
    exterior: Optional[ExteriorField] = None,
) -> List[NormSlack]:
    """
    Margins of the norm equivalences for u, theta and the exterior pressure.

    The displacement and pressure bounds carry the factor |s| / sigma_-, the
    temperature bound its square root. Slacks are relative to the larger
    side and are non-negative when the inequality holds.
    """
    s = LaplaceParameter.of(s)
    slacks = [
        _sandwich(
            "u",
            energy_norm_u(mesh, u, mat, 1.0),
            energy_norm_u(mesh, u, mat, s),
            s,
            1.0,
        ),
        _sandwich(
            "theta",
            energy_norm_theta(mesh, theta, mat, 1.0),
            energy_norm_theta(mesh, theta, mat, s),
            s,
            0.5,
        ),
    ]
    if exterior is not None:
        slacks.append(
            _sandwich(
                "p",
                np.sqrt(exterior.energy_unit(mat.sound_c)),
                np.sqrt(exterior.energy(s, mat.sound_c)),
                s,
                1.0,
            )
        )
    worst = min(sl.worst for sl in slacks)
    logger.debug(f"Norm equivalences at s = {s}: worst slack {worst:.3e}")
    return slacks


def korn_ratio_bounds(mesh: CoupledMesh, mat: MaterialParams) -> Tuple[float, float]:
    """
    Extreme values of |||u|||_1 / ||u||_H1 over the discrete displacement space.

    Computed from the generalized eigenvalues of (K_e + rho_e M, K_vec + M),
    where K_vec is the componentwise Laplacian.
    """
    forms = assemble_forms(mesh)
    energy = (forms.elastic(mat) + mat.rho_e * forms.vector_mass).toarray()
    h1 = (kron(forms.laplace, identity(3)) + forms.vector_mass).toarray()
    eig = eigh(energy, h1, eigvals_only=True)
    eig = np.clip(eig, 0.0, None)
    return float(np.sqrt(eig.min())), float(np.sqrt(eig.max()))


@lru_cache(maxsize=8)
def half_spectrum(mesh: CoupledMesh):
    spaces = trace_spaces(mesh)
    mass = spaces.dirichlet_mass.toarray()
    values, vectors = eigh(spaces.dirichlet_stiffness.toarray() + mass, mass)
    return np.sqrt(np.clip(values, 0.0, None)), vectors, mass


def h_half_norm(mesh: CoupledMesh, phi) -> float:
    """
    Interpolation-space H^1/2 norm of a P1 trace.

    The square root of the generalized eigenvalues of (surface stiffness +
    mass, mass) weights the mass-orthonormal expansion coefficients.
    """
    spaces = trace_spaces(mesh)
    phi = _field(phi, spaces.n_dirichlet, "phi_Gamma")
    roots, vectors, mass = half_spectrum(mesh)
    coefficients = vectors.T @ (mass @ phi)
    return float(np.sqrt(np.sum(roots * np.abs(coefficients) ** 2)))


def h_minus_half_norm(unit_ops: BoundaryOperatorSet, lam) -> float:
    """sqrt(lambda^H V(1) lambda) with V assembled at s = 1."""
    lam = _field(lam, unit_ops.spaces.n_neumann, "lambda_Gamma")
    return float(np.sqrt(max(np.real(np.vdot(lam, unit_ops.V @ lam)), 0.0)))
