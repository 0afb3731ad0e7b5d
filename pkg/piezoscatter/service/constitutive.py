"""Thermo-piezoelectric constitutive relations and piezo tensor algebra."""

import logging
from dataclasses import dataclass

import numpy as np

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.core.material import (
    VOIGT_PAIRS,
    MaterialParams,
    tensor_to_voigt,
    voigt_to_tensor,
)

logger = logging.getLogger(__name__)

STRAIN_SYMMETRY_TOL = 1e-14


def voigt_strain(strain: np.ndarray) -> np.ndarray:
    """Engineering Voigt vector (e11, e22, e33, 2 e23, 2 e13, 2 e12)."""
    strain = np.asarray(strain)
    factors = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
    return np.stack([strain[..., i, j] for i, j in VOIGT_PAIRS], axis=-1) * factors


@dataclass(frozen=True)
class PiezoTensor:
    """
    Piezoelectric tensor e_kij with e_kij = e_kji.

    ``voigt`` is the 3x6 layout; contraction with a symmetric matrix uses the
    engineering-shear strain vector so that (e M)_k = voigt[k] . voigt_strain(M).
    """

    voigt: np.ndarray

    def __post_init__(self):
        voigt = np.array(self.voigt, dtype=float)
        if voigt.shape != (3, 6):
            raise DimensionError(f"piezo Voigt matrix must be 3x6, got {voigt.shape}")
        voigt.setflags(write=False)
        object.__setattr__(self, "voigt", voigt)

    @classmethod
    def from_material(cls, mat: MaterialParams) -> "PiezoTensor":
        return cls(tensor_to_voigt(mat.piezo_e))

    @property
    def full(self) -> np.ndarray:
        return voigt_to_tensor(self.voigt)

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """(e M)_k = sum_ij e_kij M_ij for symmetric M."""
        return np.einsum("kv,...v->...k", self.voigt, voigt_strain(matrix))

    def adjoint(self, vector: np.ndarray) -> np.ndarray:
        """(e^T d)_ij = sum_k e_kij d_k."""
        return np.einsum("kij,...k->...ij", self.full, np.asarray(vector))


@dataclass(frozen=True)
class StateAtPoint:
    """Strain, temperature deviation and electric field at one or more points."""

    strain: np.ndarray
    theta: np.ndarray
    E_field: np.ndarray

    def __post_init__(self):
        strain = np.asarray(self.strain)
        E_field = np.asarray(self.E_field)
        if strain.shape[-2:] != (3, 3) or E_field.shape[-1:] != (3,):
            raise DimensionError("strain must be (..., 3, 3) and E_field (..., 3)")
        scale = max(float(np.abs(strain).max(initial=0.0)), 1.0)
        asym = np.abs(strain - np.swapaxes(strain, -1, -2)).max(initial=0.0)
        if asym > STRAIN_SYMMETRY_TOL * scale:
            raise DimensionError(f"strain is not symmetric (defect {asym:.2e})")
        object.__setattr__(self, "strain", strain)
        object.__setattr__(self, "theta", np.asarray(self.theta))
        object.__setattr__(self, "E_field", E_field)

    @classmethod
    def from_gradients(cls, grad_u, theta, grad_phi) -> "StateAtPoint":
        """Build from a displacement gradient and the potential gradient."""
        grad_u = np.asarray(grad_u)
        strain = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
        return cls(strain=strain, theta=theta, E_field=-np.asarray(grad_phi))


def stress(state: StateAtPoint, mat: MaterialParams) -> np.ndarray:
    """Generalized stress lambda tr(eps) I + 2 mu eps - zeta theta I - e^T E."""
    eps = state.strain
    trace = np.trace(eps, axis1=-2, axis2=-1)
    identity = np.eye(3)
    elastic = (
        mat.lame_lambda * trace[..., None, None] * identity + 2.0 * mat.lame_mu * eps
    )
    thermal = mat.zeta * np.asarray(state.theta)[..., None, None] * identity
    electric = np.einsum("kij,...k->...ij", mat.piezo_e, state.E_field)
    return elastic - thermal - electric


def entropy_density(state: StateAtPoint, mat: MaterialParams):
    """zeta div u + (c_eps / T0) theta + p . E."""
    trace = np.trace(state.strain, axis1=-2, axis2=-1)
    return (
        mat.zeta * trace
        + mat.heat_ratio * state.theta
        + np.einsum("k,...k->...", mat.pyro_p, state.E_field)
    )


def electric_displacement(state: StateAtPoint, mat: MaterialParams) -> np.ndarray:
    """e eps + theta p + eps_dielectric E."""
    piezo = PiezoTensor.from_material(mat).apply(state.strain)
    return (
        piezo
        + np.asarray(state.theta)[..., None] * mat.pyro_p
        + mat.dielectric_eps * state.E_field
    )
