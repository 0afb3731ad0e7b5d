"""
Field evaluation: exterior pressure by the Kirchhoff representation and
constitutive outputs on the cells.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from piezoscatter.core.exceptions import DimensionError, ProbeError
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.dto.config import ProbeDTO
from piezoscatter.service.boundary_ops import evaluate_potentials, potential_matrices
from piezoscatter.service.constitutive import (
    StateAtPoint,
    electric_displacement,
    entropy_density,
    stress,
)
from piezoscatter.service.cq_time import CQPlan, cq_apply

logger = logging.getLogger(__name__)

# Probes closer than this fraction of the mesh diameter are rejected
MIN_DISTANCE_FACTOR = 1e-3


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Labeled probe points with their interior/exterior tags."""

    labels: List[str]
    points: np.ndarray
    tags: List[str]
    min_distance: float

    @classmethod
    def build(cls, mesh: CoupledMesh, probes: Sequence[ProbeDTO]) -> "ProbeSet":
        """
        Validate probe tags against the point-in-mesh test.

        Raises:
            ProbeError: If a tag disagrees with the location or a probe lies
                within 1e-3 mesh diameters of the boundary
        """
        if not probes:
            return cls(labels=[], points=np.zeros((0, 3)), tags=[], min_distance=np.inf)
        points = np.array([p.point for p in probes], dtype=float)
        inside = mesh.contains(points)
        distance = mesh.distance_to_boundary(points)
        limit = MIN_DISTANCE_FACTOR * mesh.diameter
        for probe, is_inside, d in zip(probes, inside, distance):
            if d <= limit:
                raise ProbeError(
                    f"probe {probe.label!r} is {d:.3g} from the boundary "
                    f"(minimum {limit:.3g})"
                )
            if (probe.tag == "interior") != bool(is_inside):
                raise ProbeError(
                    f"probe {probe.label!r} is tagged {probe.tag} but lies "
                    f"{'inside' if is_inside else 'outside'} the solid"
                )
        return cls(
            labels=[p.label for p in probes],
            points=points,
            tags=[p.tag for p in probes],
            min_distance=float(distance.min()),
        )

    def __len__(self) -> int:
        return len(self.labels)

    def select(self, tag: str) -> "ProbeSet":
        keep = [i for i, t in enumerate(self.tags) if t == tag]
        return ProbeSet(
            labels=[self.labels[i] for i in keep],
            points=self.points[keep].reshape(-1, 3),
            tags=[tag] * len(keep),
            min_distance=self.min_distance,
        )


def _check_exterior(probes: ProbeSet, allow_interior: bool):
    if not allow_interior and any(t == "interior" for t in probes.tags):
        raise ProbeError("pressure reconstruction needs exterior probes")


def reconstruct_pressure(
    mesh: CoupledMesh,
    s,
    c: float,
    phi,
    lam,
    probes: ProbeSet,
    allow_interior: bool = False,
) -> np.ndarray:
    """
    p = D(s) phi_Gamma - S(s) lambda_Gamma at the probes.

    Raises:
        ProbeError: For interior probes unless ``allow_interior``
    """
    _check_exterior(probes, allow_interior)
    if len(probes) == 0:
        return np.zeros(0, dtype=complex)
    return evaluate_potentials(mesh, phi, lam, s, c, probes.points)


def reconstruct_pressure_series(
    mesh: CoupledMesh,
    plan: CQPlan,
    c: float,
    phi_series,
    lam_series,
    probes: ProbeSet,
    allow_interior: bool = False,
) -> np.ndarray:
    """
    Time series of the exterior pressure from density time series.

    The representation is applied per CQ frequency to the transformed
    densities and transformed back; the result has shape (N + 1, n_probes).
    """
    _check_exterior(probes, allow_interior)
    phi_series = np.asarray(phi_series, dtype=float)
    lam_series = np.asarray(lam_series, dtype=float)
    n_d = len(mesh.boundary_vertices)
    if phi_series.shape[1:] != (n_d,) or lam_series.shape[1:] != (mesh.n_tris,):
        raise DimensionError("density series do not match the boundary spaces")
    samples = np.hstack([phi_series, lam_series])

    def symbol(s, densities):
        matrices = potential_matrices(mesh, s, c, probes.points)
        return matrices.apply(densities[:n_d], densities[n_d:])

    series = cq_apply(plan, symbol, samples, conjugate_symmetric=True)
    return series.real


@dataclass(frozen=True)
class DerivedFields:
    """Constitutive outputs at the cell centroids."""

    centroids: np.ndarray
    stress: np.ndarray
    entropy: np.ndarray
    displacement: np.ndarray


def derived_fields(
    mesh: CoupledMesh,
    mat: MaterialParams,
    u,
    theta,
    phi,
) -> DerivedFields:
    """Stress, entropy density and electric displacement per cell."""
    u = np.asarray(u)
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    n = mesh.n_vertices
    if u.shape != (3 * n,) or theta.shape != (n,) or phi.shape != (n,):
        raise DimensionError("interior fields do not match the mesh")
    g = mesh.tet_gradients
    grad_u = np.einsum("mai,maj->mij", u.reshape(n, 3)[mesh.tets], g)
    grad_phi = np.einsum("ma,maj->mj", phi[mesh.tets], g)
    state = StateAtPoint.from_gradients(
        grad_u, theta[mesh.tets].mean(axis=1), grad_phi
    )
    return DerivedFields(
        centroids=mesh.tet_centroids,
        stress=stress(state, mat),
        entropy=np.asarray(entropy_density(state, mat)),
        displacement=electric_displacement(state, mat),
    )
