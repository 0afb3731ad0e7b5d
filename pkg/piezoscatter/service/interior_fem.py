"""
P1 tetrahedral finite elements for the interior thermo-piezoelectric forms.

Displacement DOFs are interleaved (3 * vertex + component); temperature and
electric potential use one DOF per vertex. Element matrices are built with
einsum over all cells at once and summed through coo -> csr conversion.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh

logger = logging.getLogger(__name__)

# Field indices of the interior unknown tuple
U, THETA, PHI, TRACE = 0, 1, 2, 3
SKEW_PAIRS = ((U, THETA), (THETA, U), (U, PHI), (PHI, U), (U, TRACE), (TRACE, U))


def _sparse(rows, cols, values, shape) -> csr_matrix:
    rows, cols, values = np.broadcast_arrays(rows, cols, values)
    return coo_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def _vector_dofs(nodes: np.ndarray) -> np.ndarray:
    """Interleaved displacement DOFs of ``nodes``, shape nodes.shape + (3,)."""
    return 3 * nodes[..., None] + np.arange(3)


@dataclass(frozen=True, eq=False)
class InteriorForms:
    """Geometric P1 forms of a mesh, independent of s and of the material."""

    mesh: CoupledMesh
    laplace: csr_matrix
    mass: csr_matrix
    vector_mass: csr_matrix
    elastic_lambda: csr_matrix
    elastic_mu: csr_matrix
    divergence: csr_matrix
    mean: np.ndarray
    trace: csr_matrix
    trace_map: csr_matrix

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    def elastic(self, mat: MaterialParams) -> csr_matrix:
        """(sigma_e(u), eps(v)) for isotropic Lame constants."""
        return (
            mat.lame_lambda * self.elastic_lambda + mat.lame_mu * self.elastic_mu
        ).tocsr()

    def piezo(self, mat: MaterialParams) -> csr_matrix:
        """G[(b, j), a] = (e eps(phi_b e_j), grad phi_a)."""
        mesh = self.mesh
        g = mesh.tet_gradients
        local = np.einsum(
            "m,mak,kjl,mbl->mbja", mesh.tet_volumes, g, mat.piezo_e, g, optimize=True
        )
        rows = _vector_dofs(mesh.tets)[:, :, :, None]
        cols = mesh.tets[:, None, None, :]
        n = mesh.n_vertices
        return _sparse(rows, cols, local, (3 * n, n))

    def pyro(self, mat: MaterialParams) -> csr_matrix:
        """G[c, a] = (p . grad phi_a, phi_c)."""
        mesh = self.mesh
        pg = np.einsum("mak,k->ma", mesh.tet_gradients, mat.pyro_p)
        local = (mesh.tet_volumes / 4.0)[:, None, None] * pg[:, None, :]
        local = np.broadcast_to(local, (mesh.n_tets, 4, 4))
        n = mesh.n_vertices
        return _sparse(mesh.tets[:, :, None], mesh.tets[:, None, :], local, (n, n))

    def rigid_motions(self) -> np.ndarray:
        """(3 N_v, 6) basis of translations and infinitesimal rotations."""
        x = self.mesh.vertices - self.mesh.center
        n = self.mesh.n_vertices
        basis = np.zeros((n, 3, 6))
        for i in range(3):
            basis[:, i, i] = 1.0
        for k in range(3):
            omega = np.zeros(3)
            omega[k] = 1.0
            basis[:, :, 3 + k] = np.cross(omega, x)
        return basis.reshape(3 * n, 6)


@lru_cache(maxsize=8)
def assemble_forms(mesh: CoupledMesh) -> InteriorForms:
    """
    Assemble the geometric P1 forms of a mesh.

    Args:
        mesh: Validated coupled mesh

    Returns:
        InteriorForms shared by every frequency and material on ``mesh``

    Raises:
        DimensionError: If a cell is degenerate
    """
    if np.any(mesh.tet_volumes <= 0.0):
        raise DimensionError("degenerate cell with non-positive volume")
    n = mesh.n_vertices
    tets = mesh.tets
    vol = mesh.tet_volumes
    g = mesh.tet_gradients
    eye3 = np.eye(3)

    gg = np.einsum("mak,mbk->mab", g, g)
    scalar_rows = tets[:, :, None]
    scalar_cols = tets[:, None, :]
    laplace = _sparse(scalar_rows, scalar_cols, vol[:, None, None] * gg, (n, n))
    local_mass = (np.ones((4, 4)) + np.eye(4)) / 20.0
    mass_local = vol[:, None, None] * local_mass[None]
    mass = _sparse(scalar_rows, scalar_cols, mass_local, (n, n))

    vrows = _vector_dofs(tets)[:, :, :, None, None]
    vcols = _vector_dofs(tets)[:, None, None, :, :]
    shape = (3 * n, 3 * n)
    vector_mass = _sparse(
        vrows, vcols, np.einsum("mab,ij->maibj", mass_local, eye3), shape
    )
    k_lambda = vol[:, None, None, None, None] * np.einsum("mai,mbj->maibj", g, g)
    k_mu = vol[:, None, None, None, None] * (
        np.einsum("mab,ij->maibj", gg, eye3) + np.einsum("maj,mbi->maibj", g, g)
    )
    elastic_lambda = _sparse(vrows, vcols, k_lambda, shape)
    elastic_mu = _sparse(vrows, vcols, k_mu, shape)

    div_local = np.broadcast_to(
        (vol / 4.0)[:, None, None, None] * g[:, :, :, None], (mesh.n_tets, 4, 3, 4)
    )
    divergence = _sparse(
        _vector_dofs(tets)[:, :, :, None], tets[:, None, None, :], div_local, (3 * n, n)
    )
    mean = np.bincount(tets.ravel(), weights=np.repeat(vol / 4.0, 4), minlength=n)

    n_d = len(mesh.boundary_vertices)
    local_face = (np.ones((3, 3)) + np.eye(3)) / 12.0
    face_mass = mesh.tri_areas[:, None, None] * local_face[None]
    trace_local = np.einsum("fbc,fj->fbjc", face_mass, mesh.tri_normals)
    trace = _sparse(
        _vector_dofs(mesh.boundary_tris)[:, :, :, None],
        mesh.tris_local[:, None, None, :],
        trace_local,
        (3 * n, n_d),
    )
    trace_map = _sparse(
        mesh.boundary_vertices, np.arange(n_d), np.ones(n_d), (n, n_d)
    )
    logger.debug(f"Assembled interior forms on {mesh.n_tets} cells, {n} vertices")
    return InteriorForms(
        mesh=mesh,
        laplace=laplace,
        mass=mass,
        vector_mass=vector_mass,
        elastic_lambda=elastic_lambda,
        elastic_mu=elastic_mu,
        divergence=divergence,
        mean=mean,
        trace=trace,
        trace_map=trace_map,
    )


@dataclass(frozen=True, eq=False)
class InteriorBlocks:
    """
    Interior blocks of the coupled system at one frequency.

    A_s = K_e + s^2 rho_e M, B_s = K_theta + c_eps s M and C_s = K_phi (the
    dielectric constant multiplies C_s in the coupled row). The zero-mean
    constraint on phi uses ``mean_row`` as a Lagrange multiplier column.
    """

    s: LaplaceParameter
    mat: MaterialParams
    forms: InteriorForms
    K_e: csr_matrix
    A_s: csr_matrix
    B_s: csr_matrix
    C_s: csr_matrix
    G_div: csr_matrix
    G_piezo: csr_matrix
    G_pyro: csr_matrix
    T_trace: csr_matrix

    @property
    def mean_row(self) -> np.ndarray:
        return self.forms.mean

    @cached_property
    def couplings(self) -> Dict[Tuple[int, int], csr_matrix]:
        """Off-diagonal blocks of the coupled rows indexed by (row, column) field."""
        s, zeta = self.s.s, self.mat.zeta
        return {
            (U, THETA): -zeta * self.G_div,
            (THETA, U): (s * zeta * self.G_div.T).tocsr(),
            (U, PHI): self.G_piezo,
            (PHI, U): -self.G_piezo.T.tocsr(),
            (U, TRACE): self.T_trace,
            (TRACE, U): (-(s * s) * self.T_trace.T).tocsr(),
            (THETA, PHI): -s * self.G_pyro,
            (PHI, THETA): -self.G_pyro.T.tocsr(),
        }

    def rigid_kernel_residual(self) -> float:
        """max |K_e r| over rigid motions, relative to ||K_e||."""
        rigid = self.forms.rigid_motions()
        scale = max(abs(self.K_e).max(), 1e-300)
        return float(np.abs(self.K_e @ rigid).max() / scale)

    def elastic_kernel_dimension(self, tol: float = 1e-10) -> int:
        """Number of eigenvalues of K_e below ``tol`` times the largest one."""
        eig = np.linalg.eigvalsh(self.K_e.toarray())
        return int(np.sum(eig < tol * eig.max()))


def assemble_interior(mesh: CoupledMesh, mat: MaterialParams, s) -> InteriorBlocks:
    """
    Assemble every interior block at the Laplace parameter ``s``.

    Args:
        mesh: Validated coupled mesh
        mat: Material constants
        s: Laplace parameter

    Returns:
        InteriorBlocks at ``s``
    """
    s = LaplaceParameter.of(s)
    forms = assemble_forms(mesh)
    k_e = forms.elastic(mat)
    a_s = (k_e + (s.s**2 * mat.rho_e) * forms.vector_mass).tocsr()
    b_s = (forms.laplace + (mat.c_eps * s.s) * forms.mass).tocsr()
    blocks = InteriorBlocks(
        s=s,
        mat=mat,
        forms=forms,
        K_e=k_e,
        A_s=a_s,
        B_s=b_s,
        C_s=forms.laplace,
        G_div=forms.divergence,
        G_piezo=forms.piezo(mat),
        G_pyro=forms.pyro(mat),
        T_trace=forms.trace,
    )
    logger.debug(f"Assembled interior blocks at s = {s}")
    return blocks


def coupling_skew_check(
    blocks: InteriorBlocks,
    fields: Sequence[np.ndarray],
    couplings: Optional[Dict[Tuple[int, int], csr_matrix]] = None,
) -> float:
    """
    Real part of the Z(s)-weighted skew coupling pairing, relative to its terms.

    The pairs (u, theta), (u, phi) and (u, phi_Gamma) cancel exactly in the
    real part after the row weights (s-bar, 1, s, s-bar/|s|^2) are applied.

    Args:
        blocks: Interior blocks supplying s and the default couplings
        fields: (u, theta, phi, phi_Gamma) coefficient vectors
        couplings: Override of the coupling blocks (fault injection)

    Returns:
        |Re(total)| / sum of |terms|, 0 for zero fields
    """
    if len(fields) != 4:
        raise DimensionError("fields must be (u, theta, phi, phi_Gamma)")
    couplings = couplings if couplings is not None else blocks.couplings
    weights = blocks.s.scaling_weights()
    total = 0.0 + 0.0j
    scale = 0.0
    for row, col in SKEW_PAIRS:
        term = weights[row] * np.vdot(fields[row], couplings[(row, col)] @ fields[col])
        total += term
        scale += abs(term)
    if scale == 0.0:
        return 0.0
    return float(abs(total.real) / scale)


@dataclass(frozen=True)
class RealPartDefects:
    """Relative defects of the real-part identities of the weighted diagonal blocks."""

    elastic: float
    thermal: float
    electric: float

    @property
    def worst(self) -> float:
        return max(self.elastic, self.thermal, self.electric)


def _relative(left: float, right: float) -> float:
    return abs(left - right) / max(abs(left), abs(right), 1e-300)


def real_part_identities(
    blocks: InteriorBlocks, u: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> RealPartDefects:
    """
    Compare Re of the weighted diagonal pairings with their closed forms.

    Re(s-bar u^H A_s u) = sigma (u^H K_e u + rho_e |s|^2 u^H M u),
    Re(T0^-1 theta^H B_s theta) = T0^-1 (theta^H K theta + c_eps sigma theta^H M theta)
    and Re(s eps phi^H C_s phi) = sigma eps phi^H K phi.
    """
    s, mat, forms = blocks.s, blocks.mat, blocks.forms

    def form(matrix, x):
        return np.vdot(x, matrix @ x)

    mass_u = form(forms.vector_mass, u)
    elastic = _relative(
        np.real(np.conj(s.s) * form(blocks.A_s, u)),
        s.sigma * np.real(form(blocks.K_e, u) + mat.rho_e * s.modulus**2 * mass_u),
    )
    mass_theta = form(forms.mass, theta)
    thermal = _relative(
        np.real(form(blocks.B_s, theta)) / mat.T0,
        np.real(form(forms.laplace, theta) + mat.c_eps * s.sigma * mass_theta)
        / mat.T0,
    )
    electric = _relative(
        np.real(s.s * mat.dielectric_eps * form(blocks.C_s, phi)),
        s.sigma * mat.dielectric_eps * np.real(form(forms.laplace, phi)),
    )
    return RealPartDefects(elastic=elastic, thermal=thermal, electric=electric)


def pyro_slack(blocks: InteriorBlocks, theta: np.ndarray, phi: np.ndarray) -> float:
    """
    |s| ||p|| 2 ||theta|| ||grad phi|| - |Re(s 2 Re(theta^H G_pyro phi))|.

    Non-negative when the pyroelectric pairing obeys its Cauchy-Schwarz bound.
    """
    s, mat, forms = blocks.s, blocks.mat, blocks.forms
    theta_l2 = np.sqrt(max(np.real(np.vdot(theta, forms.mass @ theta)), 0.0))
    grad_phi = np.sqrt(max(np.real(np.vdot(phi, forms.laplace @ phi)), 0.0))
    pairing = 2.0 * np.real(np.vdot(theta, blocks.G_pyro @ phi))
    bound = s.modulus * mat.pyro_norm * 2.0 * theta_l2 * grad_phi
    return float(bound - abs(np.real(s.s * pairing)))
