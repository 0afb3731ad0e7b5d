"""
Galerkin boundary element discretization of the layer potentials S(s), D(s)
and the boundary integral operators V, K, K', W on P1 x P0 trace spaces.

Close panel pairs (shared vertices or gap below half a panel diameter) are
integrated semi-analytically: the static 1/R part of every kernel is
integrated in closed form over the inner panel and the bounded remainder by
Gauss quadrature.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu
from scipy.spatial.distance import cdist

from piezoscatter.core.exceptions import DimensionError, ProbeError, QuadratureError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.core.settings import get_settings
from piezoscatter.service.kernel import (
    FOUR_PI,
    kernel_double_radial,
    kernel_radial,
    kernel_value,
    smooth_radial,
    smooth_value,
    wavenumber,
)
from piezoscatter.service.quadrature import (
    MAX_ORDER,
    QuadratureRule,
    static_integrals,
    triangle_rule,
)

logger = logging.getLogger(__name__)

CLOSE_FACTOR = 0.5
NEAR_FIELD_FACTOR = 1.0
SURFACE_TOLERANCE = 1e-6
_CHUNK_ENTRIES = 3_000_000


def _scatter(rows, cols, values, shape) -> np.ndarray:
    """Dense sum of ``values`` at (rows, cols); duplicates accumulate."""
    rows, cols, values = np.broadcast_arrays(rows, cols, values)
    return coo_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).toarray()


@dataclass(frozen=True, eq=False)
class TraceSpacePair:
    """
    P1 Dirichlet space (boundary vertices) and P0 Neumann space (boundary
    faces) on the boundary surface of a mesh.
    """

    mesh: CoupledMesh

    @property
    def n_dirichlet(self) -> int:
        return len(self.mesh.boundary_vertices)

    @property
    def n_neumann(self) -> int:
        return self.mesh.n_tris

    @property
    def tris(self) -> np.ndarray:
        return self.mesh.tris_local

    @cached_property
    def twice_areas(self) -> np.ndarray:
        return 2.0 * self.mesh.tri_areas

    @cached_property
    def surface_gradients(self) -> np.ndarray:
        """Tangential gradients of the three local hat functions, (K, 3, 3)."""
        p = self.mesh.tri_points
        n = self.mesh.tri_normals
        twice = self.twice_areas[:, None]
        return np.stack(
            [
                np.cross(n, p[:, 2] - p[:, 1]) / twice,
                np.cross(n, p[:, 0] - p[:, 2]) / twice,
                np.cross(n, p[:, 1] - p[:, 0]) / twice,
            ],
            axis=1,
        )

    @cached_property
    def surface_curls(self) -> np.ndarray:
        """n x grad of the local hat functions, (K, 3, 3)."""
        return np.cross(self.mesh.tri_normals[:, None, :], self.surface_gradients)

    @cached_property
    def neumann_mass(self) -> np.ndarray:
        """Diagonal of the P0 mass matrix (panel areas)."""
        return np.asarray(self.mesh.tri_areas)

    @cached_property
    def mixed_mass(self) -> np.ndarray:
        """(P0 test, P1 trial) mass matrix, (N_n, N_d)."""
        rows = np.repeat(np.arange(self.n_neumann), 3)
        values = np.repeat(self.mesh.tri_areas / 3.0, 3)
        return _scatter(
            rows, self.tris.ravel(), values, (self.n_neumann, self.n_dirichlet)
        )

    @cached_property
    def dirichlet_mass(self) -> csc_matrix:
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        values = self.mesh.tri_areas[:, None, None] * local[None]
        return self._p1_matrix(values)

    @cached_property
    def dirichlet_stiffness(self) -> csc_matrix:
        """Surface Laplace-Beltrami stiffness on P1."""
        g = self.surface_gradients
        values = self.mesh.tri_areas[:, None, None] * np.einsum("kai,kbi->kab", g, g)
        return self._p1_matrix(values)

    def _p1_matrix(self, values: np.ndarray) -> csc_matrix:
        rows = np.repeat(self.tris[:, :, None], 3, axis=2)
        cols = np.repeat(self.tris[:, None, :], 3, axis=1)
        shape = (self.n_dirichlet, self.n_dirichlet)
        return coo_matrix(
            (values.ravel(), (rows.ravel(), cols.ravel())), shape=shape
        ).tocsc()

    @cached_property
    def _mass_lu(self):
        return splu(self.dirichlet_mass.astype(complex))

    def dirichlet_projection(self, load: np.ndarray) -> np.ndarray:
        """P1 coefficients of the function whose P1-tested moments are ``load``."""
        return self._mass_lu.solve(np.asarray(load, dtype=complex))

    def check(self) -> None:
        """
        Verify space dimensions and full column rank of the mixed mass matrix.

        Raises:
            DimensionError: If a dimension or the rank condition fails
        """
        if self.mixed_mass.shape != (self.n_neumann, self.n_dirichlet):
            raise DimensionError("mixed mass matrix does not match trace spaces")
        rank = np.linalg.matrix_rank(self.mixed_mass)
        if rank != min(self.mixed_mass.shape):
            raise DimensionError(f"mixed mass matrix is rank deficient ({rank})")


@lru_cache(maxsize=16)
def trace_spaces(mesh: CoupledMesh) -> TraceSpacePair:
    """Shared trace spaces of a mesh so cached matrices are built once."""
    return TraceSpacePair(mesh)


@dataclass(frozen=True, eq=False)
class BoundaryOperatorSet:
    """Dense Galerkin matrices of V, K, K' and W assembled at one frequency."""

    s: LaplaceParameter
    c: float
    V: np.ndarray
    K: np.ndarray
    Kp: np.ndarray
    W: np.ndarray
    spaces: TraceSpacePair

    @property
    def kappa(self) -> complex:
        return self.s.s / self.c

    @property
    def mixed_mass(self) -> np.ndarray:
        return self.spaces.mixed_mass

    def symmetry_defects(self) -> Tuple[float, float]:
        """Relative deviation of V and W from complex symmetry."""
        v = np.abs(self.V - self.V.T).max() / np.abs(self.V).max()
        w = np.abs(self.W - self.W.T).max() / max(np.abs(self.W).max(), 1e-300)
        return float(v), float(w)

    def adjoint_defect(self) -> float:
        """Relative distance between Kp and K transposed."""
        return float(np.linalg.norm(self.Kp - self.K.T) / np.linalg.norm(self.K))

    def exterior_neumann(self, phi: np.ndarray) -> np.ndarray:
        """Neumann density of the exterior field with Dirichlet data ``phi``."""
        rhs = (self.K - 0.5 * self.mixed_mass) @ phi
        return np.linalg.solve(self.V, rhs)


@dataclass(frozen=True)
class _NearIntegrals:
    single_p0: np.ndarray
    single_p1: np.ndarray
    double_p1: np.ndarray
    adjoint_p0: Optional[np.ndarray]


def _near_integrals(
    x: np.ndarray,
    panel: np.ndarray,
    spaces: TraceSpacePair,
    kappa: complex,
    inner: QuadratureRule,
    normal_x: Optional[np.ndarray] = None,
) -> _NearIntegrals:
    """Semi-analytic point-to-panel integrals for P0 and P1 densities."""
    mesh = spaces.mesh
    tri = mesh.tri_points[panel]
    n_y = mesh.tri_normals[panel]
    grads = spaces.surface_gradients[panel]
    static = static_integrals(x, tri, n_y)

    phi_rho = np.einsum("mdk,mk->md", grads, static.rho - tri[:, 0])
    phi_rho[:, 0] += 1.0
    grad_s1 = np.einsum("mdk,mk->md", grads, static.s1)
    grad_d1 = np.einsum("mdk,mk->md", grads, static.d1)
    single_p0 = static.s0 / FOUR_PI
    single_p1 = (phi_rho * static.s0[:, None] + grad_s1) / FOUR_PI
    double_p1 = (
        phi_rho * static.d0[:, None] + static.d[:, None] * grad_d1
    ) / FOUR_PI

    y = np.einsum("qc,mcd->mqd", inner.points_x, tri)
    w = inner.weights[None, :] * spaces.twice_areas[panel][:, None]
    diff = x[:, None, :] - y
    r = np.linalg.norm(diff, axis=2)
    rest_value = w * smooth_value(r, kappa)
    rest_radial = w * smooth_radial(r, kappa)
    single_p0 = single_p0 + rest_value.sum(axis=1)
    single_p1 = single_p1 + rest_value @ inner.points_x
    dn_y = np.einsum("mqk,mk->mq", diff, n_y)
    double_p1 = double_p1 + (rest_radial * dn_y) @ inner.points_x

    adjoint_p0 = None
    if normal_x is not None:
        adjoint_p0 = (
            np.einsum("mk,mk->m", normal_x, static.d1)
            - np.einsum("mk,mk->m", n_y, normal_x) * static.d0
        ) / FOUR_PI
        dn_x = np.einsum("mqk,mk->mq", diff, normal_x)
        adjoint_p0 = adjoint_p0 - (rest_radial * dn_x).sum(axis=1)
    return _NearIntegrals(single_p0, single_p1, double_p1, adjoint_p0)


def close_pairs(mesh: CoupledMesh, factor: float = CLOSE_FACTOR) -> np.ndarray:
    """Boolean (K, K) mask of panel pairs that need singular treatment."""
    centroids = mesh.tri_centroids
    radius = np.linalg.norm(mesh.tri_points - centroids[:, None], axis=2).max(axis=1)
    gap = cdist(centroids, centroids) - radius[:, None] - radius[None, :]
    diam = np.maximum(mesh.tri_diameters[:, None], mesh.tri_diameters[None, :])
    return gap < factor * diam


class _OperatorAssembler:
    """Accumulates V, K, Kp and W block by block."""

    def __init__(self, spaces: TraceSpacePair, kappa: complex, order: int):
        self.spaces = spaces
        self.kappa = kappa
        self.order = order
        self.rule = triangle_rule(order)
        mesh = spaces.mesh
        self.points = np.einsum("qc,kcd->kqd", self.rule.points_x, mesh.tri_points)
        self.weights = self.rule.weights[None, :] * spaces.twice_areas[:, None]
        self.close = close_pairs(mesh)

    def far_rows(self, rows: np.ndarray):
        """Regular-quadrature contributions of ``rows`` against all panels."""
        sp, kappa, bary = self.spaces, self.kappa, self.rule.points_x
        normals = sp.mesh.tri_normals
        diff = self.points[rows][:, :, None, None, :] - self.points[None, None]
        mask = self.close[rows][:, None, :, None]
        r = np.where(mask, 1.0, np.linalg.norm(diff, axis=-1))
        weight = self.weights[rows][:, :, None, None] * self.weights[None, None]
        weight = np.where(mask, 0.0, weight)
        value = weight * kernel_value(r, kappa)
        radial = weight * kernel_radial(r, kappa)
        dn_y = np.einsum("aqbrk,bk->aqbr", diff, normals)
        dn_x = np.einsum("aqbrk,ak->aqbr", diff, normals[rows])
        v = value.sum(axis=(1, 3))
        i1 = np.einsum("aqbr,qc,rd->abcd", value, bary, bary, optimize=True)
        k = np.einsum("aqbr,rd->abd", radial * dn_y, bary)
        kp = -np.einsum("aqbr,qc->abc", radial * dn_x, bary)
        cols = np.arange(sp.n_neumann)
        return self._accumulate(rows[:, None], cols[None, :], v, i1, k, kp)

    def close_block(self, a: np.ndarray, b: np.ndarray):
        """Semi-analytic contributions of the close pairs (a, b)."""
        sp = self.spaces
        outer = triangle_rule(min(self.order + 3, MAX_ORDER))
        inner = triangle_rule(min(self.order + 1, MAX_ORDER))
        q = len(outer)
        x = np.einsum("qc,pcd->pqd", outer.points_x, sp.mesh.tri_points[a])
        wo = outer.weights[None, :] * sp.twice_areas[a][:, None]
        near = _near_integrals(
            x.reshape(-1, 3),
            np.repeat(b, q),
            sp,
            self.kappa,
            inner,
            normal_x=np.repeat(sp.mesh.tri_normals[a], q, axis=0),
        )
        single_p0 = near.single_p0.reshape(-1, q)
        single_p1 = near.single_p1.reshape(-1, q, 3)
        double_p1 = near.double_p1.reshape(-1, q, 3)
        adjoint_p0 = near.adjoint_p0.reshape(-1, q)
        bary = outer.points_x
        v = np.einsum("pq,pq->p", wo, single_p0)
        i1 = np.einsum("pq,qc,pqd->pcd", wo, bary, single_p1)
        k = np.einsum("pq,pqd->pd", wo, double_p1)
        kp = np.einsum("pq,qc,pq->pc", wo, bary, adjoint_p0)
        return self._accumulate(a, b, v, i1, k, kp)

    def _accumulate(self, a, b, v, i1, k, kp):
        sp = self.spaces
        n_n, n_d = sp.n_neumann, sp.n_dirichlet
        a, b = np.broadcast_arrays(a, b)
        tl = sp.tris
        normals = sp.mesh.tri_normals
        V = _scatter(a, b, v, (n_n, n_n))
        K = _scatter(a[..., None], tl[b], k, (n_n, n_d))
        Kp = _scatter(tl[a], b[..., None], kp, (n_d, n_n))
        curls = sp.surface_curls
        curl_dot = np.einsum("...ck,...dk->...cd", curls[a], curls[b])
        nn = np.einsum("...k,...k->...", normals[a], normals[b])
        w = curl_dot * v[..., None, None] + (
            self.kappa**2 * nn[..., None, None] * i1
        )
        W = _scatter(tl[a][..., :, None], tl[b][..., None, :], w, (n_d, n_d))
        return V, K, Kp, W


def _row_chunks(n_rows: int, per_row: int):
    size = max(1, _CHUNK_ENTRIES // max(per_row, 1))
    return [np.arange(i, min(i + size, n_rows)) for i in range(0, n_rows, size)]


def assemble_operators(
    mesh: CoupledMesh, s, c: float, quad_order: Optional[int] = None
) -> BoundaryOperatorSet:
    """
    Assemble the Galerkin matrices of V(s), K(s), K'(s) and W(s).

    W uses the integration-by-parts form with surface curls, so only weakly
    singular integrals occur. Kp is assembled independently from K with the
    observation-point normal derivative.

    Args:
        mesh: Validated coupled mesh
        s: Laplace parameter in the right half plane
        c: Sound speed of the fluid
        quad_order: Regular quadrature order, defaults to the runtime setting

    Returns:
        BoundaryOperatorSet at ``s``

    Raises:
        QuadratureError: On degenerate panels
    """
    s = LaplaceParameter.of(s)
    settings = get_settings()
    order = quad_order or settings.quad_order
    spaces = trace_spaces(mesh)
    if np.any(mesh.tri_areas <= 0.0):
        raise QuadratureError("degenerate boundary panel with zero area")
    kappa = wavenumber(s, c)
    assembler = _OperatorAssembler(spaces, kappa, order)
    q = len(assembler.rule)
    chunks = _row_chunks(spaces.n_neumann, 3 * q * q * spaces.n_neumann)

    close_a, close_b = np.nonzero(assembler.close)
    step = max(1, _CHUNK_ENTRIES // (3 * q * q))
    parts = [
        (assembler.close_block, (close_a[i : i + step], close_b[i : i + step]))
        for i in range(0, len(close_a), step)
    ] + [(assembler.far_rows, (rows,)) for rows in chunks]
    totals = None
    workers = max(1, settings.workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(lambda job: job[0](*job[1]), parts):
            totals = part if totals is None else [t + p for t, p in zip(totals, part)]
    V, K, Kp, W = totals
    logger.debug(
        f"Assembled boundary operators at s = {s} on {spaces.n_neumann} panels "
        f"({int(assembler.close.sum())} close pairs)"
    )
    return BoundaryOperatorSet(s=s, c=c, V=V, K=K, Kp=Kp, W=W, spaces=spaces)


@dataclass(frozen=True, eq=False)
class PotentialMatrices:
    """
    Linear maps from (phi, lambda) coefficients to D(s) phi and S(s) lambda at
    fixed points; gradients are present when requested.
    """

    points: np.ndarray
    single: np.ndarray
    double: np.ndarray
    single_grad: Optional[np.ndarray] = None
    double_grad: Optional[np.ndarray] = None

    def apply(self, phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Kirchhoff representation D phi - S lambda at every point."""
        return self.double @ phi - self.single @ lam

    def apply_gradient(self, phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
        if self.single_grad is None:
            raise DimensionError("potential matrices were built without gradients")
        return self.double_grad @ phi - self.single_grad @ lam


def _point_panel_regular(x, panel, spaces, kappa, rule, gradient):
    mesh = spaces.mesh
    tri = mesh.tri_points[panel]
    n_y = mesh.tri_normals[panel]
    bary = rule.points_x
    y = np.einsum("qc,mcd->mqd", bary, tri)
    w = rule.weights[None, :] * spaces.twice_areas[panel][:, None]
    diff = x[:, None, :] - y
    r = np.linalg.norm(diff, axis=2)
    dn = np.einsum("mqk,mk->mq", diff, n_y)
    value = w * kernel_value(r, kappa)
    radial = w * kernel_radial(r, kappa)
    single = value.sum(axis=1)
    double = (radial * dn) @ bary
    if not gradient:
        return single, double, None, None
    single_grad = -np.einsum("mq,mqk->mk", radial, diff)
    second = w * kernel_double_radial(r, kappa) * dn
    double_grad = np.einsum("mq,qd,mk->mdk", radial, bary, n_y) - np.einsum(
        "mq,qd,mqk->mdk", second, bary, diff
    )
    return single, double, single_grad, double_grad


def potential_matrices(
    mesh: CoupledMesh,
    s,
    c: float,
    points,
    gradient: bool = False,
    quad_order: Optional[int] = None,
) -> PotentialMatrices:
    """
    Matrices of the single- and double-layer potentials at off-surface points.

    Raises:
        ProbeError: If a point lies within 1e-6 x diameter of the boundary
    """
    s = LaplaceParameter.of(s)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 3:
        raise DimensionError(f"points must be (P, 3), got {points.shape}")
    distance = mesh.distance_to_boundary(points)
    if np.any(distance <= SURFACE_TOLERANCE * mesh.diameter):
        bad = int(np.argmin(distance))
        raise ProbeError(
            f"point {points[bad].tolist()} lies on the boundary "
            f"(distance {distance[bad]:.3e})"
        )
    order = quad_order or get_settings().quad_order
    spaces = trace_spaces(mesh)
    kappa = wavenumber(s, c)
    n_p, n_n, n_d = len(points), spaces.n_neumann, spaces.n_dirichlet
    tl = spaces.tris

    centroids = mesh.tri_centroids
    radius = np.linalg.norm(mesh.tri_points - centroids[:, None], axis=2).max(axis=1)
    gap = cdist(points, centroids) - radius[None, :]
    near = gap < NEAR_FIELD_FACTOR * mesh.tri_diameters[None, :]

    single = np.zeros((n_p, n_n), dtype=complex)
    double = np.zeros((n_p, n_d), dtype=complex)
    single_grad = np.zeros((n_p, 3, n_n), dtype=complex) if gradient else None
    double_grad = np.zeros((n_p, 3, n_d), dtype=complex) if gradient else None

    def add(p_idx, b_idx, rule):
        return _point_panel_regular(
            points[p_idx], b_idx, spaces, kappa, rule, gradient
        )

    def store(p_idx, b_idx, sv, dv, sg, dg):
        nonlocal double
        single[p_idx, b_idx] += sv
        double += _scatter(p_idx[:, None], tl[b_idx], dv, (n_p, n_d))
        if gradient:
            for k in range(3):
                single_grad[p_idx, k, b_idx] += sg[:, k]
                double_grad[:, k, :] += _scatter(
                    p_idx[:, None], tl[b_idx], dg[:, :, k], (n_p, n_d)
                )

    far_p, far_b = np.nonzero(~near)
    rule = triangle_rule(order)
    step = max(1, _CHUNK_ENTRIES // (3 * len(rule)))
    for start in range(0, len(far_p), step):
        p_idx, b_idx = far_p[start : start + step], far_b[start : start + step]
        store(p_idx, b_idx, *add(p_idx, b_idx, rule))

    near_p, near_b = np.nonzero(near)
    if len(near_p):
        if gradient:
            fine = triangle_rule(min(order + 8, MAX_ORDER))
            store(near_p, near_b, *add(near_p, near_b, fine))
        else:
            inner = triangle_rule(min(order + 3, MAX_ORDER))
            ints = _near_integrals(points[near_p], near_b, spaces, kappa, inner)
            store(near_p, near_b, ints.single_p0, ints.double_p1, None, None)
    logger.debug(
        f"Potential matrices at {n_p} points, s = {s} ({len(near_p)} near pairs)"
    )
    return PotentialMatrices(points, single, double, single_grad, double_grad)


def evaluate_potentials(mesh: CoupledMesh, phi, lam, s, c: float, points):
    """
    Kirchhoff representation D(s) phi - S(s) lambda at off-surface points.

    Args:
        mesh: Validated coupled mesh
        phi: P1 Dirichlet coefficients (N_d)
        lam: P0 Neumann coefficients (N_n)
        s: Laplace parameter
        c: Sound speed
        points: (P, 3) evaluation points off the boundary

    Returns:
        Complex values at ``points``

    Raises:
        DimensionError: If coefficient lengths do not match the trace spaces
        ProbeError: If a point lies on the boundary
    """
    spaces = trace_spaces(mesh)
    phi = np.asarray(phi, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    if phi.shape != (spaces.n_dirichlet,) or lam.shape != (spaces.n_neumann,):
        raise DimensionError(
            f"expected phi ({spaces.n_dirichlet},) and lam ({spaces.n_neumann},), "
            f"got {phi.shape} and {lam.shape}"
        )
    return potential_matrices(mesh, s, c, points).apply(phi, lam)


def apply_calderon(ops: BoundaryOperatorSet, phi: np.ndarray, lam: np.ndarray):
    """
    Apply the discrete projector [[1/2 + K, -V], [-W, 1/2 - K']] to Cauchy data.

    Dirichlet rows are tested with P0 and mapped back to P1 by L2 projection,
    Neumann rows are tested with P1 and projected onto P0.
    """
    sp = ops.spaces
    m = sp.mixed_mass
    areas = sp.neumann_mass
    dirichlet_p0 = (0.5 * (m @ phi) + ops.K @ phi - ops.V @ lam) / areas
    phi_new = sp.dirichlet_projection(m.T @ dirichlet_p0)
    neumann_load = -ops.W @ phi + 0.5 * (m.T @ lam) - ops.Kp @ lam
    lam_new = (m @ sp.dirichlet_projection(neumann_load)) / areas
    return phi_new, lam_new


def cauchy_norm(spaces: TraceSpacePair, phi: np.ndarray, lam: np.ndarray) -> float:
    """L2 norm of Cauchy data (P1 mass for phi, P0 mass for lambda)."""
    phi_part = np.real(np.vdot(phi, spaces.dirichlet_mass @ phi))
    lam_part = np.real(np.vdot(lam, spaces.neumann_mass * lam))
    return float(np.sqrt(max(phi_part + lam_part, 0.0)))


def smooth_cauchy_data(
    mesh: CoupledMesh, rng: np.random.Generator, degree: int = 2
) -> Tuple[np.ndarray, np.ndarray]:
    """Random low-degree polynomials sampled at boundary vertices and centroids."""
    powers = [
        (i, j, k)
        for i in range(degree + 1)
        for j in range(degree + 1 - i)
        for k in range(degree + 1 - i - j)
    ]

    def sample(points):
        coef = rng.standard_normal(len(powers)) + 1j * rng.standard_normal(len(powers))
        x = (points - mesh.center) / max(mesh.circumradius, 1e-300)
        basis = np.stack(
            [x[:, 0] ** i * x[:, 1] ** j * x[:, 2] ** k for i, j, k in powers]
        )
        return coef @ basis

    phi = sample(mesh.vertices[mesh.boundary_vertices])
    lam = sample(mesh.tri_centroids)
    return phi, lam


def calderon_residual(
    ops: BoundaryOperatorSet,
    data: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    n_samples: int = 4,
    seed: int = 0,
) -> float:
    """
    Idempotency defect ||C^2 x - C x|| / ||x|| of the discrete projector.

    Args:
        ops: Assembled operator set
        data: Explicit (phi, lam); random smooth data when omitted
        n_samples: Number of random samples when ``data`` is omitted
        seed: Seed of the random generator

    Returns:
        Largest relative residual over the samples (0 for zero data)
    """
    sp = ops.spaces
    samples = [data] if data is not None else []
    if data is None:
        rng = np.random.default_rng(seed)
        samples = [smooth_cauchy_data(sp.mesh, rng) for _ in range(n_samples)]
    worst = 0.0
    for phi, lam in samples:
        phi = np.asarray(phi, dtype=complex)
        lam = np.asarray(lam, dtype=complex)
        size = cauchy_norm(sp, phi, lam)
        if size == 0.0:
            continue
        phi1, lam1 = apply_calderon(ops, phi, lam)
        phi2, lam2 = apply_calderon(ops, phi1, lam1)
        worst = max(worst, cauchy_norm(sp, phi2 - phi1, lam2 - lam1) / size)
    logger.debug(f"Calderon residual at s = {ops.s}: {worst:.3e}")
    return worst


@dataclass(frozen=True)
class JumpErrors:
    """Relative errors of the extrapolated trace and normal-derivative jumps."""

    dirichlet: float
    neumann: float


def trace_jumps(
    mesh: CoupledMesh,
    phi: np.ndarray,
    lam: np.ndarray,
    s,
    c: float,
    delta: float,
    faces: Optional[np.ndarray] = None,
) -> JumpErrors:
    """
    Compare jumps of D phi - S lambda across face centroids with (phi, lambda).

    Values at offsets delta, delta/2 and delta/4 on both sides are Richardson
    extrapolated to the surface.
    """
    spaces = trace_spaces(mesh)
    if faces is None:
        faces = np.arange(mesh.n_tris)
    faces = np.asarray(faces)
    x0 = mesh.tri_centroids[faces]
    n = mesh.tri_normals[faces]
    offsets = np.array([delta, delta / 2, delta / 4, delta / 8])
    signed = np.concatenate([offsets, -offsets])
    points = (x0[:, None, :] + signed[None, :, None] * n[:, None, :]).reshape(-1, 3)
    values = evaluate_potentials(mesh, phi, lam, s, c, points).reshape(len(faces), -1)
    outside, inside = values[:, :4], values[:, 4:]

    jump = outside - inside
    dirichlet = (8.0 * jump[:, 2] - 6.0 * jump[:, 1] + jump[:, 0]) / 3.0
    slope_out = (outside[:, :3] - outside[:, 1:]) / (offsets[:3] - offsets[1:])
    slope_in = (inside[:, 1:] - inside[:, :3]) / (offsets[:3] - offsets[1:])
    dn_jump = slope_out - slope_in
    neumann = 2.0 * dn_jump[:, 2] - dn_jump[:, 1]

    phi_c = np.asarray(phi)[spaces.tris[faces]].mean(axis=1)
    lam_c = np.asarray(lam)[faces]
    d_err = np.abs(dirichlet - phi_c).max() / max(np.abs(phi_c).max(), 1e-300)
    n_err = np.abs(neumann - lam_c).max() / max(np.abs(lam_c).max(), 1e-300)
    return JumpErrors(dirichlet=float(d_err), neumann=float(n_err))


@dataclass(frozen=True)
class JumpRefinement:
    """Jump errors of one smooth Cauchy datum on successively refined meshes."""

    h: List[float]
    errors: List[JumpErrors]

    def order(self, kind: str) -> float:
        """Observed order of ``kind`` (dirichlet or neumann) between the last two."""
        if len(self.h) < 2:
            raise DimensionError("a refinement order needs two meshes")
        coarse, fine = (getattr(e, kind) for e in self.errors[-2:])
        return float(np.log(coarse / fine) / np.log(self.h[-2] / self.h[-1]))


def jump_refinement(
    meshes: Sequence[CoupledMesh],
    s,
    c: float,
    seed: int = 0,
    n_faces: int = 80,
    offset: float = 0.1,
) -> JumpRefinement:
    """
    Trace jumps of the same polynomial Cauchy datum on each mesh.

    The evaluation offset is ``offset * h^2`` with h the largest boundary
    panel diameter, so it shrinks relative to the panels under refinement.
    """
    h, errors = [], []
    for mesh in meshes:
        phi, lam = smooth_cauchy_data(mesh, np.random.default_rng(seed))
        faces = np.unique(
            np.linspace(0, mesh.n_tris - 1, min(n_faces, mesh.n_tris)).astype(int)
        )
        panel = float(mesh.tri_diameters.max())
        delta = offset * panel**2
        errors.append(trace_jumps(mesh, phi, lam, s, c, delta, faces=faces))
        h.append(panel)
        logger.debug(
            f"Jumps at h = {panel:.3f}: dirichlet {errors[-1].dirichlet:.2e}, "
            f"neumann {errors[-1].neumann:.2e}"
        )
    return JumpRefinement(h=h, errors=errors)
