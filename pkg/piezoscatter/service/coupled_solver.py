"""
Coupled FEM-BEM block system, its solution and the stability diagnostics.

Unknown ordering: u (3 N_v), theta (N_v), phi (N_v), the zero-mean
multiplier of phi (1), phi_Gamma (N_d, P1) and lambda_Gamma (N_n, P0).
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse import bmat, csc_matrix, csr_matrix, diags
from scipy.sparse.linalg import LinearOperator, gmres, splu
from scipy.stats import linregress

from piezoscatter.core.exceptions import (
    ConvergenceError,
    DimensionError,
    MaterialConstraintError,
    ProbeError,
    SingularSystemError,
)
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.core.settings import get_settings
from piezoscatter.dto.common import ComplexDTO
from piezoscatter.dto.config import ProblemConfigDTO
from piezoscatter.dto.report import EnergyNormsDTO, SolveReportDTO, SweepRowDTO
from piezoscatter.service.annulus import Annulus, exterior_field
from piezoscatter.service.boundary_ops import (
    BoundaryOperatorSet,
    assemble_operators,
    potential_matrices,
)
from piezoscatter.service.incident import ProblemData
from piezoscatter.service.interior_fem import (
    PHI,
    THETA,
    TRACE,
    U,
    InteriorBlocks,
    assemble_interior,
)
from piezoscatter.service.norms import (
    EnergyNormReport,
    energy_norms,
    h_half_norm,
    h_minus_half_norm,
)

logger = logging.getLogger(__name__)

FIELDS = ("u", "theta", "phi", "multiplier", "phi_gamma", "lambda")


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """
    Assembled operator and right-hand side at one Laplace parameter.

    ``row_scale`` holds the row weights when the system has been scaled.
    """

    s: LaplaceParameter
    mesh: CoupledMesh
    mat: MaterialParams
    interior: InteriorBlocks
    ops: BoundaryOperatorSet
    matrix: csr_matrix
    rhs: np.ndarray
    sizes: Tuple[int, ...]
    row_scale: Optional[np.ndarray] = None

    @property
    def n_unknowns(self) -> int:
        return int(sum(self.sizes))

    @cached_property
    def offsets(self) -> Dict[str, slice]:
        bounds = np.concatenate([[0], np.cumsum(self.sizes)])
        return {
            name: slice(int(bounds[i]), int(bounds[i + 1]))
            for i, name in enumerate(FIELDS)
        }

    def block(self, row: str, col: str):
        """Sub-matrix of the (row, col) field pair."""
        return self.matrix[self.offsets[row], :][:, self.offsets[col]]

    def split(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        x = np.asarray(x)
        if x.shape != (self.n_unknowns,):
            raise DimensionError(
                f"vector has shape {x.shape}, system has {self.n_unknowns} unknowns"
            )
        return {name: x[sl] for name, sl in self.offsets.items()}

    def join(self, blocks: Dict[str, np.ndarray]) -> np.ndarray:
        """Stack per-field blocks into one vector; missing fields are zero."""
        x = np.zeros(self.n_unknowns, dtype=complex)
        for name, values in blocks.items():
            sl = self.offsets[name]
            values = np.asarray(values)
            if values.shape != (sl.stop - sl.start,):
                raise DimensionError(
                    f"block {name!r} has shape {values.shape}, "
                    f"expected ({sl.stop - sl.start},)"
                )
            x[sl] = values
        return x

    def field_weights(self) -> Dict[str, complex]:
        """Scaling weights Z(s) per field row."""
        w_u, w_theta, w_phi, w_trace = self.s.scaling_weights()
        return {
            "u": w_u,
            "theta": w_theta,
            "phi": w_phi,
            "multiplier": w_phi,
            "phi_gamma": w_trace,
            "lambda": 1.0 + 0.0j,
        }

    def row_weights(self) -> np.ndarray:
        weights = self.field_weights()
        return np.concatenate(
            [np.full(n, weights[name]) for name, n in zip(FIELDS, self.sizes)]
        )

    def with_rhs(self, rhs: np.ndarray) -> "BlockSystem":
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.shape != (self.n_unknowns,):
            raise DimensionError(f"rhs has shape {rhs.shape}")
        if self.row_scale is not None:
            rhs = self.row_scale * rhs
        return replace(self, rhs=rhs)


def assemble_system(
    mesh: CoupledMesh,
    mat: MaterialParams,
    s,
    loads: Optional[Dict[str, np.ndarray]] = None,
    quad_order: Optional[int] = None,
    ops: Optional[BoundaryOperatorSet] = None,
) -> BlockSystem:
    """
    Assemble the coupled block operator at ``s``.

    Args:
        mesh: Validated coupled mesh
        mat: Material constants
        s: Laplace parameter
        loads: Right-hand side blocks keyed by field name
        quad_order: Boundary quadrature order
        ops: Boundary operators already assembled at ``s``

    Returns:
        BlockSystem with an unscaled matrix
    """
    s = LaplaceParameter.of(s)
    interior = assemble_interior(mesh, mat, s)
    if ops is None:
        ops = assemble_operators(mesh, s, mat.sound_c, quad_order)
    c = interior.couplings
    mean = csr_matrix(interior.mean_row[:, None])
    mixed = ops.mixed_mass
    rho_f = mat.rho_f
    blocks = [
        [interior.A_s, c[(U, THETA)], c[(U, PHI)], None, c[(U, TRACE)], None],
        [c[(THETA, U)], interior.B_s / mat.T0, c[(THETA, PHI)], None, None, None],
        [c[(PHI, U)], c[(PHI, THETA)], mat.dielectric_eps * interior.C_s, mean]
        + [None, None],
        [None, None, mean.T, None, None, None],
        [c[(TRACE, U)], None, None, None, csr_matrix(ops.W / rho_f)]
        + [csr_matrix(-(0.5 * mixed.T - ops.Kp) / rho_f)],
        [None, None, None, None, csr_matrix(0.5 * mixed - ops.K), csr_matrix(ops.V)],
    ]
    matrix = bmat(blocks, format="csr", dtype=complex)
    n_v = mesh.n_vertices
    sizes = (3 * n_v, n_v, n_v, 1, ops.spaces.n_dirichlet, ops.spaces.n_neumann)
    system = BlockSystem(
        s=s,
        mesh=mesh,
        mat=mat,
        interior=interior,
        ops=ops,
        matrix=matrix,
        rhs=np.zeros(matrix.shape[0], dtype=complex),
        sizes=sizes,
    )
    if loads:
        system = system.with_rhs(system.join(loads))
    logger.debug(f"Assembled block system at s = {s}: {system.n_unknowns} unknowns")
    return system


def assemble_rhs(
    config: ProblemConfigDTO, mesh: CoupledMesh, s
) -> Dict[str, np.ndarray]:
    """
    Galerkin loads of all five block rows; the boundary equation row is zero.

    Raises:
        TransformUnavailableError: If a wavelet has no closed-form transform
    """
    loads = ProblemData(mesh, config).laplace_loads(s)
    n_v, n_d, n_n = mesh.n_vertices, len(mesh.boundary_vertices), mesh.n_tris
    sizes = dict(zip(FIELDS, (3 * n_v, n_v, n_v, 1, n_d, n_n)))
    return {
        name: np.asarray(loads.get(name, np.zeros(n)), dtype=complex)
        for name, n in sizes.items()
    }


def apply_scaling(system: BlockSystem) -> BlockSystem:
    """Row-scaled copy diag(Z(s)) A; the solution is unchanged."""
    if system.row_scale is not None:
        return system
    weights = system.row_weights()
    return replace(
        system,
        matrix=(diags(weights) @ system.matrix).tocsr(),
        rhs=weights * system.rhs,
        row_scale=weights,
    )


@dataclass(frozen=True)
class SolveDiagnostics:
    """Residual, norms and stability ratio of one solve."""

    method: str
    residual: float
    tolerance: float
    energy: EnergyNormReport
    solution_norm: float
    rhs_norm: float
    stability_ratio: float
    multiplier: complex
    interior_pressure_max: Optional[float] = None
    exterior_pressure_max: Optional[float] = None


@dataclass(frozen=True, eq=False)
class CoupledSolution:
    """Solution vector of a block system with its diagnostics."""

    system: BlockSystem
    x: np.ndarray
    diagnostics: SolveDiagnostics

    @property
    def fields(self) -> Dict[str, np.ndarray]:
        return self.system.split(self.x)

    def pressure(self, points) -> np.ndarray:
        """Scattered pressure D phi_Gamma - S lambda_Gamma at off-surface points."""
        f = self.fields
        system = self.system
        matrices = potential_matrices(system.mesh, system.s, system.mat.sound_c, points)
        return matrices.apply(f["phi_gamma"], f["lambda"])

    def to_dto(self) -> SolveReportDTO:
        d = self.diagnostics
        e = d.energy
        return SolveReportDTO(
            s=ComplexDTO.from_complex(self.system.s.s),
            n_unknowns=self.system.n_unknowns,
            block_sizes=list(self.system.sizes),
            method=d.method,
            residual=d.residual,
            tolerance=d.tolerance,
            energy_norms=EnergyNormsDTO(
                u=e.u_norm,
                theta=e.theta_norm,
                phi=e.phi_norm,
                phi_l2=e.phi_l2,
                p=e.p_norm,
            ),
            solution_norm=d.solution_norm,
            rhs_norm=d.rhs_norm,
            stability_ratio=d.stability_ratio,
            interior_pressure_max=d.interior_pressure_max,
            exterior_pressure_max=d.exterior_pressure_max,
            multiplier=ComplexDTO.from_complex(d.multiplier),
        )


def _lumped(matrix) -> np.ndarray:
    return np.asarray(abs(matrix).sum(axis=1)).ravel()


def riesz_weights(system: BlockSystem) -> np.ndarray:
    """Lumped mass per unknown; rhs norms divide by it, solution norms multiply."""
    forms = system.interior.forms
    spaces = system.ops.spaces
    volume = _lumped(forms.mass)
    return np.concatenate(
        [
            np.repeat(volume, 3),
            volume,
            volume,
            [system.mesh.volume],
            _lumped(spaces.dirichlet_mass),
            spaces.neumann_mass,
        ]
    )


def rhs_norm(system: BlockSystem, rhs: Optional[np.ndarray] = None) -> float:
    """Riesz surrogate of the dual norm of the unscaled right-hand side."""
    rhs = system.rhs if rhs is None else rhs
    if system.row_scale is not None and rhs is system.rhs:
        rhs = rhs / system.row_scale
    return float(np.sqrt(np.sum(np.abs(rhs) ** 2 / riesz_weights(system))))


def solution_norm(system: BlockSystem, x: np.ndarray) -> float:
    """Energy norms of (u, theta, phi) with H^1/2 and L2 surrogates on Gamma."""
    f = system.split(x)
    energy = energy_norms(
        system.mesh, system.mat, system.s, f["u"], f["theta"], f["phi"]
    )
    lam = f["lambda"]
    lam2 = float(np.real(np.vdot(lam, system.ops.spaces.neumann_mass * lam)))
    total = (
        energy.u_norm**2
        + energy.theta_norm**2
        + energy.phi_norm**2
        + h_half_norm(system.mesh, f["phi_gamma"]) ** 2
        + lam2
    )
    return float(np.sqrt(total))


def stability_bound(s) -> float:
    """|s|^3 / (sigma sigma_-^6)."""
    s = LaplaceParameter.of(s)
    return s.modulus**3 / (s.sigma * s.sigma_under**6)


def _indices(sl: slice) -> np.ndarray:
    return np.arange(sl.start, sl.stop)


class _BlockJacobi:
    """Factorized diagonal field blocks of a (scaled) system."""

    GROUPS = (("u",), ("theta",), ("phi", "multiplier"), ("phi_gamma", "lambda"))

    def __init__(self, system: BlockSystem):
        self.parts = []
        for group in self.GROUPS:
            index = np.concatenate(
                [_indices(system.offsets[n]) for n in group]
            )
            sub = system.matrix[index, :][:, index]
            if "lambda" in group:
                self.parts.append((index, "dense", lu_factor(sub.toarray())))
            else:
                self.parts.append((index, "sparse", splu(csc_matrix(sub))))

    def apply(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r, dtype=complex)
        for index, kind, factor in self.parts:
            if kind == "dense":
                out[index] = lu_solve(factor, r[index])
            else:
                out[index] = factor.solve(np.asarray(r[index], dtype=complex))
        return out


def _factorize(system: BlockSystem):
    dense = system.matrix.toarray()
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            factor = lu_factor(dense)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError):
            condition = float(np.linalg.cond(dense))
            logger.error(f"Block system at s = {system.s} is singular")
            raise SingularSystemError(system.s.s, condition)
    return factor


def solve(
    system: BlockSystem,
    tol: float = 1e-8,
    method: str = "auto",
    max_iter: int = 500,
    probes: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> CoupledSolution:
    """
    Solve the block system by dense LU or preconditioned GMRES.

    GMRES runs on the Z(s)-scaled system with a block-Jacobi preconditioner
    built from the diagonal field blocks. The reported residual is relative
    to the system actually solved, so for GMRES it is the scaled one.

    Args:
        system: Assembled system (scaled or not)
        tol: Relative residual tolerance
        method: ``auto``, ``lu`` or ``gmres``
        max_iter: GMRES iteration cap
        probes: Optional (interior, exterior) probe arrays for pressure maxima

    Raises:
        SingularSystemError: If the matrix cannot be factorized
        ConvergenceError: If GMRES stops above ``tol``
    """
    if method == "auto":
        threshold = get_settings().iterative_threshold
        method = "lu" if system.n_unknowns <= threshold else "gmres"
    solved, info = system, 0
    if method == "lu":
        x = lu_solve(_factorize(system), system.rhs)
    elif method == "gmres":
        solved = scaled = apply_scaling(system)
        pre = _BlockJacobi(scaled)
        operator = LinearOperator(
            scaled.matrix.shape, matvec=pre.apply, dtype=complex
        )
        x, info = gmres(
            scaled.matrix, scaled.rhs, rtol=tol, restart=100, maxiter=max_iter,
            M=operator,
        )
    else:
        raise DimensionError(f"unknown solver method {method!r}")
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(system.s.s, None)

    b = solved.rhs
    b_norm = np.linalg.norm(b)
    residual = np.linalg.norm(solved.matrix @ x - b)
    residual = float(residual / b_norm) if b_norm > 0 else float(residual)
    if method == "gmres" and (info != 0 or residual > tol):
        logger.error(f"GMRES stopped at s = {system.s} (info {info})")
        raise ConvergenceError(system.s.s, residual, tol)
    f = system.split(x)
    energy = energy_norms(
        system.mesh, system.mat, system.s, f["u"], f["theta"], f["phi"]
    )
    x_norm = solution_norm(system, x)
    d_norm = rhs_norm(system)
    ratio = x_norm / (d_norm * stability_bound(system.s)) if d_norm > 0 else 0.0
    diagnostics = SolveDiagnostics(
        method=method,
        residual=residual,
        tolerance=tol,
        energy=energy,
        solution_norm=x_norm,
        rhs_norm=d_norm,
        stability_ratio=float(ratio),
        multiplier=complex(f["multiplier"][0]),
    )
    solution = CoupledSolution(system=system, x=x, diagnostics=diagnostics)
    if probes is not None:
        interior, exterior = probes
        report = interior_vanishing_check(solution, interior, exterior)
        solution = replace(
            solution,
            diagnostics=replace(
                diagnostics,
                interior_pressure_max=report.interior_max,
                exterior_pressure_max=report.exterior_max,
            ),
        )
    logger.info(
        f"Solved s = {system.s} ({method}, {system.n_unknowns} unknowns): "
        f"residual {residual:.2e}, ratio {ratio:.3e}"
    )
    return solution


def solve_problem(
    config: ProblemConfigDTO,
    mesh: CoupledMesh,
    s,
    quad_order: Optional[int] = None,
    probes: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> CoupledSolution:
    """Assemble the loads and the system from a configuration and solve."""
    mat = config.material_params()
    loads = assemble_rhs(config, mesh, s)
    order = quad_order or config.solver.quad_order
    system = assemble_system(mesh, mat, s, loads, quad_order=order)
    return solve(
        system,
        tol=config.solver.tol,
        method=config.solver.method,
        max_iter=config.solver.max_iter,
        probes=probes,
    )


@dataclass(frozen=True)
class CoercivityReport:
    """Smallest observed coercivity ratio with the constants in the lower bound."""

    min_ratio: float
    c1: float
    c2: float
    n_samples: int


def coercivity_probe(
    system: BlockSystem,
    n_samples: int = 1000,
    seed: int = 0,
    annulus: Optional[Annulus] = None,
    annulus_factor: float = 2.0,
) -> CoercivityReport:
    """
    Rayleigh ratio Re(x^H Z A x) / lower bound over random discrete tuples.

    The multiplier is zero and lambda_Gamma is the discrete exterior Neumann
    data of phi_Gamma, so the boundary rows of Z A carry the exterior energy
    of D phi_Gamma - S lambda_Gamma. The bound takes that energy on the
    annulus only.

    Raises:
        MaterialConstraintError: If c1 or c2 is not positive
    """
    mat = system.mat
    if mat.c1 <= 0.0 or mat.c2 <= 0.0:
        raise MaterialConstraintError(mat.pyro_norm, mat.dielectric_eps, mat.heat_ratio)
    s = system.s
    scaled = apply_scaling(system)
    off = scaled.offsets

    forms = system.interior.forms
    energy_u = forms.elastic(mat) + (mat.rho_e * s.modulus**2) * forms.vector_mass
    annulus = annulus or Annulus.around(system.mesh, annulus_factor)
    potentials = annulus.potentials(system.mesh, s, mat.sound_c)
    ops = system.ops
    v_factor = lu_factor(ops.V)
    neumann_map = lu_solve(v_factor, ops.K - 0.5 * ops.mixed_mass)

    scale = s.sigma * s.sigma_under**2 / s.modulus**2
    w_theta = mat.c1 * min(1.0, mat.c_eps**2)
    w_p = min(1.0, 1.0 / mat.rho_f)
    rng = np.random.default_rng(seed)
    names = ("u", "theta", "phi", "phi_gamma")
    sizes = [off[n].stop - off[n].start for n in names]

    def quad(matrix, x):
        return float(np.real(np.vdot(x, matrix @ x)))

    worst = np.inf
    for _ in range(n_samples):
        parts = []
        active = rng.random(4) < 0.8
        if not active.any():
            active[rng.integers(4)] = True
        for n, on in zip(sizes, active):
            amp = 10.0 ** rng.uniform(-2.0, 2.0) if on else 0.0
            parts.append(amp * (rng.standard_normal(n) + 1j * rng.standard_normal(n)))
        u, theta, phi, trace = parts
        lam = neumann_map @ trace
        x = scaled.join(dict(zip(names, parts), **{"lambda": lam}))
        form = np.real(np.vdot(x, scaled.matrix @ x))
        field = exterior_field(annulus, potentials, trace, lam)
        p_energy = field.energy(s, mat.sound_c)

        theta_energy = quad(forms.laplace, theta) + s.modulus / mat.c_eps * quad(
            forms.mass, theta
        )
        bound = scale * (
            quad(energy_u, u)
            + w_theta * theta_energy
            + mat.c2 * quad(forms.laplace, phi)
            + w_p * p_energy
        )
        if bound > 0.0:
            worst = min(worst, form / bound)
    logger.info(
        f"Coercivity probe at s = {s}: min ratio {worst:.6f} over {n_samples} samples "
        f"(c1 = {mat.c1:.3g}, c2 = {mat.c2:.3g})"
    )
    return CoercivityReport(
        min_ratio=float(worst), c1=mat.c1, c2=mat.c2, n_samples=n_samples
    )


def stability_sweep(
    config: ProblemConfigDTO,
    mesh: CoupledMesh,
    s_values: Sequence,
    workers: Optional[int] = None,
) -> List[SweepRowDTO]:
    """
    Solution norm against the |s|^3 / (sigma sigma_-^6) bound over ``s_values``.

    Independent frequencies are solved in a thread pool.
    """
    workers = max(1, workers or get_settings().workers)

    def row(s) -> SweepRowDTO:
        solution = solve_problem(config, mesh, s)
        d = solution.diagnostics
        return SweepRowDTO(
            s=ComplexDTO.from_complex(LaplaceParameter.of(s).s),
            solution_norm=d.solution_norm,
            rhs_norm=d.rhs_norm,
            bound=stability_bound(s),
            ratio=d.stability_ratio,
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(row, s_values))
    logger.info(f"Stability sweep over {len(rows)} frequencies done")
    return rows


def growth_exponent(rows: Sequence[SweepRowDTO]) -> float:
    """Log-log slope of solution_norm / rhs_norm against |s|."""
    if len(rows) < 2:
        raise DimensionError("growth exponent needs at least two sweep rows")
    modulus = np.array([abs(r.s.to_complex()) for r in rows])
    gain = np.array([r.solution_norm / r.rhs_norm for r in rows])
    return float(linregress(np.log(modulus), np.log(gain)).slope)


@dataclass(frozen=True)
class VanishingReport:
    """Largest represented pressure inside the solid and outside it."""

    interior_max: float
    exterior_max: float

    @property
    def ratio(self) -> float:
        if self.exterior_max == 0.0:
            return 0.0
        return self.interior_max / self.exterior_max


def default_probes(mesh: CoupledMesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interior probes one panel diameter from the boundary and six exterior
    probes at 1.5 times the circumradius.

    Raises:
        ProbeError: If no interior point is far enough from the boundary
    """
    h = float(mesh.tri_diameters.max())
    candidates = np.vstack([mesh.center[None, :], mesh.tet_centroids])
    inside = mesh.contains(candidates)
    distance = mesh.distance_to_boundary(candidates)
    interior = candidates[inside & (distance >= h)]
    if len(interior) == 0:
        raise ProbeError("no interior probe lies one panel diameter from the boundary")
    axes = np.vstack([np.eye(3), -np.eye(3)])
    exterior = mesh.center + 1.5 * mesh.circumradius * axes
    return interior, exterior


def interior_vanishing_check(
    solution: CoupledSolution,
    interior: Optional[np.ndarray] = None,
    exterior: Optional[np.ndarray] = None,
) -> VanishingReport:
    """
    max |D phi_Gamma - S lambda_Gamma| at interior probes against exterior probes.

    Raises:
        ProbeError: If an interior probe is closer than one panel diameter to
            the boundary or outside the solid
    """
    mesh = solution.system.mesh
    default_in, default_out = (None, None)
    if interior is None or exterior is None:
        default_in, default_out = default_probes(mesh)
    interior = default_in if interior is None else np.atleast_2d(interior)
    exterior = default_out if exterior is None else np.atleast_2d(exterior)
    h = float(mesh.tri_diameters.max())
    if not np.all(mesh.contains(interior)) or np.any(
        mesh.distance_to_boundary(interior) < h
    ):
        raise ProbeError("interior probes must lie one panel diameter inside")
    inner = np.abs(solution.pressure(interior)).max()
    outer = np.abs(solution.pressure(exterior)).max()
    return VanishingReport(interior_max=float(inner), exterior_max=float(outer))


@dataclass(frozen=True)
class ContinuityReport:
    """Largest sampled |y^H Z A x| / (||x|| ||y||), also over (|s|/sigma_-)^2."""

    max_ratio: float
    normalized: float


def continuity_audit(
    system: BlockSystem, n_samples: int = 50, seed: int = 0
) -> ContinuityReport:
    """Sample the continuity constant of the scaled form."""
    scaled = apply_scaling(system)
    rng = np.random.default_rng(seed)
    n = system.n_unknowns
    worst = 0.0
    for _ in range(n_samples):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        value = abs(np.vdot(y, scaled.matrix @ x))
        norms = solution_norm(system, x) * solution_norm(system, y)
        worst = max(worst, value / norms)
    s = system.s
    return ContinuityReport(
        max_ratio=float(worst),
        normalized=float(worst / (s.modulus / s.sigma_under) ** 2),
    )


@dataclass(frozen=True)
class TraceAudit:
    """Surrogate trace norms of the densities with their bound factors."""

    phi_half: float
    lambda_minus_half: float
    phi_weighted: float
    lambda_weighted: float


def trace_audit(
    solution: CoupledSolution, unit_ops: Optional[BoundaryOperatorSet] = None
) -> TraceAudit:
    """
    H^1/2 norm of phi_Gamma and V(1)-energy norm of lambda_Gamma, weighted by
    sigma_-^2 / c1 and sigma_- / |s| and divided by the rhs norm.
    """
    system = solution.system
    mesh, mat, s = system.mesh, system.mat, system.s
    if unit_ops is None:
        unit_ops = assemble_operators(mesh, 1.0, 1.0)
    f = solution.fields
    phi_norm = h_half_norm(mesh, f["phi_gamma"])
    lam_norm = h_minus_half_norm(unit_ops, f["lambda"])
    data = max(solution.diagnostics.rhs_norm, 1e-300)
    return TraceAudit(
        phi_half=phi_norm,
        lambda_minus_half=lam_norm,
        phi_weighted=s.sigma_under**2 / mat.c1 * phi_norm / data,
        lambda_weighted=s.sigma_under / s.modulus * lam_norm / data,
    )


@dataclass(frozen=True)
class UniquenessReport:
    """Norm of the zero-rhs solution and the smallest singular value."""

    zero_rhs_norm: float
    min_singular: Optional[float]


def uniqueness_check(system: BlockSystem, svd_limit: int = 2500) -> UniquenessReport:
    """Solve with zero data; report sigma_min when the system is small enough."""
    zero = solve(system.with_rhs(np.zeros(system.n_unknowns)), method="lu")
    sigma_min = None
    if system.n_unknowns <= svd_limit:
        sigma_min = float(
            np.linalg.svd(system.matrix.toarray(), compute_uv=False).min()
        )
    return UniquenessReport(
        zero_rhs_norm=float(np.linalg.norm(zero.x)), min_singular=sigma_min
    )
