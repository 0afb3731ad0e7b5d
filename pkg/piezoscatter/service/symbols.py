"""
Operator norms of Laplace-domain symbols in surrogate norms and the fit of
their growth exponents in |s| and 1/Re s.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.linalg import cholesky, lu_factor, lu_solve, solve_triangular
from scipy.stats import linregress

from piezoscatter.core.exceptions import ConfigError, SymbolFitError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.dto.report import SymbolSampleDTO
from piezoscatter.service.annulus import Annulus
from piezoscatter.service.boundary_ops import PotentialMatrices, assemble_operators
from piezoscatter.service.coupled_solver import assemble_system, riesz_weights
from piezoscatter.service.norms import half_spectrum

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
MIN_R_SQUARED = 0.95
SYMBOL_NAMES = ("single_layer", "double_layer", "inverse", "composition")

NormFunction = Callable[[complex], float]


def power_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    n: int,
    iterations: int = 60,
    rtol: float = 1e-6,
    seed: int = 0,
) -> float:
    """Largest singular value by power iteration on B^H B."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = apply_adjoint(apply(x))
        value = np.linalg.norm(y)
        if value == 0.0:
            return 0.0
        x = y / value
        previous, estimate = estimate, float(np.sqrt(value))
        if abs(estimate - previous) <= rtol * estimate:
            break
    return estimate


def matrix_norm(matrix: np.ndarray, **kwargs) -> float:
    """Spectral norm of a dense matrix by power iteration."""
    return power_norm(
        lambda x: matrix @ x,
        lambda y: matrix.conj().T @ y,
        matrix.shape[1],
        **kwargs,
    )


def annulus_map(annulus: Annulus, matrices: PotentialMatrices) -> np.ndarray:
    """
    Weighted map (phi, lambda) -> p on the annulus.

    Rows hold sqrt(w) times the value and the three gradient components of
    D phi - S lambda, so that the Euclidean norm is the parameter-1 H^1 norm.
    """
    root = np.sqrt(annulus.weights)[:, None]
    value = np.hstack([matrices.double, -matrices.single])
    grads = [
        np.hstack([matrices.double_grad[:, k], -matrices.single_grad[:, k]])
        for k in range(3)
    ]
    return np.vstack([root * value] + [root * g for g in grads])


def _single_layer_factor(mesh: CoupledMesh, c: float) -> np.ndarray:
    unit = assemble_operators(mesh, 1.0, c)
    gram = np.real(0.5 * (unit.V + unit.V.T))
    return cholesky(gram, lower=True)


def _half_inverse(mesh: CoupledMesh) -> np.ndarray:
    """R^-1 for the H^1/2 Gram factor R = diag(sqrt(roots)) V^T M."""
    roots, vectors, _ = half_spectrum(mesh)
    return vectors / np.sqrt(roots)[None, :]


def single_layer_norm(
    mesh: CoupledMesh, c: float = 1.0, annulus: Optional[Annulus] = None
) -> NormFunction:
    """s -> ||S(s)|| from the V(1)-energy space to H^1 of the annulus."""
    annulus = annulus or Annulus.around(mesh)
    factor = _single_layer_factor(mesh, c)
    n_d = len(mesh.boundary_vertices)

    def norm(s) -> float:
        block = annulus_map(annulus, annulus.potentials(mesh, s, c))[:, n_d:]
        # B = W S L^-H
        b = solve_triangular(factor.conj(), block.T, lower=True).T
        return matrix_norm(b)

    return norm


def double_layer_norm(
    mesh: CoupledMesh, c: float = 1.0, annulus: Optional[Annulus] = None
) -> NormFunction:
    """s -> ||D(s)|| from H^1/2 of the boundary to H^1 of the annulus."""
    annulus = annulus or Annulus.around(mesh)
    inverse = _half_inverse(mesh)
    n_d = len(mesh.boundary_vertices)

    def norm(s) -> float:
        block = annulus_map(annulus, annulus.potentials(mesh, s, c))[:, :n_d]
        return matrix_norm(block @ inverse)

    return norm


def inverse_norm(mesh: CoupledMesh, mat: MaterialParams) -> NormFunction:
    """s -> ||A^-1(s)|| with lumped-mass weights on data and solution."""

    def norm(s) -> float:
        system = assemble_system(mesh, mat, s)
        factor = lu_factor(system.matrix.toarray())
        root = np.sqrt(riesz_weights(system))
        return power_norm(
            lambda d: root * lu_solve(factor, root * d),
            lambda y: root * lu_solve(factor, root * y, trans=2),
            system.n_unknowns,
        )

    return norm


def composition_norm(
    mesh: CoupledMesh, mat: MaterialParams, annulus: Optional[Annulus] = None
) -> NormFunction:
    """
    s -> ||A_2(s) A^-1(s)||, where A_2 keeps (u, theta, phi) and maps the
    boundary densities to the exterior pressure on the annulus.
    """
    annulus = annulus or Annulus.around(mesh)

    def norm(s) -> float:
        system = assemble_system(mesh, mat, s)
        off = system.offsets
        factor = lu_factor(system.matrix.toarray())
        root = np.sqrt(riesz_weights(system))
        interior = slice(off["u"].start, off["phi"].stop)
        densities = slice(off["phi_gamma"].start, off["lambda"].stop)
        exterior = annulus_map(annulus, annulus.potentials(mesh, s, mat.sound_c))
        n_in = interior.stop - interior.start

        def apply(d):
            x = lu_solve(factor, root * d)
            return np.concatenate(
                [root[interior] * x[interior], exterior @ x[densities]]
            )

        def apply_adjoint(y):
            z = np.zeros(system.n_unknowns, dtype=complex)
            z[interior] = root[interior] * y[:n_in]
            z[densities] = exterior.conj().T @ y[n_in:]
            return root * lu_solve(factor, z, trans=2)

        return power_norm(apply, apply_adjoint, system.n_unknowns)

    return norm


def power_law(exponent: float) -> NormFunction:
    """s -> |s|^exponent."""
    return lambda s: abs(complex(s)) ** exponent


def build_symbol(
    name: str,
    mesh: CoupledMesh,
    mat: MaterialParams,
    annulus_factor: float = 2.0,
) -> NormFunction:
    """
    Norm function of a named symbol.

    Raises:
        ConfigError: For an unknown symbol name
    """
    annulus = Annulus.around(mesh, annulus_factor)
    builders: Dict[str, Callable[[], NormFunction]] = {
        "single_layer": lambda: single_layer_norm(mesh, mat.sound_c, annulus),
        "double_layer": lambda: double_layer_norm(mesh, mat.sound_c, annulus),
        "inverse": lambda: inverse_norm(mesh, mat),
        "composition": lambda: composition_norm(mesh, mat, annulus),
    }
    if name not in builders:
        raise ConfigError(
            f"unknown symbol {name!r}; expected one of {', '.join(SYMBOL_NAMES)}"
        )
    return builders[name]()


def estimate_symbol_index(
    norm_fn: NormFunction,
    sigma_lines: Sequence[float],
    omegas: Sequence[float],
    name: str = "symbol",
) -> SymbolSampleDTO:
    """
    Fit log ||A(s)|| against log |s| on each line Re s = sigma.

    mu_hat is the mean slope, reported only when every line fits with
    R^2 > 0.95; m_hat is minus the slope of the line intercepts against
    log sigma and needs two or more lines.

    Raises:
        SymbolFitError: For fewer than eight samples per line or for
            non-finite or vanishing norms
    """
    omegas = np.asarray(omegas, dtype=float)
    if len(omegas) < MIN_SAMPLES:
        raise SymbolFitError(
            f"need at least {MIN_SAMPLES} samples per line, got {len(omegas)}"
        )
    slopes, intercepts, r_squared, rows = [], [], [], []
    for sigma in sigma_lines:
        values = []
        for omega in omegas:
            s = LaplaceParameter(complex(sigma, omega))
            value = float(norm_fn(s.s))
            if not np.isfinite(value) or value <= 0.0:
                raise SymbolFitError(f"norm {value} at s = {s} cannot be fitted")
            values.append(value)
            rows.append([float(sigma), float(omega), s.modulus, value])
        modulus = np.abs(sigma + 1j * omegas)
        fit = linregress(np.log(modulus), np.log(values))
        slopes.append(float(fit.slope))
        intercepts.append(float(fit.intercept))
        r_squared.append(float(fit.rvalue**2))
        logger.debug(
            f"{name}: sigma = {sigma}, slope {fit.slope:.3f}, R^2 {fit.rvalue**2:.4f}"
        )

    worst_fit = min(r_squared)
    mu_hat = float(np.mean(slopes)) if worst_fit > MIN_R_SQUARED else None
    m_hat = None
    if len(sigma_lines) >= 2:
        m_hat = float(-linregress(np.log(sigma_lines), intercepts).slope)
    if mu_hat is None:
        logger.warning(f"{name}: poor power-law fit (R^2 = {worst_fit:.3f})")
    logger.info(f"Symbol {name}: mu_hat = {mu_hat}, m_hat = {m_hat}")
    return SymbolSampleDTO(
        name=name,
        sigmas=[float(x) for x in sigma_lines],
        mu_hat=mu_hat,
        m_hat=m_hat,
        r_squared=worst_fit,
        per_line_slopes=slopes,
        samples=rows,
    )
