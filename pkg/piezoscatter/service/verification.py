"""
Verification suites.

Each suite returns a list of checks; a check passes when its slack is
non-negative. ``run_suite`` gathers them into one report.
"""

import logging
import time
from dataclasses import replace
from typing import Callable, Dict, List

import numpy as np

from piezoscatter.core.exceptions import ConfigError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.dto.config import MaterialDTO, ProblemConfigDTO
from piezoscatter.dto.report import CheckResultDTO, VerificationReportDTO
from piezoscatter.service import primitives
from piezoscatter.service.annulus import Annulus, exterior_field
from piezoscatter.service.boundary_ops import (
    assemble_operators,
    calderon_residual,
    jump_refinement,
    potential_matrices,
)
from piezoscatter.service.constitutive import PiezoTensor
from piezoscatter.service.coupled_solver import (
    assemble_system,
    coercivity_probe,
    continuity_audit,
    growth_exponent,
    interior_vanishing_check,
    solve,
    solve_problem,
    stability_sweep,
    uniqueness_check,
)
from piezoscatter.service.cq_time import (
    CQPlan,
    conjugate_symmetry_defect,
    cq_apply,
    evaluate_frequencies,
    p2_operator,
    scalar_symbol,
    solve_time_domain,
)
from piezoscatter.service.incident import ProblemData
from piezoscatter.service.interior_fem import (
    THETA,
    U,
    assemble_interior,
    coupling_skew_check,
    pyro_slack,
    real_part_identities,
)
from piezoscatter.service.kernel import eval_kernel, kernel_value, verify_pde
from piezoscatter.service.norms import (
    check_norm_equivalences,
    energy_norm_u,
    h_half_norm,
    korn_ratio_bounds,
)
from piezoscatter.service.quadrature import (
    pair_integral,
    singular_rule,
    static_integrals,
    triangle_rule,
)
from piezoscatter.service.sphere import elastic_sphere_monopole, sphere_oracle
from piezoscatter.service.symbols import (
    build_symbol,
    estimate_symbol_index,
    power_law,
)

logger = logging.getLogger(__name__)

S_TEST = 1.0 + 1.0j
SUITES = ("kernel", "boundary", "interior", "coupled", "cq", "norms")


def check(
    suite: str, quantity: str, identity: str, expected, actual, slack
) -> CheckResultDTO:
    slack = float(slack)
    return CheckResultDTO(
        suite=suite,
        quantity=quantity,
        identity=identity,
        expected=float(expected),
        actual=float(actual),
        slack=slack,
        passed=bool(np.isfinite(slack) and slack >= 0.0),
    )


def upper(suite: str, quantity: str, identity: str, actual, bound) -> CheckResultDTO:
    """Check ``actual <= bound``."""
    return check(suite, quantity, identity, bound, actual, bound - actual)


def sample_material() -> MaterialParams:
    example = MaterialDTO.model_config["json_schema_extra"]["example"]
    return MaterialDTO.model_validate(example).to_domain()


def stiff_decoupled_material() -> MaterialParams:
    """Elastic-acoustic limit with lambda = mu = 10."""
    return replace(sample_material().decoupled(), lame_lambda=10.0, lame_mu=10.0)


def sample_config(**overrides) -> ProblemConfigDTO:
    """Sample material hit by a Gaussian plane wave along +z."""
    document = {
        "material": MaterialDTO.model_config["json_schema_extra"]["example"],
        "incident": {
            "type": "plane_wave",
            "direction": [0.0, 0.0, 1.0],
            "reference_point": [0.5, 0.5, -1.0],
            "wavelet": {"name": "gaussian_pulse", "a": 4.0, "t0": 3.0, "omega0": 3.0},
        },
    }
    document.update(overrides)
    return ProblemConfigDTO.model_validate(document)


def broadband_config() -> ProblemConfigDTO:
    """Sample material hit by a short unmodulated pulse with a wide spectrum."""
    return sample_config(
        incident={
            "type": "plane_wave",
            "direction": [0.0, 0.0, 1.0],
            "reference_point": [0.5, 0.5, -1.0],
            "wavelet": {
                "name": "gaussian_pulse",
                "a": 400.0,
                "t0": 0.25,
                "omega0": 0.0,
            },
        }
    )


def _random(rng, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def kernel_suite(seed: int) -> List[CheckResultDTO]:
    suite = "kernel"
    rng = np.random.default_rng(seed)
    out = []

    directions = rng.standard_normal((20, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    grid = directions * rng.uniform(0.5, 1.5, 20)[:, None]
    coarse = verify_pde(grid, np.zeros(3), S_TEST, 1.0, 0.02)
    fine = verify_pde(grid, np.zeros(3), S_TEST, 1.0, 0.01)
    order = np.log2(coarse / fine)
    out.append(
        check(suite, "fd_residual_order", "pde", 2.0, order, 0.3 - abs(order - 2.0))
    )

    x, y = rng.standard_normal((2, 3))
    forward = eval_kernel(x, y, S_TEST, 1.0).value
    backward = eval_kernel(y, x, S_TEST, 1.0).value
    defect = abs(forward - backward)
    out.append(upper(suite, "symmetry_defect", "E(x,y) = E(y,x)", defect, 1e-14))

    r = np.linspace(0.05, 8.0, 400)
    steps = np.diff(np.abs(kernel_value(r, S_TEST)))
    out.append(upper(suite, "decay_step_max", "monotone decay", steps.max(), 0.0))

    tri = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    normal = np.array([0.0, 0.0, 1.0])

    def static(a, b):
        return 1.0 / np.linalg.norm(a - b, axis=-1)

    numeric = pair_integral(static, tri, tri, singular_rule("coincident", 5))
    outer = triangle_rule(12)
    xs = outer.points_x @ tri
    inner = static_integrals(
        xs, np.repeat(tri[None], len(xs), axis=0), np.tile(normal, (len(xs), 1))
    )
    reference = float(np.sum(outer.weights * inner.s0))
    error = abs(numeric - reference) / reference
    out.append(upper(suite, "coincident_rule_error", "int int 1/r", error, 1e-3))
    return out


def boundary_suite(seed: int) -> List[CheckResultDTO]:
    suite = "boundary"
    out = []
    coarse, fine = primitives.icosphere(1), primitives.icosphere(2)
    ops_coarse = assemble_operators(coarse, 1.0, 1.0)
    ops_fine = assemble_operators(fine, 1.0, 1.0)

    v_defect, w_defect = ops_fine.symmetry_defects()
    out.append(upper(suite, "V_symmetry", "V = V^T", v_defect, 1e-8))
    out.append(upper(suite, "W_symmetry", "W = W^T", w_defect, 1e-8))

    res_coarse = calderon_residual(ops_coarse, seed=seed)
    res_fine = calderon_residual(ops_fine, seed=seed)
    out.append(upper(suite, "calderon_residual", "C^2 = C", res_coarse, 0.1))
    reduction = res_coarse / res_fine if res_fine > 0 else np.inf
    out.append(
        check(suite, "calderon_reduction", "C^2 = C", 2.0, reduction, reduction - 2.0)
    )

    # <V 1, 1> / |Gamma| is the degree-0 eigenvalue on the unit sphere
    ones = np.ones(fine.n_tris)
    area = np.sum(ops_fine.spaces.neumann_mass)
    rayleigh = np.real(ones @ ops_fine.V @ ones) / area
    exact = sphere_oracle(0, 1.0, 1.0).V.real
    error = abs(rayleigh - exact) / exact
    out.append(
        check(suite, "sphere_V_degree0", "series", exact, rayleigh, 0.03 - error)
    )

    jumps = jump_refinement([coarse, fine], S_TEST, 1.0, seed=seed)
    for kind, identity in (("dirichlet", "[p] = phi"), ("neumann", "[d_n p] = lambda")):
        order = jumps.order(kind)
        out.append(
            check(suite, f"{kind}_jump_order", identity, 0.5, order, order - 0.5)
        )
    return out


def interior_suite(seed: int) -> List[CheckResultDTO]:
    suite = "interior"
    rng = np.random.default_rng(seed)
    mesh = primitives.cube(2)
    mat = sample_material()
    blocks = assemble_interior(mesh, mat, S_TEST)
    n, n_d = mesh.n_vertices, len(mesh.boundary_vertices)
    out = []

    divergence = blocks.G_div.copy()
    divergence.data *= 1.0 + 1e-6 * rng.standard_normal(divergence.nnz)
    perturbed = dict(blocks.couplings)
    perturbed[(U, THETA)] = -mat.zeta * divergence

    worst_identity, worst_skew, worst_pyro, fault = 0.0, 0.0, np.inf, 0.0
    for _ in range(100):
        u, theta, phi = _random(rng, 3 * n), _random(rng, n), _random(rng, n)
        worst_identity = max(
            worst_identity, real_part_identities(blocks, u, theta, phi).worst
        )
        fields = (u, theta, phi, _random(rng, n_d))
        worst_skew = max(worst_skew, coupling_skew_check(blocks, fields))
        fault = max(fault, coupling_skew_check(blocks, fields, couplings=perturbed))
        worst_pyro = min(worst_pyro, pyro_slack(blocks, theta, phi))
    out.append(
        upper(suite, "real_part_identity", "Re Z A diagonal", worst_identity, 1e-10)
    )
    out.append(upper(suite, "skew_coupling", "Re skew pairs = 0", worst_skew, 1e-12))
    out.append(
        check(
            suite, "skew_fault_detected", "perturbed G_div", 1e-8, fault, fault - 1e-8
        )
    )
    out.append(
        check(suite, "pyro_slack", "Cauchy-Schwarz", 0.0, worst_pyro, worst_pyro)
    )

    residual = blocks.rigid_kernel_residual()
    out.append(upper(suite, "rigid_kernel_residual", "K_e r = 0", residual, 1e-10))
    dimension = blocks.elastic_kernel_dimension()
    out.append(
        check(
            suite,
            "elastic_kernel_dim",
            "rigid motions",
            6,
            dimension,
            0.5 - abs(dimension - 6),
        )
    )

    tensor = PiezoTensor.from_material(mat)
    defect = 0.0
    for _ in range(100):
        strain = rng.standard_normal((3, 3))
        strain = 0.5 * (strain + strain.T)
        field = rng.standard_normal(3)
        left = field @ tensor.apply(strain)
        right = np.sum(strain * tensor.adjoint(field))
        defect = max(defect, abs(left - right) / max(abs(left), 1.0))
    out.append(upper(suite, "piezo_adjoint", "E.(e eps) = eps:(e^T E)", defect, 1e-12))
    return out


def coupled_suite(seed: int) -> List[CheckResultDTO]:
    suite = "coupled"
    out = []
    mesh = primitives.cube(4)
    config = sample_config()
    mat = config.material_params()

    solution = solve_problem(config, mesh, S_TEST)
    system = solution.system
    d = solution.diagnostics
    out.append(upper(suite, "solve_residual", "A x = d", d.residual, 1e-8))

    rng = np.random.default_rng(seed)
    frequencies = rng.uniform(0.2, 3.0, 5) + 1j * rng.uniform(-6.0, 6.0, 5)
    worst_ratio = min(
        coercivity_probe(
            assemble_system(mesh, mat, complex(s)), n_samples=1000, seed=seed
        ).min_ratio
        for s in frequencies
    )
    out.append(
        check(
            suite,
            "coercivity_ratio",
            "Re x^H Z A x >= bound",
            1.0,
            worst_ratio,
            worst_ratio - 1.0 + 1e-10,
        )
    )

    coarse, fine = primitives.icosphere(1), primitives.icosphere(2)
    ratio_coarse = interior_vanishing_check(solve_problem(config, coarse, S_TEST)).ratio
    ratio_fine = interior_vanishing_check(solve_problem(config, fine, S_TEST)).ratio
    out.append(
        upper(suite, "interior_pressure_ratio", "p = 0 inside", ratio_coarse, 0.1)
    )
    out.append(
        upper(
            suite,
            "interior_pressure_refined",
            "p = 0 inside",
            ratio_fine,
            ratio_coarse,
        )
    )

    omegas = np.linspace(1.0, 100.0, 12)
    rows = stability_sweep(broadband_config(), mesh, [complex(1.0, w) for w in omegas])
    worst = max(r.ratio for r in rows)
    out.append(upper(suite, "stability_ratio_max", "stability bound", worst, 1e2))
    exponent = growth_exponent(rows)
    out.append(upper(suite, "growth_exponent", "||A^-1|| ~ |s|^3.5", exponent, 4.0))

    continuity = continuity_audit(system, n_samples=20, seed=seed)
    out.append(
        upper(suite, "continuity", "bounded form", continuity.normalized, 1e3)
    )

    uniqueness = uniqueness_check(system)
    out.append(
        upper(suite, "zero_data", "uniqueness", uniqueness.zero_rhs_norm, 1e-12)
    )

    out.append(_monopole_check(suite))
    logger.debug(f"Coupled suite on {mesh.n_vertices} vertices, c1 = {mat.c1:.3g}")
    return out


def _monopole_check(suite: str) -> CheckResultDTO:
    """Scattered pressure of a centred point source against the radial oracle."""
    mesh = primitives.icosphere(2)
    mat = stiff_decoupled_material()
    config = sample_config(
        incident={
            "type": "point_source",
            "source": [0.0, 0.0, 0.0],
            "wavelet": {"name": "gaussian_pulse", "a": 4.0, "t0": 3.0, "omega0": 3.0},
        }
    )
    # the incident loads only see the fluid constants, shared by both materials
    data = ProblemData(mesh, config)
    loads: Dict[str, np.ndarray] = {}
    for pattern in data.patterns(S_TEST):
        for block, values in pattern.blocks.items():
            loads[block] = loads.get(block, 0.0) + values
    system = assemble_system(mesh, mat, S_TEST, loads)
    fields = solve(system, method="lu").fields
    points = 2.0 * np.vstack([np.eye(3), -np.eye(3)])
    numeric = potential_matrices(mesh, S_TEST, mat.sound_c, points).apply(
        fields["phi_gamma"], fields["lambda"]
    )
    oracle = elastic_sphere_monopole(mat, S_TEST).scattered_pressure(2.0)
    error = float(np.abs(numeric - oracle).max() / abs(oracle))
    return check(suite, "monopole_pressure", "sphere oracle", 0.0, error, 0.05 - error)


def cq_suite(seed: int) -> List[CheckResultDTO]:
    suite = "cq"
    rng = np.random.default_rng(seed)
    out = []

    plan = CQPlan("bdf2", 0.05, 40, eps_target=1e-10)
    samples = rng.standard_normal(plan.n_frequencies)
    identity = cq_apply(plan, scalar_symbol(lambda s: 1.0), samples)
    error = np.abs(identity - samples).max()
    out.append(upper(suite, "identity_symbol", "1 * g = g", error, 1e-10))

    errors = []
    for dt in (0.02, 0.01):
        delay = CQPlan("bdf2", dt, int(round(2.0 / dt)))
        g = np.sin(delay.times)
        y = cq_apply(delay, scalar_symbol(lambda s: np.exp(-s)), g).real
        errors.append(abs(y[-1] - np.sin(1.0)))
    out.append(upper(suite, "delay_error", "e^{-s} g = g(t-1)", errors[-1], 1e-3))
    order = np.log2(errors[0] / errors[1])
    out.append(
        check(suite, "bdf2_order", "rule order", 2.0, order, 0.3 - abs(order - 2.0))
    )

    pulse_plan = CQPlan("bdf2", 0.05, 120)
    pulse = np.exp(-4.0 * (pulse_plan.times - 3.0) ** 2)
    pulse[pulse_plan.times < 3.0 - 2.5] = 0.0
    response = cq_apply(
        pulse_plan,
        scalar_symbol(lambda s: 1.0 / (1.0 + s)),
        pulse,
        conjugate_symmetric=True,
    )
    early = np.abs(response[pulse_plan.times < 0.5]).max() / np.abs(response).max()
    out.append(upper(suite, "causality", "output = 0 before onset", early, 1e-6))

    def resolvent(ell: int, s: complex) -> np.ndarray:
        return np.array([1.0 / (1.0 + s)])

    values = evaluate_frequencies(pulse_plan, resolvent, conjugate_symmetric=True)
    defect = conjugate_symmetry_defect(pulse_plan, resolvent, values)
    out.append(
        upper(suite, "conjugate_symmetry", "A(conj s) = conj A(s)", defect, 1e-10)
    )

    coupled = solve_time_domain(
        sample_config(), primitives.reference_tet(), CQPlan("bdf2", 0.25, 16)
    )
    out.append(
        upper(
            suite,
            "coupled_causality",
            "x = 0 before first arrival",
            coupled.causality_residual(),
            1e-6,
        )
    )
    out.append(
        upper(
            suite,
            "coupled_conjugate_symmetry",
            "A(conj s) = conj A(s)",
            coupled.imaginary_residue,
            1e-8,
        )
    )

    t = pulse_plan.times
    p2 = p2_operator(t**2, pulse_plan.dt)
    defect = np.abs(p2[1:-1] - (t**2 + 4 * t + 2)[1:-1]).max()
    out.append(upper(suite, "p2_quadratic", "D + 2D' + D''", defect, 1e-8))

    sample = estimate_symbol_index(
        power_law(3.0), [0.5, 1.0], np.linspace(1.0, 20.0, 10), name="s^3"
    )
    mu = sample.mu_hat if sample.mu_hat is not None else np.inf
    out.append(check(suite, "power_law_index", "|s|^3", 3.0, mu, 0.01 - abs(mu - 3.0)))
    out.extend(_symbol_index_checks(suite))
    return out


# Upper bounds on the fitted growth of each symbol in |s|
SYMBOL_INDEX_BOUNDS = {"single_layer": 1.3, "double_layer": 1.8, "inverse": 4.0}


def _symbol_index_checks(suite: str) -> List[CheckResultDTO]:
    """Steepest per-line slope of each operator norm against its index bound."""
    mesh = primitives.reference_tet()
    mat = sample_material()
    omegas = np.linspace(1.0, 20.0, 10)
    out = []
    for name, bound in SYMBOL_INDEX_BOUNDS.items():
        sample = estimate_symbol_index(
            build_symbol(name, mesh, mat), [0.5, 1.0], omegas, name=name
        )
        steepest = max(sample.per_line_slopes)
        label = f"symbol_index_{name}"
        out.append(upper(suite, label, "A in A(mu, m)", steepest, bound))
    return out


def norms_suite(seed: int) -> List[CheckResultDTO]:
    suite = "norms"
    rng = np.random.default_rng(seed)
    mesh = primitives.cube(2)
    mat = sample_material()
    n = mesh.n_vertices
    out = []

    annulus = Annulus.around(mesh)
    worst = np.inf
    for omega in (0.0, 3.0, 10.0):
        s = LaplaceParameter(complex(0.5, omega))
        potentials = annulus.potentials(mesh, s, mat.sound_c)
        exterior = exterior_field(
            annulus,
            potentials,
            _random(rng, len(mesh.boundary_vertices)),
            _random(rng, mesh.n_tris),
        )
        slacks = check_norm_equivalences(
            mesh, mat, s, _random(rng, 3 * n), _random(rng, n), exterior
        )
        worst = min(worst, min(sl.worst for sl in slacks))
    out.append(
        check(suite, "equivalence_slack", "norm sandwich", 0.0, worst, worst)
    )

    u = _random(rng, 3 * n)
    alpha = 2.5 - 1.5j
    scaled = energy_norm_u(mesh, alpha * u, mat, S_TEST)
    base = energy_norm_u(mesh, u, mat, S_TEST)
    defect = abs(scaled - abs(alpha) * base) / (abs(alpha) * base)
    out.append(upper(suite, "homogeneity", "||a u|| = |a| ||u||", defect, 1e-12))

    low, _ = korn_ratio_bounds(mesh, mat)
    out.append(check(suite, "korn_lower", "energy >= c H1", 0.0, low, low))

    half = h_half_norm(mesh, np.ones(len(mesh.boundary_vertices)))
    out.append(check(suite, "h_half_constant", "H^1/2 norm of 1", 0.0, half, half))
    return out


SUITE_RUNNERS: Dict[str, Callable[[int], List[CheckResultDTO]]] = {
    "kernel": kernel_suite,
    "boundary": boundary_suite,
    "interior": interior_suite,
    "coupled": coupled_suite,
    "cq": cq_suite,
    "norms": norms_suite,
}


def run_suite(name: str, seed: int = 0) -> VerificationReportDTO:
    """
    Run one suite, or every suite for ``all``.

    Raises:
        ConfigError: For an unknown suite name
    """
    if name != "all" and name not in SUITE_RUNNERS:
        raise ConfigError(
            f"unknown suite {name!r}; expected one of {', '.join(SUITES)} or all"
        )
    names = SUITES if name == "all" else (name,)
    start = time.perf_counter()
    checks: List[CheckResultDTO] = []
    for suite in names:
        logger.info(f"Running suite {suite}")
        results = SUITE_RUNNERS[suite](seed)
        for failed in (c for c in results if not c.passed):
            logger.warning(
                f"{suite}: {failed.quantity} failed (actual {failed.actual:.4g}, "
                f"slack {failed.slack:.3g})"
            )
        checks.extend(results)
    passed = all(c.passed for c in checks)
    elapsed = time.perf_counter() - start
    logger.info(f"Suite {name}: {'pass' if passed else 'FAIL'} in {elapsed:.1f}s")
    return VerificationReportDTO(
        suite=name, seed=seed, passed=passed, elapsed_s=elapsed, checks=checks
    )
