"""
Convolution quadrature by diagonalization over a scaled circle.

With xi_l = rho exp(-2 pi i l / L), L = N + 1, the discrete convolution
(a * g)(t_n) is rho^-n ifft(A(delta(xi_l) / dt) fft(rho^n g_n))_n. Every
frequency is an independent Laplace-domain evaluation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from math import gamma
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from piezoscatter.core.exceptions import (
    ConfigError,
    DimensionError,
    FrequencySolveError,
)
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.core.settings import get_settings
from piezoscatter.dto.config import CQParamsDTO, ProblemConfigDTO
from piezoscatter.dto.report import TimeseriesRowDTO
from piezoscatter.service.boundary_ops import assemble_operators, potential_matrices
from piezoscatter.service.coupled_solver import FIELDS, assemble_system, solve
from piezoscatter.service.incident import ProblemData
from piezoscatter.service.norms import (
    energy_norm_phi,
    energy_norm_theta,
    energy_norm_u,
)

logger = logging.getLogger(__name__)

# Generating functions delta(xi) of the A-stable multistep rules
RULES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bdf1": lambda xi: 1.0 - xi,
    "bdf2": lambda xi: (1.0 - xi) + 0.5 * (1.0 - xi) ** 2,
    "trapezoidal": lambda xi: 2.0 * (1.0 - xi) / (1.0 + xi),
}
RULE_ORDER = {"bdf1": 1, "bdf2": 2, "trapezoidal": 2}

# Symbol: (s, transformed data at s) -> transformed output at s
Symbol = Callable[[complex, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CQPlan:
    """Rule, step and contour of an all-frequency CQ run."""

    rule: str = "bdf2"
    dt: float = 0.1
    n_steps: int = 64
    eps_target: float = 1e-14

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown CQ rule {self.rule!r}")
        if self.dt <= 0.0 or self.n_steps < 1:
            raise ConfigError("CQ needs dt > 0 and at least one step")
        if not 0.0 < self.eps_target < 1.0:
            raise ConfigError("eps_target must lie in (0, 1)")
        if self.rule == "trapezoidal":
            logger.warning(
                "trapezoidal CQ is A-stable but not L-stable; "
                "high frequencies are weakly damped"
            )

    @classmethod
    def from_dto(cls, dto: CQParamsDTO) -> "CQPlan":
        return cls(
            rule=dto.rule, dt=dto.dt, n_steps=dto.n_steps, eps_target=dto.eps_target
        )

    @property
    def n_frequencies(self) -> int:
        return self.n_steps + 1

    @property
    def contour_radius(self) -> float:
        return self.eps_target ** (1.0 / (2 * self.n_steps))

    @property
    def order(self) -> int:
        return RULE_ORDER[self.rule]

    @cached_property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_frequencies)

    @cached_property
    def nodes(self) -> np.ndarray:
        ell = np.arange(self.n_frequencies)
        return self.contour_radius * np.exp(-2j * np.pi * ell / self.n_frequencies)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """s_l = delta(xi_l) / dt; all in the right half-plane."""
        s = RULES[self.rule](self.nodes) / self.dt
        if np.any(s.real <= 0.0):
            raise ConfigError(
                f"CQ frequency outside the right half-plane ({self.rule})"
            )
        return s

    @cached_property
    def _powers(self) -> np.ndarray:
        return self.contour_radius ** np.arange(self.n_frequencies)

    def forward(self, samples) -> np.ndarray:
        """sum_n g_n xi_l^n along axis 0."""
        samples = np.asarray(samples)
        if samples.shape[0] != self.n_frequencies:
            raise DimensionError(
                f"expected {self.n_frequencies} samples, got {samples.shape[0]}"
            )
        scale = self._powers.reshape((-1,) + (1,) * (samples.ndim - 1))
        return np.fft.fft(scale * samples, axis=0)

    def inverse(self, transformed) -> np.ndarray:
        """Inverse of ``forward`` along axis 0."""
        transformed = np.asarray(transformed)
        scale = self._powers.reshape((-1,) + (1,) * (transformed.ndim - 1))
        return np.fft.ifft(transformed, axis=0) / scale

    def evaluated_indices(self, conjugate_symmetric: bool) -> np.ndarray:
        """Frequencies to evaluate; the rest follow by conjugation."""
        if not conjugate_symmetric:
            return np.arange(self.n_frequencies)
        return np.arange(self.n_frequencies // 2 + 1)


def _mirror(plan: CQPlan, values: List[np.ndarray]) -> List[np.ndarray]:
    """Fill l > L/2 from conj(value[L - l])."""
    n = plan.n_frequencies
    full = list(values) + [None] * (n - len(values))
    for ell in range(len(values), n):
        full[ell] = np.conj(full[n - ell])
    return full


def evaluate_frequencies(
    plan: CQPlan,
    evaluate: Callable[[int, complex], np.ndarray],
    conjugate_symmetric: bool = False,
    workers: Optional[int] = None,
) -> List[np.ndarray]:
    """
    Call ``evaluate(l, s_l)`` for every contour frequency, in parallel.

    Raises:
        FrequencySolveError: With the index and frequency of the first failure
    """
    indices = plan.evaluated_indices(conjugate_symmetric)
    frequencies = plan.frequencies
    workers = max(1, workers or get_settings().workers)

    def run(ell: int) -> np.ndarray:
        s = complex(frequencies[ell])
        try:
            return np.asarray(evaluate(int(ell), s))
        except Exception as e:
            logger.error(f"CQ frequency {ell} (s = {s:.4g}) failed: {e}")
            raise FrequencySolveError(int(ell), s, e) from e

    if workers == 1:
        values = [run(ell) for ell in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(run, indices))
    if conjugate_symmetric:
        values = _mirror(plan, values)
    return values


def conjugate_symmetry_defect(
    plan: CQPlan,
    evaluate: Callable[[int, complex], np.ndarray],
    values: Sequence[np.ndarray],
) -> float:
    """
    Solve the last contour frequency directly and compare it with its mirror.

    ``values`` is the mirrored list returned by ``evaluate_frequencies``. The
    result is max |A(conj s) g - conj(A(s) g)| over max |conj(A(s) g)|; it is
    0 when the plan has no mirrored frequency.

    Raises:
        FrequencySolveError: If the direct evaluation fails
    """
    last = plan.n_frequencies - 1
    if last in plan.evaluated_indices(True):
        return 0.0
    s = complex(plan.frequencies[last])
    try:
        direct = np.asarray(evaluate(last, s))
    except Exception as e:
        raise FrequencySolveError(last, s, e) from e
    mirrored = np.asarray(values[last])
    scale = np.abs(mirrored).max()
    if scale == 0.0:
        return float(np.abs(direct).max())
    return float(np.abs(direct - mirrored).max() / scale)


def cq_apply(
    plan: CQPlan,
    symbol: Symbol,
    samples,
    conjugate_symmetric: bool = False,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    Discrete convolution of a causal sample sequence with a Laplace symbol.

    Args:
        plan: CQ plan
        symbol: ``symbol(s, g_hat)`` applying the operator at ``s``
        samples: g(t_n), n = 0..N, along axis 0
        conjugate_symmetric: Evaluate half the frequencies and mirror the rest
            (real data and a symbol with A(conj s) = conj A(s))
        workers: Thread count; defaults to the runtime settings

    Returns:
        Complex array of (a * g)(t_n) along axis 0
    """
    transformed = plan.forward(samples)
    values = evaluate_frequencies(
        plan,
        lambda ell, s: symbol(s, transformed[ell]),
        conjugate_symmetric=conjugate_symmetric,
        workers=workers,
    )
    return plan.inverse(np.stack(values))


def scalar_symbol(function: Callable[[complex], complex]) -> Symbol:
    """Wrap a scalar transfer function as a symbol."""
    return lambda s, g_hat: function(s) * g_hat


@dataclass(frozen=True, eq=False)
class ConvolutionApplier:
    """A symbol bound to a plan; calling it convolves sample sequences."""

    plan: CQPlan
    symbol: Symbol
    conjugate_symmetric: bool = False

    def __call__(self, samples) -> np.ndarray:
        return cq_apply(
            self.plan,
            self.symbol,
            samples,
            conjugate_symmetric=self.conjugate_symmetric,
        )

    def weights(self) -> np.ndarray:
        """Convolution weights omega_0..omega_N of a scalar symbol."""
        impulse = np.zeros(self.plan.n_frequencies)
        impulse[0] = 1.0
        return self(impulse)


def cq_weights(
    plan: CQPlan, symbol: Symbol, conjugate_symmetric: bool = False
) -> ConvolutionApplier:
    return ConvolutionApplier(plan, symbol, conjugate_symmetric)


@dataclass(frozen=True, eq=False)
class TimeDomainSolution:
    """
    Time series of the block unknowns and of the probe pressures.

    ``imaginary_residue`` is the peak imaginary over the peak real output of
    a run that solved every frequency. A mirrored run has real output by
    construction and reports the conjugate-symmetry defect of one directly
    solved mirrored frequency instead.
    """

    plan: CQPlan
    sizes: tuple
    coefficients: np.ndarray
    probe_labels: List[str]
    pressure: np.ndarray
    imaginary_residue: float
    first_arrival: float
    data: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.plan.times

    def field(self, name: str) -> np.ndarray:
        bounds = np.concatenate([[0], np.cumsum(self.sizes)])
        i = FIELDS.index(name)
        return self.coefficients[:, bounds[i] : bounds[i + 1]]

    def causality_residual(self, onset: Optional[float] = None) -> float:
        """max |x(t)| before the onset relative to the peak over all times."""
        onset = self.first_arrival if onset is None else onset
        peak = np.abs(self.coefficients).max()
        early = self.times < onset - 0.5 * self.plan.dt
        if peak == 0.0 or not early.any():
            return 0.0
        return float(np.abs(self.coefficients[early]).max() / peak)

    def energy_series(self, mesh: CoupledMesh, mat) -> np.ndarray:
        """Energy norm of (u, theta, phi) at parameter 1 per time step."""
        u, theta, phi = self.field("u"), self.field("theta"), self.field("phi")
        return np.array(
            [
                np.sqrt(
                    energy_norm_u(mesh, u[n], mat, 1.0) ** 2
                    + energy_norm_theta(mesh, theta[n], mat, 1.0) ** 2
                    + energy_norm_phi(mesh, phi[n]) ** 2
                )
                for n in range(len(self.times))
            ]
        )

    def to_rows(self) -> List[TimeseriesRowDTO]:
        return series_rows(self.times, self.pressure, self.probe_labels)


def solve_time_domain(
    config: ProblemConfigDTO,
    mesh: CoupledMesh,
    plan: Optional[CQPlan] = None,
    points: Optional[np.ndarray] = None,
    labels: Optional[Sequence[str]] = None,
    conjugate_symmetric: bool = True,
    workers: Optional[int] = None,
) -> TimeDomainSolution:
    """
    Causal time-domain solution by one coupled solve per CQ frequency.

    Each load pattern contributes its spatial blocks at s_l times the CQ
    transform of its wavelet samples; the exterior pressure at the probes
    is reconstructed per frequency and transformed back with the fields.

    Args:
        config: Problem configuration
        mesh: Validated coupled mesh
        plan: CQ plan; defaults to ``config.cq``
        points: Probe points; defaults to the configured probes
        labels: Probe labels matching ``points``
        conjugate_symmetric: Solve only half the frequencies
        workers: Thread count for the frequency solves

    Raises:
        FrequencySolveError: If a frequency solve fails
    """
    plan = plan or CQPlan.from_dto(config.cq)
    data = ProblemData(mesh, config)
    mat = data.mat
    if points is None:
        points = np.array([p.point for p in config.probes], dtype=float).reshape(-1, 3)
        labels = [p.label for p in config.probes]
    points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 3)
    if labels is None:
        labels = [f"p{i}" for i in range(len(points))]
    labels = list(labels)
    quad_order = config.solver.quad_order
    times = plan.times

    transforms = {}
    for pattern in data.patterns(complex(plan.frequencies[0])):
        transforms[pattern.name] = plan.forward(pattern.wavelet(times))

    def frequency(ell: int, s: complex) -> np.ndarray:
        loads: Dict[str, np.ndarray] = {}
        for pattern in data.patterns(s):
            weight = transforms[pattern.name][ell]
            for block, values in pattern.blocks.items():
                loads[block] = loads.get(block, 0.0) + weight * values
        ops = assemble_operators(mesh, s, mat.sound_c, quad_order)
        system = assemble_system(mesh, mat, s, loads, ops=ops)
        solution = solve(
            system,
            tol=config.solver.tol,
            method=config.solver.method,
            max_iter=config.solver.max_iter,
        )
        pressure = np.zeros(len(points), dtype=complex)
        if len(points):
            f = solution.fields
            matrices = potential_matrices(mesh, s, mat.sound_c, points)
            pressure = matrices.apply(f["phi_gamma"], f["lambda"])
        logger.debug(f"CQ frequency {ell} solved (s = {s:.4g})")
        return np.concatenate([solution.x, pressure])

    logger.info(
        f"Time-domain solve: {plan.rule}, dt = {plan.dt}, N = {plan.n_steps}, "
        f"rho = {plan.contour_radius:.6f}"
    )
    values = evaluate_frequencies(plan, frequency, conjugate_symmetric, workers)
    series = plan.inverse(np.stack(values))
    if conjugate_symmetric:
        residue = conjugate_symmetry_defect(plan, frequency, values)
    else:
        peak = np.abs(series.real).max()
        residue = float(np.abs(series.imag).max() / peak) if peak > 0 else 0.0
    n_x = len(values[0]) - len(points)
    n_v = mesh.n_vertices
    sizes = (3 * n_v, n_v, n_v, 1, len(mesh.boundary_vertices), mesh.n_tris)
    result = TimeDomainSolution(
        plan=plan,
        sizes=sizes,
        coefficients=series.real[:, :n_x],
        probe_labels=labels,
        pressure=series.real[:, n_x:],
        imaginary_residue=residue,
        first_arrival=data.first_arrival,
        data=data.boundary_samples(times),
    )
    logger.info(
        f"Time-domain solve done: causality residual "
        f"{result.causality_residual():.2e}, imaginary residue {residue:.2e}"
    )
    return result


def _derivative(series: np.ndarray, dt: float, order: int) -> np.ndarray:
    out = series
    for _ in range(order):
        out = np.gradient(out, dt, axis=0, edge_order=2)
    return out


def p2_operator(series, dt: float) -> np.ndarray:
    """
    D + 2 D' + D'' by second-order differences, one-sided at the ends.

    Raises:
        DimensionError: For fewer than three samples
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 0 or series.shape[0] < 3:
        raise DimensionError("p2_operator needs at least three samples")
    first = _derivative(series, dt, 1)
    second = _derivative(first, dt, 1)
    return series + 2.0 * first + second


def symbol_index_bound_shape(t, mu: float) -> np.ndarray:
    """
    2^alpha C_eps(t) with mu = k + alpha and eps = 1 - alpha, where
    C_eps(t) = Gamma(eps/2) / (2 sqrt(pi) Gamma((eps+1)/2)) t^eps / (1+t)^eps.
    """
    t = np.asarray(t, dtype=float)
    alpha = mu - np.floor(mu)
    eps = 1.0 - alpha
    constant = gamma(eps / 2.0) / (2.0 * np.sqrt(np.pi) * gamma((eps + 1.0) / 2.0))
    return 2.0**alpha * constant * t**eps / (1.0 + t) ** eps


@dataclass(frozen=True)
class BoundAudit:
    """
    Measured norms against the bound shapes.

    A ratio is inf where a shape vanishes but the measured norm does not, so
    output ahead of the data makes the audit unbounded.
    """

    times: np.ndarray
    measured: np.ndarray
    shapes: Dict[str, np.ndarray]
    ratios: Dict[str, np.ndarray]

    def max_ratio(self, name: str) -> float:
        return float(np.max(self.ratios[name]))

    @property
    def bounded(self) -> bool:
        return all(np.all(np.isfinite(r)) for r in self.ratios.values())


def _ratio(measured: np.ndarray, shape: np.ndarray, floor: float) -> np.ndarray:
    """measured / shape; inf where the shape is 0 and measured exceeds ``floor``."""
    safe = np.where(shape > 0.0, shape, 1.0)
    empty = np.where(measured > floor, np.inf, 0.0)
    return np.where(shape > 0.0, measured / safe, empty)


def bound_audit(
    times,
    measured,
    data,
    mu: float = 3.5,
    derivative_order: int = 3,
    causality_tol: float = 1e-6,
) -> BoundAudit:
    """
    Compare the solution norm per time with the displayed bound shapes.

    The shapes are t^2/(1+t) max(1, t^6), t^1.5/(1+t)^0.5 max(1, t^6.5) and
    the symbol-index template, each times the running integral of
    ||P2 D^(k)||; ``data`` holds the data samples along axis 0. Where a
    shape is 0, measured norms above ``causality_tol`` times the peak
    measured norm give an infinite ratio.
    """
    times = np.asarray(times, dtype=float)
    measured = np.asarray(measured, dtype=float)
    data = np.asarray(data, dtype=float)
    if times.shape[0] != measured.shape[0] or times.shape[0] != data.shape[0]:
        raise DimensionError("times, measured and data must have the same length")
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0

    def integral(order: int) -> np.ndarray:
        d = p2_operator(_derivative(data, dt, order), dt)
        norms = np.linalg.norm(d.reshape(len(times), -1), axis=1)
        return cumulative_trapezoid(norms, times, initial=0.0)

    third = integral(derivative_order)
    index_k = int(np.floor(mu))
    prop = third if index_k == derivative_order else integral(index_k)
    shapes = {
        "cubic_growth": times**2 / (1.0 + times) * np.maximum(1.0, times**6) * third,
        "half_order_growth": times**1.5
        / np.sqrt(1.0 + times)
        * np.maximum(1.0, times**6.5)
        * third,
        "symbol_index": symbol_index_bound_shape(times, mu) * prop,
    }
    floor = causality_tol * (np.abs(measured).max() if measured.size else 0.0)
    ratios = {name: _ratio(measured, shape, floor) for name, shape in shapes.items()}
    logger.debug(
        "Bound audit: "
        + ", ".join(f"{k} max ratio {np.max(v):.3e}" for k, v in ratios.items())
    )
    return BoundAudit(times=times, measured=measured, shapes=shapes, ratios=ratios)


def series_rows(
    times, pressure: np.ndarray, labels: Sequence[str], name: str = "p"
) -> List[TimeseriesRowDTO]:
    """CSV rows of a (N + 1, n_probes) real probe series."""
    return [
        TimeseriesRowDTO(t=float(t), probe=label, field=name, re=float(pressure[n, j]))
        for n, t in enumerate(times)
        for j, label in enumerate(labels)
    ]
