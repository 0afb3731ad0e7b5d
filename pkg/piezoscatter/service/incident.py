"""
Causal wavelets, incident pressure fields and the Galerkin loads they induce.

Every load is split into a spatial pattern evaluated for a unit wavelet
transform and a time profile; the Laplace-domain solver multiplies the two,
the convolution quadrature driver transforms only the time samples.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol

import numpy as np
from scipy.special import erfc, erfcx

from piezoscatter.core.exceptions import ProbeError, TransformUnavailableError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.dto.config import IncidentWaveDTO, ProblemConfigDTO, WaveletDTO
from piezoscatter.service.boundary_ops import trace_spaces
from piezoscatter.service.interior_fem import assemble_forms
from piezoscatter.service.quadrature import triangle_rule

logger = logging.getLogger(__name__)

# exp(-25) is below every tolerance used for causality
GAUSSIAN_SUPPORT = 5.0


class Wavelet(Protocol):
    onset: float

    def __call__(self, t) -> np.ndarray: ...

    def laplace(self, s) -> complex: ...


@dataclass(frozen=True)
class GaussianPulse:
    """A exp(-a (t - t0)^2) cos(omega0 (t - t0)) for t >= 0."""

    amplitude: float
    a: float
    t0: float
    omega0: float = 0.0

    @property
    def onset(self) -> float:
        return max(self.t0 - GAUSSIAN_SUPPORT / np.sqrt(self.a), 0.0)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tau = t - self.t0
        value = self.amplitude * np.exp(-self.a * tau**2) * np.cos(self.omega0 * tau)
        return np.where(t >= 0.0, value, 0.0)

    def _envelope(self, s: complex) -> complex:
        # transform of exp(-a (t - t0)^2) restricted to t >= 0
        root = np.sqrt(self.a)
        z = s / (2.0 * root) - root * self.t0
        pref = np.sqrt(np.pi) / (2.0 * root)
        if z.real >= 0.0:
            return pref * np.exp(-self.a * self.t0**2) * erfcx(z)
        return pref * np.exp(s * s / (4.0 * self.a) - s * self.t0) * erfc(z)

    def laplace(self, s) -> complex:
        s = complex(s)
        w = self.omega0
        if w == 0.0:
            return complex(self.amplitude * self._envelope(s))
        shifted = np.exp(-1j * w * self.t0) * self._envelope(s - 1j * w) + np.exp(
            1j * w * self.t0
        ) * self._envelope(s + 1j * w)
        return complex(0.5 * self.amplitude * shifted)


def smoothstep(x) -> np.ndarray:
    """C^4 step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**5 * (126.0 - 420.0 * x + 540.0 * x**2 - 315.0 * x**3 + 70.0 * x**4)


@dataclass(frozen=True)
class Ramp:
    """A S((t - t0) / rise_time) with the C^4 smoothstep S."""

    amplitude: float
    t0: float
    rise_time: float

    @property
    def onset(self) -> float:
        return self.t0

    def __call__(self, t) -> np.ndarray:
        return self.amplitude * smoothstep((np.asarray(t) - self.t0) / self.rise_time)

    def laplace(self, s) -> complex:
        raise TransformUnavailableError(
            "the ramp wavelet has no closed-form Laplace transform; "
            "use the time-domain driver (solve-time), which needs only samples"
        )


def build_wavelet(dto: WaveletDTO) -> Wavelet:
    if dto.name == "gaussian_pulse":
        return GaussianPulse(
            amplitude=dto.amplitude, a=dto.a, t0=dto.t0, omega0=dto.omega0 or 0.0
        )
    return Ramp(amplitude=dto.amplitude, t0=dto.t0, rise_time=dto.rise_time)


class IncidentField(Protocol):
    def pattern(self, s, x: np.ndarray): ...

    def arrival(self, x: np.ndarray) -> np.ndarray: ...

    def amplitude(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class PlaneWave:
    """f(t - d.(x - x_ref) / c); the pattern is the delay factor."""

    direction: np.ndarray
    reference_point: np.ndarray
    c: float

    def arrival(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.reference_point) @ self.direction / self.c

    def amplitude(self, x: np.ndarray) -> np.ndarray:
        return np.ones(np.shape(x)[:-1])

    def pattern(self, s, x: np.ndarray):
        """Values and gradients of exp(-s d.(x - x_ref) / c)."""
        s = LaplaceParameter.of(s).s
        values = np.exp(-s * self.arrival(x))
        gradients = (-s / self.c) * values[..., None] * self.direction
        return values, gradients


@dataclass(frozen=True)
class PointSource:
    """strength f(t - |x - x0| / c) / |x - x0|."""

    source: np.ndarray
    strength: float
    c: float

    def arrival(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(x) - self.source, axis=-1) / self.c

    def amplitude(self, x: np.ndarray) -> np.ndarray:
        return self.strength / np.linalg.norm(np.asarray(x) - self.source, axis=-1)

    def pattern(self, s, x: np.ndarray):
        """Values and gradients of strength exp(-kappa r) / r."""
        kappa = LaplaceParameter.of(s).s / self.c
        diff = np.asarray(x) - self.source
        r = np.linalg.norm(diff, axis=-1)
        if np.any(r == 0.0):
            raise ProbeError("incident field evaluated at the point source")
        values = self.strength * np.exp(-kappa * r) / r
        radial = -values * (kappa * r + 1.0) / r
        return values, (radial / r)[..., None] * diff


def build_incident(dto: IncidentWaveDTO, c: float) -> Optional[IncidentField]:
    if dto.type == "plane_wave":
        return PlaneWave(
            direction=np.asarray(dto.direction, dtype=float),
            reference_point=np.asarray(dto.reference_point, dtype=float),
            c=c,
        )
    if dto.type == "point_source":
        return PointSource(
            source=np.asarray(dto.source, dtype=float), strength=dto.strength, c=c
        )
    return None


def surface_pattern_loads(mesh: CoupledMesh, field: IncidentField, s, order: int = 8):
    """
    P1 moments of the incident trace and normal derivative on the boundary.

    Returns:
        (trace_load (3 N_v,), flux_load (N_d,)): the u-row load
        -<p n, v> and the boundary moments <d_n p, psi>
    """
    rule = triangle_rule(order)
    bary = rule.points_x
    points = np.einsum("qa,kai->kqi", bary, mesh.tri_points)
    values, gradients = field.pattern(s, points)
    weights = rule.weights[None, :] * 2.0 * mesh.tri_areas[:, None]
    normals = mesh.tri_normals
    flux = np.einsum("kqi,ki->kq", gradients, normals)

    value_moments = np.einsum("kq,kq,qa->ka", weights, values, bary)
    flux_moments = np.einsum("kq,kq,qa->ka", weights, flux, bary)

    n_v = mesh.n_vertices
    trace_load = np.zeros(3 * n_v, dtype=complex)
    local = -value_moments[:, :, None] * normals[:, None, :]
    rows = 3 * mesh.boundary_tris[:, :, None] + np.arange(3)
    np.add.at(trace_load, rows.ravel(), local.ravel())
    flux_load = np.zeros(trace_spaces(mesh).n_dirichlet, dtype=complex)
    np.add.at(flux_load, mesh.tris_local.ravel(), flux_moments.ravel())
    return trace_load, flux_load


@dataclass(frozen=True, eq=False)
class LoadPattern:
    """One spatial load pattern of the coupled system with its time profile."""

    name: str
    wavelet: Wavelet
    blocks: Dict[str, np.ndarray]


class ProblemData:
    """
    Data of a scattering problem: incident field and boundary sources.

    ``patterns(s)`` returns the loads for unit wavelet transforms;
    ``laplace_loads(s)`` weights them with the closed-form wavelet transforms.
    """

    def __init__(self, mesh: CoupledMesh, config: ProblemConfigDTO):
        self.mesh = mesh
        self.config = config
        self.mat: MaterialParams = config.material_params()
        incident = config.incident
        self.incident = build_incident(incident, self.mat.sound_c)
        self.incident_wavelet = (
            build_wavelet(incident.wavelet) if incident.wavelet is not None else None
        )
        self._check_causal()

    def _check_causal(self):
        if self.incident is None:
            return
        if isinstance(self.incident, PointSource):
            inside = self.mesh.contains(self.incident.source[None, :])[0]
            if not inside:
                logger.warning(
                    "point source lies outside the solid; the incident field is "
                    "singular in the exterior"
                )
        boundary = self.mesh.vertices[self.mesh.boundary_vertices]
        first = float(self.incident.arrival(boundary).min())
        if first + self.incident_wavelet.onset < 0.0:
            logger.warning(
                f"incident wave reaches the boundary at t = "
                f"{first + self.incident_wavelet.onset:.4g} < 0; data are not causal"
            )

    @property
    def first_arrival(self) -> float:
        """Earliest time any datum is non-zero on the boundary."""
        times = []
        if self.incident is not None:
            boundary = self.mesh.vertices[self.mesh.boundary_vertices]
            times.append(
                float(self.incident.arrival(boundary).min())
                + self.incident_wavelet.onset
            )
        for field in (self.config.boundary_data.f_theta, self.config.boundary_data.f_D):
            wavelet = self._datum_wavelet(field)
            if field.value != 0.0 and wavelet is not None:
                times.append(wavelet.onset)
        return max(min(times), 0.0) if times else 0.0

    def _datum_wavelet(self, field) -> Optional[Wavelet]:
        if field.wavelet is not None:
            return build_wavelet(field.wavelet)
        return self.incident_wavelet

    def patterns(self, s) -> List[LoadPattern]:
        """Loads for unit wavelet transforms at ``s``."""
        mesh, mat = self.mesh, self.mat
        forms = assemble_forms(mesh)
        spaces = trace_spaces(mesh)
        out = []
        if self.incident is not None:
            trace_load, flux_load = surface_pattern_loads(mesh, self.incident, s)
            out.append(
                LoadPattern(
                    name="incident",
                    wavelet=self.incident_wavelet,
                    blocks={"u": trace_load, "phi_gamma": flux_load / mat.rho_f},
                )
            )
        ones = np.ones(spaces.n_dirichlet)
        boundary_mass = forms.trace_map @ (spaces.dirichlet_mass @ ones)
        data = self.config.boundary_data
        for name, field, block, factor in (
            ("f_theta", data.f_theta, "theta", 1.0 / mat.T0),
            ("f_D", data.f_D, "phi", -1.0),
        ):
            if field.value == 0.0:
                continue
            wavelet = self._datum_wavelet(field)
            if wavelet is None:
                raise TransformUnavailableError(f"{name} has no time profile")
            out.append(
                LoadPattern(
                    name=name,
                    wavelet=wavelet,
                    blocks={block: factor * field.value * boundary_mass},
                )
            )
        return out

    def laplace_loads(self, s) -> Dict[str, np.ndarray]:
        """
        Block loads for the closed-form wavelet transforms at ``s``.

        Raises:
            TransformUnavailableError: If a wavelet has no closed-form transform
        """
        s = LaplaceParameter.of(s)
        loads: Dict[str, np.ndarray] = {}
        for pattern in self.patterns(s):
            weight = pattern.wavelet.laplace(s.s)
            for block, values in pattern.blocks.items():
                loads[block] = loads.get(block, 0.0) + weight * values
        return loads

    def boundary_samples(self, times) -> np.ndarray:
        """
        Time samples of every datum at the boundary vertices.

        Columns hold the incident pressure per boundary vertex followed by
        f_theta and f_D; the array has shape (len(times), N_d + 2).
        """
        times = np.asarray(times, dtype=float)
        boundary = self.mesh.vertices[self.mesh.boundary_vertices]
        columns = np.zeros((len(times), len(boundary) + 2))
        if self.incident is not None:
            delay = self.incident.arrival(boundary)
            columns[:, : len(boundary)] = self.incident.amplitude(
                boundary
            ) * self.incident_wavelet(times[:, None] - delay[None, :])
        data = self.config.boundary_data
        for offset, field in ((-2, data.f_theta), (-1, data.f_D)):
            wavelet = self._datum_wavelet(field)
            if field.value != 0.0 and wavelet is not None:
                columns[:, offset] = field.value * wavelet(times)
        return columns
