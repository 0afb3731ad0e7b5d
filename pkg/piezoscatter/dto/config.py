import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from piezoscatter.core.material import MaterialParams


class MaterialDTO(BaseModel):
    """Physical constants of the solid and the surrounding fluid."""

    rho_e: float = Field(..., gt=0, description="Solid density")
    lame_lambda: float = Field(..., description="First Lame constant")
    lame_mu: float = Field(..., gt=0, description="Shear modulus")
    piezo_e: List[List[float]] = Field(
        ..., description="Piezoelectric moduli, 3x6 Voigt layout (11,22,33,23,13,12)"
    )
    zeta: float = Field(..., gt=0, description="Thermal stress constant")
    c_eps: float = Field(..., gt=0, description="Specific heat at constant strain")
    pyro_p: List[float] = Field(
        ..., min_length=3, max_length=3, description="Pyroelectric moduli"
    )
    dielectric_eps: float = Field(..., gt=0, description="Dielectric constant")
    T0: float = Field(..., gt=0, description="Reference temperature")
    rho_f: float = Field(..., gt=0, description="Fluid density")
    sound_c: float = Field(..., gt=0, description="Fluid sound speed")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "rho_e": 1.0,
                "lame_lambda": 1.0,
                "lame_mu": 1.0,
                "piezo_e": [[0.1] * 6, [0.1] * 6, [0.1] * 6],
                "zeta": 0.5,
                "c_eps": 1.0,
                "pyro_p": [0.1, 0.0, 0.0],
                "dielectric_eps": 1.0,
                "T0": 1.0,
                "rho_f": 1.0,
                "sound_c": 1.0,
            }
        }
    )

    @field_validator("piezo_e")
    @classmethod
    def voigt_shape(cls, value: List[List[float]]) -> List[List[float]]:
        if len(value) != 3 or any(len(row) != 6 for row in value):
            raise ValueError("piezo_e must be a 3x6 Voigt matrix")
        return value

    @model_validator(mode="after")
    def lame_positive(self) -> "MaterialDTO":
        if 3 * self.lame_lambda + 2 * self.lame_mu <= 0:
            raise ValueError("3*lame_lambda + 2*lame_mu must be positive")
        return self

    def to_domain(self) -> MaterialParams:
        return MaterialParams(
            rho_e=self.rho_e,
            lame_lambda=self.lame_lambda,
            lame_mu=self.lame_mu,
            piezo_e=np.array(self.piezo_e),
            zeta=self.zeta,
            c_eps=self.c_eps,
            pyro_p=np.array(self.pyro_p),
            dielectric_eps=self.dielectric_eps,
            T0=self.T0,
            rho_f=self.rho_f,
            sound_c=self.sound_c,
        )


class WaveletDTO(BaseModel):
    """Causal time profile from the wavelet library."""

    name: Literal["gaussian_pulse", "ramp"] = Field(..., description="Wavelet kind")
    amplitude: float = Field(1.0, description="Peak scale")
    a: Optional[float] = Field(None, gt=0, description="Gaussian width parameter")
    t0: float = Field(0.0, ge=0, description="Pulse centre or ramp start")
    omega0: Optional[float] = Field(None, description="Carrier angular frequency")
    rise_time: Optional[float] = Field(None, gt=0, description="Ramp rise time")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "name": "gaussian_pulse",
                "amplitude": 1.0,
                "a": 4.0,
                "t0": 3.0,
                "omega0": 3.0,
            }
        }
    )

    @model_validator(mode="after")
    def parameters_for_kind(self) -> "WaveletDTO":
        if self.name == "gaussian_pulse":
            if self.a is None or self.omega0 is None:
                raise ValueError("gaussian_pulse needs a and omega0")
            onset = 5.0 / math.sqrt(self.a)
            if self.t0 < onset:
                raise ValueError(f"gaussian_pulse needs t0 >= 5/sqrt(a) = {onset:.6g}")
        if self.name == "ramp" and self.rise_time is None:
            raise ValueError("ramp needs rise_time")
        return self


class IncidentWaveDTO(BaseModel):
    """Incident acoustic pressure p_inc(x, t) = f(t - d.(x - x_ref)/c)."""

    type: Literal["plane_wave", "point_source", "none"] = Field(
        "plane_wave", description="Wave kind"
    )
    direction: List[float] = Field(
        [0.0, 0.0, 1.0], min_length=3, max_length=3, description="Unit direction"
    )
    reference_point: List[float] = Field(
        [0.0, 0.0, -1.0],
        min_length=3,
        max_length=3,
        description="Point the wavefront crosses at t = onset",
    )
    source: List[float] = Field(
        [0.0, 0.0, 0.0],
        min_length=3,
        max_length=3,
        description="Point source location (inside the solid)",
    )
    strength: float = Field(
        1.0 / (4.0 * math.pi), description="Point source strength"
    )
    wavelet: Optional[WaveletDTO] = Field(None, description="Time profile")

    @field_validator("direction")
    @classmethod
    def unit_direction(cls, value: List[float]) -> List[float]:
        norm = math.sqrt(sum(v * v for v in value))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must have unit norm, got {norm:.15g}")
        return value

    @model_validator(mode="after")
    def wavelet_required(self) -> "IncidentWaveDTO":
        if self.type != "none" and self.wavelet is None:
            raise ValueError(f"{self.type} needs a wavelet")
        return self


class BoundaryFieldDTO(BaseModel):
    """Spatially constant boundary datum value * g(t)."""

    value: float = Field(0.0, description="Constant spatial amplitude")
    wavelet: Optional[WaveletDTO] = Field(
        None, description="Time profile g; defaults to the incident wavelet"
    )


class BoundaryDataDTO(BaseModel):
    """Heat flux and surface charge data on the boundary."""

    f_theta: BoundaryFieldDTO = Field(default_factory=BoundaryFieldDTO)
    f_D: BoundaryFieldDTO = Field(default_factory=BoundaryFieldDTO)


class CQParamsDTO(BaseModel):
    """Convolution quadrature time stepping."""

    rule: Literal["bdf1", "bdf2", "trapezoidal"] = Field("bdf2")
    dt: float = Field(0.1, gt=0, description="Time step")
    n_steps: int = Field(64, ge=1, description="Number of steps N")
    eps_target: float = Field(1e-14, gt=0, lt=1, description="Contour accuracy")


class SolverDTO(BaseModel):
    """Linear solver controls."""

    tol: float = Field(1e-8, gt=0, description="Relative residual tolerance")
    method: Literal["auto", "lu", "gmres"] = Field("auto")
    max_iter: int = Field(500, ge=1)
    quad_order: Optional[int] = Field(None, ge=1, le=12)


class ProbeDTO(BaseModel):
    """Labeled observation point."""

    label: str = Field(..., min_length=1)
    point: List[float] = Field(..., min_length=3, max_length=3)
    tag: Literal["interior", "exterior"] = Field("exterior")


class ProblemConfigDTO(BaseModel):
    """Complete problem configuration file."""

    material: MaterialDTO
    incident: IncidentWaveDTO = Field(
        default_factory=lambda: IncidentWaveDTO(type="none")
    )
    boundary_data: BoundaryDataDTO = Field(default_factory=BoundaryDataDTO)
    cq: CQParamsDTO = Field(default_factory=CQParamsDTO)
    solver: SolverDTO = Field(default_factory=SolverDTO)
    probes: List[ProbeDTO] = Field(default_factory=list)
    annulus_factor: float = Field(
        2.0, gt=1, description="Outer radius of the diagnostic annulus / circumradius"
    )

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def unique_probe_labels(self) -> "ProblemConfigDTO":
        labels = [p.label for p in self.probes]
        if len(labels) != len(set(labels)):
            raise ValueError("probe labels must be unique")
        return self

    def material_params(self) -> MaterialParams:
        return self.material.to_domain()
