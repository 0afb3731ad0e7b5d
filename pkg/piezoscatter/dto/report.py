from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from piezoscatter.dto.common import ComplexDTO


class CheckResultDTO(BaseModel):
    """One verified quantity of a suite."""

    suite: str = Field(..., description="Suite the check belongs to")
    quantity: str = Field(..., description="Checked quantity")
    identity: str = Field("", description="Identity or estimate under test")
    expected: float = Field(..., description="Reference value or bound")
    actual: float = Field(..., description="Measured value")
    slack: float = Field(..., description="Signed margin; >= 0 means satisfied")
    passed: bool = Field(..., alias="pass", description="Check outcome")

    model_config = ConfigDict(
        populate_by_name=True,
        json_schema_extra={
            "example": {
                "suite": "kernel",
                "quantity": "fd_residual_order",
                "identity": "helmholtz-pde",
                "expected": 2.0,
                "actual": 1.98,
                "slack": 0.28,
                "pass": True,
            }
        },
    )


class VerificationReportDTO(BaseModel):
    """Report written by ``verify``."""

    suite: str
    seed: int
    passed: bool = Field(..., alias="pass")
    elapsed_s: float = Field(..., ge=0)
    checks: List[CheckResultDTO] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True)


class EnergyNormsDTO(BaseModel):
    """Energy norms of the interior and exterior fields."""

    u: float = Field(..., ge=0)
    theta: float = Field(..., ge=0)
    phi: float = Field(..., ge=0, description="Gradient seminorm of the zero-mean part")
    phi_l2: float = Field(..., ge=0, description="Plain L2 norm")
    p: Optional[float] = Field(None, ge=0, description="Annulus surrogate")


class SolveReportDTO(BaseModel):
    """Diagnostics of one Laplace-domain solve."""

    s: ComplexDTO
    n_unknowns: int
    block_sizes: List[int]
    method: str
    residual: float = Field(..., ge=0)
    tolerance: float
    energy_norms: EnergyNormsDTO
    solution_norm: float = Field(..., ge=0)
    rhs_norm: float = Field(..., ge=0)
    stability_ratio: float = Field(..., ge=0)
    interior_pressure_max: Optional[float] = None
    exterior_pressure_max: Optional[float] = None
    multiplier: ComplexDTO


class TimeseriesRowDTO(BaseModel):
    """One CSV row of a probe time series."""

    t: float
    probe: str
    field: str
    re: float
    im: float = 0.0


class SweepRowDTO(BaseModel):
    """One row of a stability sweep table."""

    s: ComplexDTO
    solution_norm: float
    rhs_norm: float
    bound: float
    ratio: float


class SymbolSampleDTO(BaseModel):
    """Fitted growth exponents of an operator symbol."""

    name: str
    sigmas: List[float]
    mu_hat: Optional[float] = Field(None, description="Exponent in |s|")
    m_hat: Optional[float] = Field(None, description="Exponent in 1/sigma")
    r_squared: float
    per_line_slopes: List[float]
    samples: List[List[float]] = Field(
        ..., description="Rows of (sigma, omega, |s|, operator norm)"
    )


class TimeDomainReportDTO(BaseModel):
    """Report written by ``solve-time``."""

    rule: str
    dt: float = Field(..., gt=0)
    n_steps: int = Field(..., ge=1)
    contour_radius: float
    first_arrival: float = Field(
        ..., description="Earliest datum onset on the boundary"
    )
    causality_residual: float = Field(
        ..., ge=0, description="Peak |x| before the first arrival over the global peak"
    )
    imaginary_residue: float = Field(
        ...,
        ge=0,
        description="Conjugate-symmetry defect of a mirrored run, else the peak "
        "imaginary part over the peak real part",
    )
    bound_ratios: Dict[str, float] = Field(
        default_factory=dict,
        description="Largest measured/bound ratio per shape; null if unbounded",
    )
    bounded: bool
    probes: List[str] = Field(default_factory=list)
