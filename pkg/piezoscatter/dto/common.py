from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ComplexDTO(BaseModel):
    """Complex number as a (re, im) pair."""

    re: float = Field(..., description="Real part")
    im: float = Field(0.0, description="Imaginary part")

    model_config = ConfigDict(json_schema_extra={"example": {"re": 1.0, "im": 2.0}})

    @classmethod
    def from_complex(cls, value: complex) -> "ComplexDTO":
        value = complex(value)
        return cls(re=value.real, im=value.imag)

    def to_complex(self) -> complex:
        return complex(self.re, self.im)


class Vector3DTO(BaseModel):
    """Point or direction in R^3."""

    xyz: List[float] = Field(..., min_length=3, max_length=3, description="x, y, z")

    model_config = ConfigDict(json_schema_extra={"example": {"xyz": [0.0, 0.0, 1.0]}})

    @field_validator("xyz")
    @classmethod
    def finite(cls, value: List[float]) -> List[float]:
        if any(v != v or abs(v) == float("inf") for v in value):
            raise ValueError("coordinates must be finite")
        return value
