from dataclasses import dataclass
from typing import Union

from piezoscatter.core.exceptions import ConfigError


@dataclass(frozen=True)
class LaplaceParameter:
    """A point s in the open right half of the complex plane."""

    s: complex

    def __post_init__(self):
        value = complex(self.s)
        object.__setattr__(self, "s", value)
        if not value.real > 0.0:
            raise ConfigError(f"Laplace parameter must have Re s > 0, got s = {value}")

    @classmethod
    def of(cls, value: Union["LaplaceParameter", complex, float]) -> "LaplaceParameter":
        if isinstance(value, cls):
            return value
        return cls(complex(value))

    @property
    def sigma(self) -> float:
        return self.s.real

    @property
    def sigma_under(self) -> float:
        """min(1, Re s), the clamped rate of every stability exponent."""
        return min(1.0, self.s.real)

    @property
    def modulus(self) -> float:
        return abs(self.s)

    def scaling_weights(self):
        """Row weights (u, theta, phi, boundary) of the coercivity scaling."""
        s = self.s
        return (s.conjugate(), 1.0 + 0.0j, s, s.conjugate() / abs(s) ** 2)

    def __str__(self) -> str:
        return f"{self.s.real:.6g}{self.s.imag:+.6g}j"


def parse_laplace_parameter(text: str) -> LaplaceParameter:
    """
    Parse ``"RE,IM"`` (or a bare real) into a LaplaceParameter.

    Raises:
        ConfigError: If the text is malformed or Re s <= 0
    """
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            value = complex(float(parts[0]), 0.0)
        elif len(parts) == 2:
            value = complex(float(parts[0]), float(parts[1]))
        else:
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"Cannot parse Laplace parameter {text!r}; expected RE,IM")
    return LaplaceParameter(value)
