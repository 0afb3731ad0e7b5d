import logging
from dataclasses import dataclass, field, replace

import numpy as np

from piezoscatter.core.exceptions import (
    ConfigError,
    DimensionError,
    MaterialConstraintError,
)

logger = logging.getLogger(__name__)

# Voigt index order 11, 22, 33, 23, 13, 12
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


def voigt_to_tensor(voigt: np.ndarray) -> np.ndarray:
    """Expand a 3x6 Voigt piezo matrix into the full 3x3x3 tensor e_kij."""
    voigt = np.asarray(voigt, dtype=float)
    if voigt.shape != (3, 6):
        raise DimensionError(f"piezo Voigt matrix must be 3x6, got {voigt.shape}")
    tensor = np.zeros((3, 3, 3))
    for v, (i, j) in enumerate(VOIGT_PAIRS):
        tensor[:, i, j] = voigt[:, v]
        tensor[:, j, i] = voigt[:, v]
    return tensor


def tensor_to_voigt(tensor: np.ndarray) -> np.ndarray:
    tensor = np.asarray(tensor, dtype=float)
    return np.stack([tensor[:, i, j] for i, j in VOIGT_PAIRS], axis=1)


def _frozen(array, shape, name) -> np.ndarray:
    out = np.array(array, dtype=float)
    if out.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MaterialParams:
    """
    Physical constants of the thermo-piezoelectric solid and the fluid.

    The piezo tensor is stored in full 3x3x3 form with e[k, i, j] = e[k, j, i].
    Sign conditions are checked on construction; the pyroelectric
    well-posedness constraint is checked separately by
    ``check_pyro_constraint`` so that diagnostic code can still build
    constraint-violating materials.
    """

    rho_e: float
    lame_lambda: float
    lame_mu: float
    piezo_e: np.ndarray = field(repr=False)
    zeta: float
    c_eps: float
    pyro_p: np.ndarray
    dielectric_eps: float
    T0: float
    rho_f: float
    sound_c: float

    def __post_init__(self):
        piezo = np.asarray(self.piezo_e, dtype=float)
        if piezo.shape == (3, 6):
            piezo = voigt_to_tensor(piezo)
        object.__setattr__(self, "piezo_e", _frozen(piezo, (3, 3, 3), "piezo_e"))
        object.__setattr__(self, "pyro_p", _frozen(self.pyro_p, (3,), "pyro_p"))
        if not np.allclose(self.piezo_e, self.piezo_e.transpose(0, 2, 1), atol=0.0):
            raise ConfigError("piezo tensor must satisfy e_kij = e_kji")
        if self.rho_e <= 0 or self.lame_mu <= 0:
            raise ConfigError("rho_e and lame_mu must be positive")
        if 3 * self.lame_lambda + 2 * self.lame_mu <= 0:
            raise ConfigError("3*lame_lambda + 2*lame_mu must be positive")
        if self.c_eps <= 0 or self.T0 <= 0 or self.dielectric_eps <= 0:
            raise ConfigError("c_eps, T0 and dielectric_eps must be positive")
        if self.zeta < 0:
            raise ConfigError("zeta must be non-negative")
        if self.rho_f <= 0 or self.sound_c <= 0:
            raise ConfigError("rho_f and sound_c must be positive")

    @property
    def pyro_norm(self) -> float:
        return float(np.linalg.norm(self.pyro_p))

    @property
    def heat_ratio(self) -> float:
        """c_eps / T0."""
        return self.c_eps / self.T0

    @property
    def c1(self) -> float:
        """Thermal coercivity constant c_eps^-1 (c_eps/T0 - ||p||)."""
        return (self.heat_ratio - self.pyro_norm) / self.c_eps

    @property
    def c2(self) -> float:
        """Electric coercivity constant eps - ||p||."""
        return self.dielectric_eps - self.pyro_norm

    @property
    def piezo_voigt(self) -> np.ndarray:
        return tensor_to_voigt(self.piezo_e)

    def check_pyro_constraint(self) -> None:
        """
        Enforce ||p|| < min(eps, c_eps/T0).

        Raises:
            MaterialConstraintError: If the strict inequality fails
        """
        if not self.pyro_norm < min(self.dielectric_eps, self.heat_ratio):
            raise MaterialConstraintError(
                self.pyro_norm, self.dielectric_eps, self.heat_ratio
            )

    def piezo_sign_warnings(self) -> int:
        """Log a warning when piezo entries are not all positive; returns the count."""
        count = int(np.count_nonzero(self.piezo_voigt <= 0.0))
        if count:
            logger.warning(
                f"{count} of 18 piezo Voigt entries are not positive; "
                "the sign condition e_kij > 0 is not satisfied"
            )
        return count

    def decoupled(self) -> "MaterialParams":
        """Elastic-acoustic limit: piezo, thermal stress and pyro moduli zeroed."""
        return replace(
            self, piezo_e=np.zeros((3, 3, 3)), zeta=0.0, pyro_p=np.zeros(3)
        )

    def without_pyro(self) -> "MaterialParams":
        return replace(self, pyro_p=np.zeros(3))
