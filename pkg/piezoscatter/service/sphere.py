"""
Spherical-harmonic oracles on a sphere of radius ``a`` centred at the origin.

With the modified spherical Bessel functions of scipy (i_n, k_n) and
kappa = s/c, the fundamental solution expands as

    E(x, y) = (2 kappa / pi) sum_n i_n(kappa r_<) k_n(kappa r_>) sum_m Y_nm Y_nm*

which gives the modal eigenvalues

    V_n = (2/pi) kappa a^2 i_n k_n
    K_n = (1/pi) kappa^2 a^2 (i_n' k_n + i_n k_n')
    W_n = -(2/pi) kappa^3 a^2 i_n' k_n'

all evaluated at kappa a. The Wronskian i_n k_n' - i_n' k_n = -pi/(2 z^2) fixes
the jump of the double layer to 1 and yields V_n W_n = 1/4 - K_n^2.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import ive, kve

from piezoscatter.core.exceptions import DimensionError
from piezoscatter.core.laplace import LaplaceParameter
from piezoscatter.core.material import MaterialParams

logger = logging.getLogger(__name__)


def _scaled_bessel(n: int, z: complex):
    """
    Scaled i_n, k_n and derivatives: (i e^{-Re z}, i' e^{-Re z}, k e^{z}, k' e^{z}).
    """
    z = complex(z)
    pref = np.sqrt(np.pi / (2.0 * z))

    def i_s(m):
        return pref * ive(m + 0.5, z)

    def k_s(m):
        return pref * kve(m + 0.5, z)

    i_n, k_n = i_s(n), k_s(n)
    if n == 0:
        di, dk = i_s(1), -k_s(1)
    else:
        di = i_s(n - 1) - (n + 1) * i_n / z
        dk = -k_s(n - 1) - (n + 1) * k_n / z
    return i_n, di, k_n, dk


def _product_phase(z: complex) -> complex:
    """Factor turning a product of scaled i and k back into i * k."""
    return np.exp(z.real - z)


@dataclass(frozen=True)
class SphereEigenvalues:
    """Eigenvalues of V, K, K' and W on the sphere for one harmonic degree."""

    n: int
    V: complex
    K: complex
    Kp: complex
    W: complex

    def calderon_defect(self) -> float:
        """|V W - (1/4 - K^2)|."""
        return float(abs(self.V * self.W - (0.25 - self.K**2)))


def sphere_oracle(n: int, s, c: float, radius: float = 1.0) -> SphereEigenvalues:
    """
    Modal eigenvalues of the boundary integral operators on a sphere.

    Args:
        n: Harmonic degree, n >= 0
        s: Laplace parameter
        c: Sound speed
        radius: Sphere radius

    Returns:
        SphereEigenvalues for degree ``n``

    Raises:
        DimensionError: If n is negative
    """
    if n < 0:
        raise DimensionError(f"harmonic degree must be non-negative, got {n}")
    kappa = LaplaceParameter.of(s).s / c
    z = kappa * radius
    i_n, di, k_n, dk = _scaled_bessel(n, z)
    phase = _product_phase(z)
    a2 = radius * radius
    v = (2.0 / np.pi) * kappa * a2 * i_n * k_n * phase
    k = (kappa**2 * a2 / np.pi) * (di * k_n + i_n * dk) * phase
    w = -(2.0 / np.pi) * kappa**3 * a2 * di * dk * phase
    k = complex(k)
    return SphereEigenvalues(n=n, V=complex(v), K=k, Kp=k, W=complex(w))


def exterior_mode_field(n: int, s, c: float, r, radius: float = 1.0) -> np.ndarray:
    """Radial factor k_n(kappa r) / k_n(kappa a) of the exterior Dirichlet mode."""
    kappa = LaplaceParameter.of(s).s / c
    r = np.atleast_1d(np.asarray(r, dtype=float))
    _, _, k_a, _ = _scaled_bessel(n, kappa * radius)
    out = np.empty(len(r), dtype=complex)
    for idx, rr in enumerate(r):
        _, _, k_r, _ = _scaled_bessel(n, kappa * rr)
        out[idx] = k_r / k_a * np.exp(-kappa * (rr - radius))
    return out


def _i0(z):
    return np.sinh(z) / z


def _i1(z):
    return (z * np.cosh(z) - np.sinh(z)) / (z * z)


@dataclass(frozen=True)
class MonopoleSolution:
    """
    Elastic sphere driven by a point source at its centre, decoupled material.

    Displacement u = A grad i_0(kappa_p r), scattered pressure
    p = B e^{-kappa r} / r outside the sphere.
    """

    s: complex
    kappa: complex
    kappa_p: complex
    radius: float
    A: complex
    B: complex
    strength: complex

    def scattered_pressure(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.B * np.exp(-self.kappa * r) / r

    def incident_pressure(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.strength * np.exp(-self.kappa * r) / r

    def radial_displacement(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.A * self.kappa_p * _i1(self.kappa_p * r)


def elastic_sphere_monopole(
    mat: MaterialParams, s, radius: float = 1.0, strength: complex = 1.0 / (4 * np.pi)
) -> MonopoleSolution:
    """
    Radially symmetric transmission solution for an isotropic elastic sphere.

    The incident field is ``strength * e^{-kappa r} / r`` from the centre; the
    piezoelectric, thermal-stress and pyroelectric couplings are ignored
    (the elastic-acoustic limit). Traction balance and the kinematic
    condition on r = radius fix the amplitudes A and B.
    """
    s = LaplaceParameter.of(s).s
    kappa = s / mat.sound_c
    c_p = np.sqrt((mat.lame_lambda + 2.0 * mat.lame_mu) / mat.rho_e)
    kappa_p = s / c_p
    z_p = kappa_p * radius
    decay = np.exp(-kappa * radius)
    lam, mu = mat.lame_lambda, mat.lame_mu
    traction = kappa_p**2 * ((lam + 2.0 * mu) * _i0(z_p) - 4.0 * mu * _i1(z_p) / z_p)
    drdp = -decay * (kappa * radius + 1.0) / radius**2
    system = np.array(
        [
            [traction, decay / radius],
            [s * s * kappa_p * _i1(z_p), drdp / mat.rho_f],
        ],
        dtype=complex,
    )
    rhs = np.array(
        [-strength * decay / radius, -strength * drdp / mat.rho_f], dtype=complex
    )
    A, B = np.linalg.solve(system, rhs)
    logger.debug(f"Monopole oracle at s = {s}: A = {A:.4e}, B = {B:.4e}")
    return MonopoleSolution(
        s=s,
        kappa=kappa,
        kappa_p=kappa_p,
        radius=radius,
        A=complex(A),
        B=complex(B),
        strength=complex(strength),
    )
