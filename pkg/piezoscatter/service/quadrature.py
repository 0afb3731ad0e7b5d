"""
Quadrature on the reference triangle and on triangle pairs.

Points are stored as barycentric coordinates (lambda_0, lambda_1, lambda_2) so a
physical point is ``bary @ vertices``; weights refer to the reference triangle
of area 1/2 and must be scaled by twice the physical area.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from piezoscatter.core.exceptions import QuadratureError

logger = logging.getLogger(__name__)

RULE_KINDS = ("regular", "coincident", "shared-edge", "shared-vertex")
MAX_ORDER = 40

# Reference vertices (xi, eta) of the unit right triangle
_REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    """
    Tabulated rule on a reference triangle (``regular``) or triangle pair.

    For pair kinds the local vertex orderings are fixed: the two triangles
    share local vertex 0 (shared-vertex), local vertices 0 and 1 in the same
    order (shared-edge), or are the same triangle (coincident).
    """

    kind: str
    order: int
    points_x: np.ndarray
    weights: np.ndarray
    points_y: Optional[np.ndarray] = None

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    @property
    def is_pair(self) -> bool:
        return self.points_y is not None

    def __len__(self) -> int:
        return len(self.weights)


def _to_bary(ref: np.ndarray) -> np.ndarray:
    ref = np.atleast_2d(ref)
    return np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])


def _readonly(*arrays):
    for array in arrays:
        if array is not None:
            array.setflags(write=False)


def gauss_points(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def points_per_direction(order: int) -> int:
    """Collapsed Gauss with n points per direction is exact to degree 2n - 2."""
    return (order + 3) // 2


def _check_order(order: int) -> None:
    if not isinstance(order, (int, np.integer)) or order < 1 or order > MAX_ORDER:
        raise QuadratureError(f"unsupported quadrature order {order!r}")


def _collapsed(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed tensor Gauss rule in (xi, eta) with weights summing to 1/2."""
    u, wu = gauss_points(n)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu)
    xi = uu.ravel()
    eta = (vv * (1.0 - uu)).ravel()
    weights = (ww * (1.0 - uu)).ravel()
    return np.column_stack([xi, eta]), weights


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> QuadratureRule:
    """Regular rule on the reference triangle exact for polynomials of ``order``."""
    _check_order(order)
    ref, weights = _collapsed(points_per_direction(order))
    rule = QuadratureRule("regular", order, _to_bary(ref), weights)
    _readonly(rule.points_x, rule.weights)
    return rule


def _duffy_subtriangles(apex: np.ndarray, corners, n: int):
    """
    Points and weights of Duffy rules on the fan of sub-triangles at ``apex``.

    Each sub-triangle (apex, a, b) is mapped by y = apex + u (a - apex) +
    u v (b - a); the Jacobian u cancels a 1/r singularity at the apex.
    """
    u, wu = gauss_points(n)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu)
    points, weights = [], []
    for a, b in corners:
        twice_area = abs(
            (a[0] - apex[0]) * (b[1] - apex[1]) - (a[1] - apex[1]) * (b[0] - apex[0])
        )
        if twice_area == 0.0:
            continue
        y = (
            apex[None, None, :]
            + uu[..., None] * (a - apex)[None, None, :]
            + (uu * vv)[..., None] * (b - a)[None, None, :]
        )
        points.append(y.reshape(-1, 2))
        weights.append((ww * uu * twice_area).ravel())
    return np.concatenate(points), np.concatenate(weights)


def _coincident(order: int) -> QuadratureRule:
    outer, w_outer = _collapsed(points_per_direction(order))
    n = points_per_direction(order)
    xs, ys, ws = [], [], []
    for x, wx in zip(outer, w_outer):
        corners = ((_REF[0], _REF[1]), (_REF[1], _REF[2]), (_REF[2], _REF[0]))
        y, wy = _duffy_subtriangles(x, corners, n)
        xs.append(np.repeat(x[None, :], len(y), axis=0))
        ys.append(y)
        ws.append(wx * wy)
    return QuadratureRule(
        "coincident",
        order,
        _to_bary(np.concatenate(xs)),
        np.concatenate(ws),
        _to_bary(np.concatenate(ys)),
    )


def _shared_edge(order: int) -> QuadratureRule:
    outer, w_outer = _collapsed(points_per_direction(order))
    n = 2 * points_per_direction(order)
    xs, ys, ws = [], [], []
    for x, wx in zip(outer, w_outer):
        foot = np.array([x[0], 0.0])
        corners = ((_REF[1], _REF[2]), (_REF[2], _REF[0]))
        y, wy = _duffy_subtriangles(foot, corners, n)
        xs.append(np.repeat(x[None, :], len(y), axis=0))
        ys.append(y)
        ws.append(wx * wy)
    return QuadratureRule(
        "shared-edge",
        order,
        _to_bary(np.concatenate(xs)),
        np.concatenate(ws),
        _to_bary(np.concatenate(ys)),
    )


def _shared_vertex(order: int) -> QuadratureRule:
    n = points_per_direction(order)
    g, wg = gauss_points(n)
    u, w, v1, v2 = (a.ravel() for a in np.meshgrid(g, g, g, g, indexing="ij"))
    weight = np.einsum("i,j,k,l->ijkl", wg, wg, wg, wg).ravel()
    xs, ys, ws = [], [], []
    # Two regions: |y| <= |x| and |x| <= |y| in the radial Duffy coordinates
    for r_x, r_y in ((u, u * w), (u * w, u)):
        xs.append(np.column_stack([r_x * (1.0 - v1), r_x * v1]))
        ys.append(np.column_stack([r_y * (1.0 - v2), r_y * v2]))
        ws.append(weight * r_x * r_y * u)
    return QuadratureRule(
        "shared-vertex",
        order,
        _to_bary(np.concatenate(xs)),
        np.concatenate(ws),
        _to_bary(np.concatenate(ys)),
    )


@lru_cache(maxsize=None)
def singular_rule(kind: str, order: int) -> QuadratureRule:
    """
    Duffy-type rule for a reference triangle pair.

    Args:
        kind: One of ``regular``, ``coincident``, ``shared-edge``, ``shared-vertex``
        order: Gauss order per collapsed direction, 1 <= order <= 40

    Returns:
        Cached, read-only QuadratureRule; ``regular`` is the single-triangle rule
        (weights sum to 1/2), pair kinds have weights summing to 1/4

    Raises:
        QuadratureError: For an unknown kind or unsupported order
    """
    _check_order(order)
    if kind == "regular":
        return triangle_rule(order)
    builders = {
        "coincident": _coincident,
        "shared-edge": _shared_edge,
        "shared-vertex": _shared_vertex,
    }
    if kind not in builders:
        raise QuadratureError(f"unknown pair rule kind {kind!r}; use {RULE_KINDS}")
    rule = builders[kind](order)
    _readonly(rule.points_x, rule.points_y, rule.weights)
    logger.debug(f"Built {kind} rule of order {order} with {len(rule)} points")
    return rule


def pair_kind(tri_x, tri_y) -> Tuple[str, np.ndarray, np.ndarray]:
    """
    Classify a triangle pair and reorder local vertices for ``singular_rule``.

    Returns:
        (kind, order_x, order_y) with permutations of (0, 1, 2) that put the
        shared vertices first, in the same order on both triangles
    """
    tri_x = [int(v) for v in tri_x]
    tri_y = [int(v) for v in tri_y]
    shared = [v for v in tri_x if v in tri_y]
    if len(shared) == 3:
        return "coincident", np.arange(3), np.array([tri_y.index(v) for v in tri_x])
    if len(shared) == 0:
        return "regular", np.arange(3), np.arange(3)
    rest_x = [tri_x.index(v) for v in tri_x if v not in shared]
    rest_y = [tri_y.index(v) for v in tri_y if v not in shared]
    head_x = [tri_x.index(v) for v in shared]
    head_y = [tri_y.index(v) for v in shared]
    kind = "shared-edge" if len(shared) == 2 else "shared-vertex"
    return kind, np.array(head_x + rest_x), np.array(head_y + rest_y)


def pair_integral(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    tri_x: np.ndarray,
    tri_y: np.ndarray,
    rule: QuadratureRule,
):
    """
    Integrate fn(x, y) over two physical triangles with a tabulated rule.

    ``tri_x`` and ``tri_y`` are (3, 3) vertex arrays already ordered as the
    rule kind expects; a ``regular`` rule is used as a tensor product.
    """
    twice_x = np.linalg.norm(np.cross(tri_x[1] - tri_x[0], tri_x[2] - tri_x[0]))
    twice_y = np.linalg.norm(np.cross(tri_y[1] - tri_y[0], tri_y[2] - tri_y[0]))
    if twice_x == 0.0 or twice_y == 0.0:
        raise QuadratureError("degenerate panel in pair integral")
    if rule.is_pair:
        x = rule.points_x @ tri_x
        y = rule.points_y @ tri_y
        weights = rule.weights
    else:
        bx = np.repeat(rule.points_x, len(rule), axis=0)
        by = np.tile(rule.points_x, (len(rule), 1))
        x, y = bx @ tri_x, by @ tri_y
        weights = np.outer(rule.weights, rule.weights).ravel()
    return np.sum(weights * fn(x, y)) * twice_x * twice_y


@dataclass(frozen=True)
class StaticIntegrals:
    """
    Closed-form integrals of the static kernels over a flat triangle.

    With x = rho + d n (n the panel normal, rho in the panel plane) and
    R = |x - y|:
      s0 = int 1/R,  s1 = int (y - rho)/R,
      d0 = int d/R^3,  d1 = int (y - rho)/R^3.
    """

    d: np.ndarray
    rho: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    d0: np.ndarray
    d1: np.ndarray


def static_integrals(x: np.ndarray, tri: np.ndarray, normal: np.ndarray):
    """
    Evaluate ``StaticIntegrals`` for P observation points against P triangles.

    Args:
        x: (P, 3) observation points
        tri: (P, 3, 3) triangle vertices, counter-clockwise about ``normal``
        normal: (P, 3) unit normals

    Returns:
        StaticIntegrals with arrays of leading dimension P
    """
    x = np.atleast_2d(x)
    d = np.einsum("pi,pi->p", x - tri[:, 0], normal)
    # Coplanar points are snapped onto the plane so the solid angle vanishes
    scale = np.linalg.norm(tri[:, 1] - tri[:, 0], axis=1)
    d = np.where(np.abs(d) < 1e-12 * scale, 0.0, d)
    rho = x - d[:, None] * normal
    abs_d = np.abs(d)
    s0 = np.zeros(len(x))
    beta = np.zeros(len(x))
    s1 = np.zeros((len(x), 3))
    d1 = np.zeros((len(x), 3))
    for i in range(3):
        a, b = tri[:, i], tri[:, (i + 1) % 3]
        edge = b - a
        length = np.linalg.norm(edge, axis=1)
        s_hat = edge / length[:, None]
        m_hat = np.cross(s_hat, normal)
        l_minus = np.einsum("pi,pi->p", a - rho, s_hat)
        l_plus = np.einsum("pi,pi->p", b - rho, s_hat)
        p0 = np.einsum("pi,pi->p", a - rho, m_hat)
        r0_sq = p0**2 + d**2
        r0 = np.maximum(np.sqrt(r0_sq), 1e-14 * length)
        r_plus = np.sqrt(r0_sq + l_plus**2)
        r_minus = np.sqrt(r0_sq + l_minus**2)
        f = np.arcsinh(l_plus / r0) - np.arcsinh(l_minus / r0)
        beta += np.arctan2(p0 * l_plus, r0_sq + abs_d * r_plus) - np.arctan2(
            p0 * l_minus, r0_sq + abs_d * r_minus
        )
        s0 += p0 * f
        s1 += 0.5 * m_hat * (r0_sq * f + l_plus * r_plus - l_minus * r_minus)[:, None]
        d1 -= m_hat * f[:, None]
    s0 -= abs_d * beta
    d0 = np.sign(d) * beta
    return StaticIntegrals(d=d, rho=rho, s0=s0, s1=s1, d0=d0, d1=d1)
