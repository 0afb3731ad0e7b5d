from math import factorial

import numpy as np
import pytest

from piezoscatter.core.exceptions import QuadratureError
from piezoscatter.service.quadrature import (
    MAX_ORDER,
    pair_integral,
    pair_kind,
    singular_rule,
    static_integrals,
    triangle_rule,
)

TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.2, 0.8, 0.0]])
NORMAL = np.array([0.0, 0.0, 1.0])


def _monomial(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("order", [1, 3, 5, 8])
def test_triangle_rule_exact(order):
    rule = triangle_rule(order)
    assert rule.measure == pytest.approx(0.5)
    xi, eta = rule.points_x[:, 1], rule.points_x[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            value = np.sum(rule.weights * xi**a * eta**b)
            assert value == pytest.approx(_monomial(a, b), rel=1e-12)


@pytest.mark.parametrize("kind", ["coincident", "shared-edge", "shared-vertex"])
def test_pair_rules_measure(kind):
    rule = singular_rule(kind, 4)
    assert rule.is_pair
    assert rule.measure == pytest.approx(0.25)
    np.testing.assert_allclose(rule.points_x.sum(axis=1), 1.0)
    np.testing.assert_allclose(rule.points_y.sum(axis=1), 1.0)


def test_rules_are_read_only():
    rule = singular_rule("coincident", 3)
    with pytest.raises(ValueError):
        rule.weights[0] = 0.0


@pytest.mark.parametrize("order", [0, MAX_ORDER + 1])
def test_unsupported_order(order):
    with pytest.raises(QuadratureError):
        singular_rule("coincident", order)


def test_unknown_kind():
    with pytest.raises(QuadratureError):
        singular_rule("near", 3)


def test_pair_kind():
    assert pair_kind([0, 1, 2], [3, 4, 5])[0] == "regular"
    kind, order_x, order_y = pair_kind([0, 1, 2], [2, 1, 0])
    assert kind == "coincident"
    assert [[0, 1, 2][i] for i in order_x] == [[2, 1, 0][j] for j in order_y]
    kind, order_x, order_y = pair_kind([0, 1, 2], [1, 3, 2])
    assert kind == "shared-edge"
    assert [[0, 1, 2][i] for i in order_x[:2]] == [[1, 3, 2][j] for j in order_y[:2]]
    kind, order_x, order_y = pair_kind([0, 1, 2], [5, 4, 2])
    assert kind == "shared-vertex"
    assert order_x[0] == 2 and order_y[0] == 2


def test_pair_integral_of_constant():
    area = 0.5 * np.linalg.norm(np.cross(TRI[1] - TRI[0], TRI[2] - TRI[0]))
    value = pair_integral(
        lambda x, y: np.ones(len(x)), TRI, TRI, singular_rule("coincident", 3)
    )
    assert value == pytest.approx(area**2)


def _numeric(fn, tri, order=30):
    rule = triangle_rule(order)
    y = rule.points_x @ tri
    twice = np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    return np.sum(rule.weights * fn(y), axis=0) * twice


@pytest.mark.parametrize("height", [0.7, -0.4])
def test_static_integrals_off_panel(height):
    x = np.array([0.4, 0.3, height])
    exact = static_integrals(x[None], TRI[None], NORMAL[None])
    r = lambda y: np.linalg.norm(x - y, axis=1)  # noqa: E731
    assert exact.s0[0] == pytest.approx(_numeric(lambda y: 1.0 / r(y), TRI), rel=1e-8)
    d0 = _numeric(lambda y: height / r(y) ** 3, TRI)
    assert exact.d0[0] == pytest.approx(d0, rel=1e-8)


def test_coplanar_point_has_no_solid_angle():
    x = np.array([[0.4, 0.3, 0.0]])
    exact = static_integrals(x, TRI[None], NORMAL[None])
    assert exact.d0[0] == 0.0
    assert exact.s0[0] > 0.0


def test_coincident_rule_against_closed_form():
    inner = triangle_rule(12)
    x = inner.points_x @ TRI
    tris = np.repeat(TRI[None], len(x), axis=0)
    closed = static_integrals(x, tris, np.tile(NORMAL, (len(x), 1)))
    twice = np.linalg.norm(np.cross(TRI[1] - TRI[0], TRI[2] - TRI[0]))
    reference = np.sum(inner.weights * closed.s0) * twice
    value = pair_integral(
        lambda x, y: 1.0 / np.linalg.norm(x - y, axis=1),
        TRI,
        TRI,
        singular_rule("coincident", 8),
    )
    assert value == pytest.approx(reference, rel=1e-3)


def test_regular_rule_converges_on_nearby_panels():
    above = TRI + np.array([0.1, 0.1, 0.5])

    def kernel(x, y):
        return 1.0 / (4.0 * np.pi * np.linalg.norm(x - y, axis=1))

    reference = pair_integral(kernel, TRI, above, triangle_rule(30))
    errors = [
        abs(pair_integral(kernel, TRI, above, triangle_rule(order)) - reference)
        for order in (4, 8)
    ]
    assert errors[1] < errors[0] / 10.0
