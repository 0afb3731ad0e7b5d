import numpy as np
import pytest

from piezoscatter.core.exceptions import ConfigError, SymbolFitError
from piezoscatter.service.coupled_solver import assemble_system, riesz_weights
from piezoscatter.service.symbols import (
    MIN_SAMPLES,
    build_symbol,
    estimate_symbol_index,
    matrix_norm,
    power_law,
    power_norm,
)
from tests.conftest import make_material

OMEGAS = np.linspace(1.0, 20.0, 10)


def test_matrix_norm():
    assert matrix_norm(np.diag([1.0, -4.0, 2.0])) == pytest.approx(4.0, rel=1e-5)
    dense = np.arange(12.0).reshape(4, 3) + 1j
    assert matrix_norm(dense) == pytest.approx(np.linalg.norm(dense, 2), rel=1e-4)


def test_power_norm_of_zero():
    assert power_norm(lambda x: 0 * x, lambda y: 0 * y, 5) == 0.0


def test_power_law_fit():
    sample = estimate_symbol_index(power_law(3.0), [0.5, 1.0], OMEGAS, name="cube")
    assert sample.mu_hat == pytest.approx(3.0, abs=0.01)
    assert sample.m_hat == pytest.approx(0.0, abs=1e-8)
    assert sample.r_squared > 0.999
    assert len(sample.samples) == 2 * len(OMEGAS)
    assert sample.name == "cube"


def test_index_in_one_over_sigma():
    def norm(s):
        return abs(s) ** 2 / s.real

    sample = estimate_symbol_index(norm, [0.25, 0.5, 1.0], OMEGAS)
    assert sample.m_hat == pytest.approx(1.0, abs=0.05)
    assert sample.mu_hat == pytest.approx(2.0, abs=1e-6)


def test_single_line_has_no_m():
    sample = estimate_symbol_index(power_law(1.0), [1.0], OMEGAS)
    assert sample.m_hat is None
    assert sample.mu_hat == pytest.approx(1.0, abs=1e-6)


def test_poor_fit_reports_no_index():
    def norm(s):
        return 2.0 + np.sin(3.0 * s.imag)

    sample = estimate_symbol_index(norm, [1.0], OMEGAS)
    assert sample.mu_hat is None
    assert sample.r_squared < 0.95


def test_fit_rejects():
    with pytest.raises(SymbolFitError):
        estimate_symbol_index(power_law(1.0), [1.0], OMEGAS[: MIN_SAMPLES - 1])
    with pytest.raises(SymbolFitError):
        estimate_symbol_index(lambda s: 0.0, [1.0], OMEGAS)
    with pytest.raises(SymbolFitError):
        estimate_symbol_index(lambda s: np.nan, [1.0], OMEGAS)


def test_unknown_symbol(unit_cube, sample_material):
    with pytest.raises(ConfigError, match="single_layer"):
        build_symbol("hypersingular", unit_cube, sample_material)


def test_inverse_norm_matches_dense(reference_tet):
    mat = make_material()
    s = 1.0 + 1.0j
    norm = build_symbol("inverse", reference_tet, mat)(s)
    system = assemble_system(reference_tet, mat, s)
    root = np.sqrt(riesz_weights(system))
    weighted = root[:, None] * np.linalg.inv(system.matrix.toarray()) * root
    assert norm == pytest.approx(np.linalg.norm(weighted, 2), rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["single_layer", "double_layer", "composition"])
def test_symbol_norms_are_positive(name, reference_tet):
    norm = build_symbol(name, reference_tet, make_material())
    values = [norm(complex(1.0, omega)) for omega in (0.0, 5.0)]
    assert all(np.isfinite(v) and v > 0.0 for v in values)


@pytest.mark.slow
@pytest.mark.parametrize(
    "name, bound", [("single_layer", 1.3), ("double_layer", 1.8), ("inverse", 4.0)]
)
def test_symbol_index_upper_bounds(name, bound, reference_tet):
    norm = build_symbol(name, reference_tet, make_material())
    sample = estimate_symbol_index(norm, [0.5, 1.0], OMEGAS, name=name)
    assert max(sample.per_line_slopes) <= bound
    if sample.mu_hat is not None:
        assert sample.mu_hat <= bound
