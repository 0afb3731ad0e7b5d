import numpy as np
import pytest

from piezoscatter.core.exceptions import ConfigError, MaterialConstraintError
from piezoscatter.core.laplace import LaplaceParameter, parse_laplace_parameter


def test_parameter_rejects_closed_left_half_plane():
    with pytest.raises(ConfigError):
        LaplaceParameter(0.0 + 1.0j)
    with pytest.raises(ConfigError):
        LaplaceParameter(-1.0)


def test_sigma_under_is_clamped_to_one():
    assert LaplaceParameter(0.25 + 3j).sigma_under == 0.25
    assert LaplaceParameter(4.0 + 3j).sigma_under == 1.0
    assert LaplaceParameter(3.0 + 4.0j).modulus == pytest.approx(5.0)


def test_scaling_weights():
    s = 2.0 + 1.0j
    weights = LaplaceParameter(s).scaling_weights()
    assert weights[0] == np.conj(s)
    assert weights[1] == 1.0
    assert weights[2] == s
    assert weights[3] == pytest.approx(np.conj(s) / abs(s) ** 2)


@pytest.mark.parametrize(
    "text, expected", [("1,2", 1 + 2j), (" 0.5 , -3 ", 0.5 - 3j), ("2", 2 + 0j)]
)
def test_parse_laplace_parameter(text, expected):
    assert parse_laplace_parameter(text).s == expected


@pytest.mark.parametrize("text", ["a,b", "1,2,3", "-1,0", "0,1"])
def test_parse_laplace_parameter_rejects(text):
    with pytest.raises(ConfigError):
        parse_laplace_parameter(text)


def test_material_constants(sample_material):
    mat = sample_material
    assert mat.piezo_e.shape == (3, 3, 3)
    np.testing.assert_allclose(mat.piezo_e, mat.piezo_e.transpose(0, 2, 1))
    assert mat.c1 == pytest.approx(0.9)
    assert mat.c2 == pytest.approx(0.9)
    mat.check_pyro_constraint()


def test_pyro_constraint_violation(sample_material):
    from dataclasses import replace

    strong = replace(sample_material, pyro_p=np.array([2.0, 0.0, 0.0]))
    with pytest.raises(MaterialConstraintError):
        strong.check_pyro_constraint()


def test_decoupled_limit_zeroes_couplings(sample_material):
    mat = sample_material.decoupled()
    assert not mat.piezo_e.any()
    assert not mat.pyro_p.any()
    assert mat.zeta == 0.0
    assert mat.lame_mu == sample_material.lame_mu


def test_piezo_sign_warnings(sample_material, caplog):
    assert sample_material.piezo_sign_warnings() == 0
    flipped = np.full((3, 6), 0.1)
    flipped[0, 0] = -0.1
    from dataclasses import replace

    assert replace(sample_material, piezo_e=flipped).piezo_sign_warnings() == 1
    assert "not positive" in caplog.text
