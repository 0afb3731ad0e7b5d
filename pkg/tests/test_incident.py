import numpy as np
import pytest
from scipy.integrate import trapezoid

from piezoscatter.core.exceptions import ProbeError, TransformUnavailableError
from piezoscatter.dto.config import WaveletDTO
from piezoscatter.service.incident import (
    GaussianPulse,
    PlaneWave,
    PointSource,
    ProblemData,
    Ramp,
    build_wavelet,
    smoothstep,
    surface_pattern_loads,
)

S = 1.0 + 1.0j


def _numeric_laplace(fn, s, t_max=20.0, n=200001):
    t = np.linspace(0.0, t_max, n)
    return trapezoid(np.exp(-s * t) * fn(t), t)


@pytest.mark.parametrize("omega0", [0.0, 3.0])
def test_gaussian_transform(omega0):
    pulse = GaussianPulse(amplitude=1.5, a=4.0, t0=3.0, omega0=omega0)
    assert pulse.laplace(S) == pytest.approx(_numeric_laplace(pulse, S), rel=1e-7)


def test_gaussian_transform_early_pulse():
    pulse = GaussianPulse(amplitude=1.0, a=1.0, t0=0.5)
    assert pulse.laplace(2.0) == pytest.approx(_numeric_laplace(pulse, 2.0), rel=1e-7)


def test_gaussian_is_causal():
    pulse = GaussianPulse(amplitude=1.0, a=4.0, t0=3.0, omega0=3.0)
    assert pulse.onset == pytest.approx(0.5)
    assert pulse(-1.0) == 0.0
    assert abs(pulse(pulse.onset)) < 1e-10
    assert GaussianPulse(1.0, 4.0, 1.0).onset == 0.0


def test_smoothstep():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(smoothstep(x), [0.0, 0.0, 0.5, 1.0, 1.0])
    h = 1e-3
    assert smoothstep(h) < 1e-12
    assert 1.0 - smoothstep(1.0 - h) < 1e-12


def test_ramp():
    ramp = Ramp(amplitude=2.0, t0=1.0, rise_time=0.5)
    assert ramp.onset == 1.0
    np.testing.assert_allclose(ramp(np.array([0.5, 1.25, 3.0])), [0.0, 1.0, 2.0])
    with pytest.raises(TransformUnavailableError):
        ramp.laplace(S)


def test_build_wavelet():
    ramp = build_wavelet(WaveletDTO(name="ramp", t0=1.0, rise_time=0.5))
    assert isinstance(ramp, Ramp)
    example = WaveletDTO.model_config["json_schema_extra"]["example"]
    pulse = build_wavelet(WaveletDTO.model_validate(example))
    assert pulse == GaussianPulse(amplitude=1.0, a=4.0, t0=3.0, omega0=3.0)


def test_plane_wave_pattern():
    wave = PlaneWave(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]), 2.0)
    x = np.array([[0.3, 0.1, 1.0], [0.0, 0.0, -1.0]])
    np.testing.assert_allclose(wave.arrival(x), [1.0, 0.0])
    values, gradients = wave.pattern(S, x)
    np.testing.assert_allclose(values, np.exp(-S * np.array([1.0, 0.0])))
    np.testing.assert_allclose(gradients[:, 2], -S / 2.0 * values)
    np.testing.assert_allclose(gradients[:, :2], 0.0)


def test_point_source_pattern():
    source = PointSource(np.zeros(3), 2.0, 1.0)
    x = np.array([[0.0, 3.0, 4.0]])
    values, gradients = source.pattern(S, x)
    assert values[0] == pytest.approx(2.0 * np.exp(-5.0 * S) / 5.0)
    h = 1e-6
    shifted, _ = source.pattern(S, x + [0.0, 0.0, h])
    assert gradients[0, 2] == pytest.approx((shifted[0] - values[0]) / h, rel=1e-5)
    with pytest.raises(ProbeError):
        source.pattern(S, np.zeros((1, 3)))


def test_surface_loads_balance(unit_cube):
    wave = PlaneWave(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]), 1.0)
    trace_load, flux_load = surface_pattern_loads(unit_cube, wave, S)
    exact = S * (np.exp(-S) - np.exp(-2.0 * S))
    assert flux_load.sum() == pytest.approx(exact, rel=1e-8)
    assert trace_load[2::3].sum() == pytest.approx(exact / S, rel=1e-8)
    assert abs(trace_load[0::3].sum()) < 1e-6


def test_problem_data(unit_cube, sample_config):
    data = ProblemData(unit_cube, sample_config)
    assert data.first_arrival == pytest.approx(1.5)
    patterns = data.patterns(S)
    assert [p.name for p in patterns] == ["incident"]
    loads = data.laplace_loads(S)
    assert set(loads) == {"u", "phi_gamma"}
    samples = data.boundary_samples(np.array([0.0, 1.4, 4.0]))
    assert samples.shape == (3, len(unit_cube.boundary_vertices) + 2)
    assert np.abs(samples[:2]).max() < 1e-10
    assert np.abs(samples[2]).max() > 0.1


def test_boundary_sources(unit_cube, sample_config):
    config = sample_config.model_copy(deep=True)
    config.boundary_data.f_theta.value = 2.0
    config.boundary_data.f_D.value = 0.5
    patterns = {p.name: p for p in ProblemData(unit_cube, config).patterns(S)}
    assert set(patterns) == {"incident", "f_theta", "f_D"}
    assert patterns["f_theta"].blocks["theta"].sum() == pytest.approx(12.0)
    assert patterns["f_D"].blocks["phi"].sum() == pytest.approx(-3.0)


def test_ramp_incident_needs_time_domain(unit_cube, sample_config):
    config = sample_config.model_copy(deep=True)
    config.incident.wavelet = WaveletDTO(name="ramp", t0=1.0, rise_time=0.5)
    data = ProblemData(unit_cube, config)
    with pytest.raises(TransformUnavailableError):
        data.laplace_loads(S)
    assert data.first_arrival == pytest.approx(2.0)
