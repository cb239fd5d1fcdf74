import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daiscope.geometry import Paths, SpoofShift, apply_shift, forward_geometry
from daiscope.signal_model import (
    PilotSet,
    SystemConfig,
    VirtualChannelParams,
    build_precoder,
    generate_pilots,
    noiseless_response,
    precode_pilots,
    response_block,
    snr_to_noise_variance,
    steering_derivative,
    steering_vector,
)

from conftest import reference_scenario


def test_units(cfg):
    assert cfg.wavelength == pytest.approx(0.005)
    assert cfg.n_ts == pytest.approx(16 / 30)
    assert cfg.antenna_spacing == pytest.approx(cfg.wavelength / 2)


def test_steering_vector_values(cfg):
    np.testing.assert_allclose(steering_vector(0.0, cfg), np.ones(16))
    np.testing.assert_allclose(steering_vector(math.pi / 2, cfg), (-1.0) ** np.arange(16), atol=1e-12)
    a = steering_vector(0.62025, cfg)
    assert a[1] == pytest.approx(np.exp(-1j * math.pi * 0.58124), abs=1e-5)


@given(st.floats(-4, 4))
def test_steering_unit_modulus(theta):
    np.testing.assert_allclose(np.abs(steering_vector(theta, SystemConfig())), 1.0, rtol=1e-13)


def test_steering_derivative(cfg):
    assert np.allclose(steering_derivative(math.pi / 2, cfg), 0.0, atol=1e-12)
    h = 1e-6
    fd = (steering_vector(0.3 + h, cfg) - steering_vector(0.3 - h, cfg)) / (2 * h)
    d = steering_derivative(0.3, cfg)
    assert d[0] == 0
    assert np.linalg.norm(fd - d) / np.linalg.norm(d) < 1e-6


def test_pilots(cfg):
    p = generate_pilots(cfg)
    assert p.symbols.shape == (16, 16, 16)
    np.testing.assert_allclose(np.abs(p.symbols), 1 / 4, rtol=1e-15)
    np.testing.assert_array_equal(p.symbols, generate_pilots(cfg).symbols)
    assert not np.array_equal(p.symbols, generate_pilots(cfg, seed=1).symbols)


def test_pilot_second_moment():
    cfg = SystemConfig(n_symbols=625, n_subcarriers=160, n_tx=4)  # 1e5 draws
    s = generate_pilots(cfg).symbols.reshape(-1, 4)
    cov = s.T @ s.conj() / s.shape[0]
    assert np.max(np.abs(cov - np.eye(4) / 4)) < 1e-2


def test_precoder(cfg):
    for n in (0, 5, 15):
        np.testing.assert_allclose(build_precoder(SpoofShift(0, 0), n, cfg), np.eye(16))
    sh = SpoofShift(0.1, 0.4)
    np.testing.assert_allclose(build_precoder(sh, 0, cfg), np.diag(steering_vector(0.4, cfg).conj()))
    phi = build_precoder(SpoofShift(cfg.ts, 0.0), 1, cfg)
    assert phi[0, 0] == pytest.approx(np.exp(-1j * math.pi / 8))
    phi = build_precoder(sh, 7, cfg)
    np.testing.assert_allclose(phi.conj().T @ phi, np.eye(16), atol=1e-14)
    with pytest.raises(IndexError):
        build_precoder(sh, 16, cfg)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-3, 3))
def test_precoding_equals_shifted_channel(dtau, dth):
    cfg = SystemConfig()
    sc = reference_scenario(cfg)
    pilots = generate_pilots(cfg)
    true = VirtualChannelParams(forward_geometry(sc, cfg.light_speed), sc.gains)
    shift = SpoofShift(dtau, dth)
    lhs = response_block(true, precode_pilots(pilots, shift, cfg), cfg)
    shifted = VirtualChannelParams(apply_shift(true.paths, shift, cfg.n_ts), sc.gains)
    rhs = response_block(shifted, pilots, cfg)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_scalar_response_matches_block(cfg, scenario):
    pilots = generate_pilots(cfg)
    vc = VirtualChannelParams(forward_geometry(scenario, cfg.light_speed), scenario.gains)
    block = response_block(vc, pilots, cfg)
    for g, n in [(0, 0), (3, 7), (15, 15)]:
        assert noiseless_response(vc, pilots, cfg, g, n) == pytest.approx(block[g, n], rel=1e-12)


def test_response_single_path():
    cfg = SystemConfig()
    pilots = PilotSet(np.ones((16, 16, 16), dtype=complex) / 4)
    gain = 0.3 - 0.2j
    vc = VirtualChannelParams(Paths([0.1], [0.0]), np.array([gain]))
    n = 5
    expected = gain * np.exp(-2j * math.pi * n * 0.1 / cfg.n_ts) * 4
    assert noiseless_response(vc, pilots, cfg, 2, n) == pytest.approx(expected)


def test_response_linear_in_gains(cfg, scenario):
    pilots = generate_pilots(cfg)
    paths = forward_geometry(scenario, cfg.light_speed)
    g = np.asarray(scenario.gains)
    a = response_block(VirtualChannelParams(paths, g), pilots, cfg)
    b = response_block(VirtualChannelParams(paths, 2.5j * g), pilots, cfg)
    np.testing.assert_allclose(b, 2.5j * a, rtol=1e-13)


def test_snr_scaling(cfg, scenario):
    pilots = generate_pilots(cfg)
    vc = VirtualChannelParams(forward_geometry(scenario, cfg.light_speed), scenario.gains)
    power = np.mean(np.abs(response_block(vc, pilots, cfg)) ** 2)
    assert snr_to_noise_variance(scenario, pilots, cfg.replace(snr_db=0.0)) == pytest.approx(power)
    s20 = snr_to_noise_variance(scenario, pilots, cfg)
    assert s20 == pytest.approx(power / 100)
    doubled = scenario.with_gains(2 * np.asarray(scenario.gains))
    assert snr_to_noise_variance(doubled, pilots, cfg) == pytest.approx(4 * s20)
