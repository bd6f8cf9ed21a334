import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from saginopt.channel import (HalfspaceViolation, InvalidGeometry, build_channels,
                              dump_channels_csv, effective_channels,
                              free_space_loss, max_dish_gain, receive_gain,
                              sample_rain, steering_vector)
from saginopt.geometry import DirectionAngles, EulerAngles, Frame, rotation_from_euler
from saginopt.scenario import ArrayGeometry, default_scenario

from conftest import toy_scenario

LAM = 0.0107068735


def test_steering_boresight_uniform():
    geom = ArrayGeometry(4, 3, LAM / 2)
    a = steering_vector(geom, LAM, DirectionAngles(0.0, 1.3))
    np.testing.assert_allclose(a, np.full(12, 1.0 / np.sqrt(12.0)), atol=1e-15)


def test_steering_two_element_endfire():
    geom = ArrayGeometry(2, 1, LAM / 2)
    a = steering_vector(geom, LAM, DirectionAngles(np.pi / 2, 0.0))
    np.testing.assert_allclose(a, [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-12)


def test_steering_element_phase_layout():
    geom = ArrayGeometry(3, 4, 0.7 * LAM)
    theta, phi = 0.9, -2.1
    a = steering_vector(geom, LAM, DirectionAngles(theta, phi))
    k0 = 2 * np.pi / LAM * geom.spacing
    for nx in range(3):
        for ny in range(4):
            expected = np.exp(1j * k0 * (nx * np.sin(theta) * np.cos(phi)
                                         + ny * np.sin(theta) * np.sin(phi)))
            assert a[nx * 4 + ny] * np.sqrt(12) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60)
@given(st.floats(0, np.pi / 2), st.floats(-np.pi, np.pi),
       st.integers(1, 5), st.integers(1, 5))
def test_steering_unit_norm(theta, phi, nx, ny):
    geom = ArrayGeometry(nx, ny, LAM / 2)
    a = steering_vector(geom, LAM, DirectionAngles(theta, phi))
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)


class TestReceiveGain:
    D, ETA = 0.5, 0.6

    def test_boresight_is_max_gain(self):
        g = receive_gain(0.0, self.D, LAM, self.ETA)
        assert g == pytest.approx(self.ETA * (np.pi * self.D / LAM) ** 2)

    def test_backlobe_floor(self):
        # 32 - 25*log10(180) ~ -24 dBi, clipped at the -10 dBi floor
        assert receive_gain(180.0, self.D, LAM, self.ETA) == pytest.approx(0.1)

    def test_skirt_value_at_ten_degrees(self):
        # D/lambda = 46.7: phi_r ~ 1.58 deg, so 10 deg sits on the log skirt
        ratio = self.D / LAM
        assert 15.85 * ratio ** -0.6 == pytest.approx(1.58, abs=0.01)
        g = receive_gain(10.0, self.D, LAM, self.ETA)
        assert 10 * np.log10(g) == pytest.approx(32 - 25.0, abs=1e-12)

    def test_pieces_non_increasing_at_boundaries(self):
        ratio = self.D / LAM
        phi_r = 15.85 * ratio ** -0.6
        gmax_dbi = 10 * np.log10(self.ETA * (np.pi * ratio) ** 2)
        phi_m = 20 / ratio * np.sqrt(gmax_dbi - 32 - 25 * np.log10(phi_r))
        for phi in (phi_m, phi_r):
            left = receive_gain(phi - 1e-9, self.D, LAM, self.ETA)
            right = receive_gain(phi + 1e-9, self.D, LAM, self.ETA)
            assert 10 * np.log10(left) >= 10 * np.log10(right) - 0.5

    def test_degenerate_dish_rejected(self):
        with pytest.raises(InvalidGeometry):
            receive_gain(0.0, 1.5 * LAM, LAM, 0.3)


class TestRain:
    def test_zero_sigma_closed_form(self):
        xi = sample_rain(-3.125, 0.0, seed=4, count=5)
        expected = 10.0 ** (np.exp(-3.125) / 10.0)
        np.testing.assert_allclose(xi, expected)
        assert expected == pytest.approx(1.01017, abs=1e-5)

    def test_log_db_mean_matches_parameters(self):
        mu, sigma, n = -3.125, 1.591, 100_000
        xi = sample_rain(mu, sigma, seed=0, count=n)
        log_db = np.log(10.0 * np.log10(xi))
        assert abs(np.mean(log_db) - mu) < 3.0 * sigma / np.sqrt(n)

    def test_deterministic_given_seed(self):
        np.testing.assert_array_equal(sample_rain(-3.125, 1.591, 9, 4),
                                      sample_rain(-3.125, 1.591, 9, 4))


def _aimed_scenario():
    """Toy scenario with the dish axis pointed straight at the satellite."""
    s = toy_scenario(K=1, L=1, n=2, sat_position=(0.0, 0.0, 600e3))
    axis = np.array([[0.0, 1e-8, -1.0]])
    axis /= np.linalg.norm(axis)
    return replace(s, es_axis_dirs=axis)


def _bisector_frame(scenario, k, translation):
    """Panel frame whose normal sees both the satellite and the earth station."""
    t = np.asarray(translation, dtype=float)
    to_sat = scenario.sat_position - t
    to_es = scenario.es_positions[k] - t
    normal = to_sat / np.linalg.norm(to_sat) + to_es / np.linalg.norm(to_es)
    normal /= np.linalg.norm(normal)
    seed = np.array([1.0, 0.0, 0.0])
    x_axis = seed - (seed @ normal) * normal
    x_axis /= np.linalg.norm(x_axis)
    return Frame(np.column_stack([x_axis, np.cross(normal, x_axis), normal]), t)


def test_satellite_channel_magnitude():
    s = _aimed_scenario()
    frame = _bisector_frame(s, 0, [0.0, 30.0, 100.0])
    ch = build_channels(s, [frame], rain=np.ones(1))
    d = 600e3
    beta = free_space_loss(d, s.carrier_wavelength)
    gain = max_dish_gain(s.es_dish_diameter, s.carrier_wavelength,
                         s.es_dish_efficiency)
    expected = s.sat_array.size * gain / beta
    assert np.sum(np.abs(ch.h[0]) ** 2) == pytest.approx(expected, rel=1e-9)
    # spot value for the free-space loss itself
    assert free_space_loss(600e3, 0.0107) == pytest.approx(4.965e17, rel=1e-3)


def test_bs_channel_magnitude():
    s = _aimed_scenario()
    frame = _bisector_frame(s, 0, [0.0, 30.0, 100.0])
    ch = build_channels(s, [frame], rain=np.ones(1))
    d = np.linalg.norm(s.ue_positions[0, 0] - s.bs_frames[0].translation)
    expected = s.carrier_wavelength * np.sqrt(s.bs_array.size) / (4 * np.pi * d)
    assert np.linalg.norm(ch.v[0, 0]) == pytest.approx(expected, rel=1e-9)


def test_halfspace_violation_rejected():
    s = _aimed_scenario()
    facing_away = Frame(rotation_from_euler(EulerAngles(np.pi, 0, 0)),
                        [0.0, 30.0, 100.0])
    with pytest.raises(HalfspaceViolation):
        build_channels(s, [facing_away], rain=np.ones(1))


def test_build_channels_deterministic():
    s = default_scenario(seed=2)
    frames = [_bisector_frame(s, k, s.es_positions[k] + [0, -20.0, 100.0])
              for k in range(3)]
    rain = sample_rain(s.rain_mu, s.rain_sigma, 0, 3)
    a = build_channels(s, frames, rain)
    b = build_channels(s, frames, rain)
    np.testing.assert_array_equal(a.h, b.h)
    np.testing.assert_array_equal(a.G, b.G)


class TestEffectiveChannels:
    def test_no_reflection(self, rng):
        from conftest import random_instance
        channels, vars_, _, _ = random_instance(rng)
        quiet = channels.without_ris()
        h_eff, f_eff = effective_channels(quiet, vars_.phases)
        np.testing.assert_array_equal(h_eff, quiet.h)
        np.testing.assert_array_equal(f_eff, quiet.f)

    def test_single_element_hand_expansion(self, rng):
        from conftest import random_instance
        channels, vars_, _, _ = random_instance(rng, K=1, L=1, n_ris=1)
        psi = vars_.phases[0, 0]
        h_eff, _ = effective_channels(channels, vars_.phases)
        manual = channels.h[0].conj() + channels.g[0, 0].conj() \
            * np.exp(1j * psi) * channels.G[0, 0]
        np.testing.assert_allclose(h_eff[0].conj(), manual, atol=1e-12)

    def test_diagonal_identity(self, rng):
        from conftest import random_instance
        channels, vars_, _, _ = random_instance(rng, K=2, L=2, n_ris=4)
        h_eff, _ = effective_channels(channels, vars_.phases)
        for k in range(2):
            zeta = np.exp(1j * vars_.phases[k])
            cascade = zeta @ (np.diag(channels.g[k].conj()) @ channels.G[k])
            manual = channels.h[k].conj() + cascade
            np.testing.assert_allclose(h_eff[k].conj(), manual, atol=1e-12)


def test_channel_dump_roundtrippable(tmp_path, rng):
    from conftest import random_instance
    channels, _, _, _ = random_instance(rng, K=1, L=1, n_sat=2, n_bs=2, n_ris=2)
    path = tmp_path / "channels.csv"
    dump_channels_csv(channels, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "link,i,j,l,re,im"
    h_lines = [l for l in lines if l.startswith("h,")]
    assert len(h_lines) == 2
    re0, im0 = map(float, h_lines[0].split(",")[4:])
    assert re0 + 1j * im0 == pytest.approx(channels.h[0, 0])
