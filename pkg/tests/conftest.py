import numpy as np
import pytest

from saginopt.channel import ChannelSet
from saginopt.geometry import Frame
from saginopt.scenario import ArrayGeometry, Box, DesignVariables, Scenario


def complex_array(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_instance(rng, K=2, L=1, n_sat=3, n_bs=3, n_ris=2, channel_scale=1.0,
                    beam_scale=1.0):
    """Synthetic O(1)-scale channels and beams for signal-level tests."""
    channels = ChannelSet(
        h=complex_array(rng, (K, n_sat), channel_scale),
        G=complex_array(rng, (K, n_ris, n_sat), channel_scale),
        g=complex_array(rng, (K, n_ris), channel_scale),
        v=complex_array(rng, (K, L, n_bs), channel_scale),
        f=complex_array(rng, (K, L, n_sat), 0.3 * channel_scale),
        q=complex_array(rng, (K, L, n_ris), 0.3 * channel_scale),
        u=complex_array(rng, (K, n_bs), 0.3 * channel_scale),
        rain=np.ones(K),
    )
    vars_ = DesignVariables(
        w_sat_common=complex_array(rng, (n_sat,), beam_scale),
        w_sat=complex_array(rng, (K, n_sat), beam_scale),
        w_bs_common=complex_array(rng, (K, n_bs), beam_scale),
        w_bs=complex_array(rng, (K, L, n_bs), beam_scale),
        phases=rng.uniform(0.0, 2.0 * np.pi, size=(K, n_ris)),
        ris_frames=[],
        rate_common_es=np.zeros(K),
        rate_common_ue=np.zeros((K, L)),
    )
    noise_es = 0.5 + rng.uniform(size=K)
    noise_ue = 0.5 + rng.uniform(size=(K, L))
    return channels, vars_, noise_es, noise_ue


def toy_scenario(K=1, L=1, n=2, noise=1.0, p_sat=4.0, p_bs=2.0,
                 qos_es=0.0, qos_ue=0.0, weights=None,
                 sat_position=(0.0, 0.0, 1000.0)):
    """Small valid scenario with O(1) noise for solver-level unit tests."""
    lam = 0.01
    arr = ArrayGeometry(n, 1, lam / 2.0)
    down = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    es = np.array([[500.0 * k, 0.0, 0.0] for k in range(K)])
    bs_frames = tuple(Frame(down, es[k] + np.array([50.0, 40.0, 20.0]))
                      for k in range(K))
    ue = np.zeros((K, L, 3))
    for k in range(K):
        for l in range(L):
            ue[k, l] = es[k] + np.array([30.0 + 10.0 * l, 60.0, 0.0])
    axis = np.tile(np.array([0.0, np.sin(0.5), -np.cos(0.5)]), (K, 1))
    if weights is None:
        weights = np.full((K, L + 1), 1.0 / (K * (L + 1)))
    regions = tuple(Box(es[k] + np.array([-200.0, -200.0, 10.0]),
                        es[k] + np.array([200.0, 200.0, 400.0])) for k in range(K))
    return Scenario(
        carrier_wavelength=lam, num_cells=K, num_ues_per_cell=L,
        sat_position=np.asarray(sat_position, dtype=float),
        sat_array=arr, bs_array=arr, ris_array=arr,
        sat_frame=Frame(down, np.asarray(sat_position, dtype=float)),
        bs_frames=bs_frames, es_positions=es, ue_positions=ue,
        es_dish_diameter=0.5, es_dish_efficiency=0.6, es_axis_dirs=axis,
        rain_mu=-3.125, rain_sigma=0.0,
        noise_es=np.full(K, noise), noise_ue=np.full((K, L), noise),
        p_sat_max=p_sat, p_bs_max=p_bs, weights=np.asarray(weights, dtype=float),
        qos_es_min=qos_es, qos_ue_min=qos_ue,
        uav_height_min=50.0, uav_height_max=200.0, uav_regions=regions,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
