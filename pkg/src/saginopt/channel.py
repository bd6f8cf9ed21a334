"""Link-level channel synthesis for the satellite/BS/RIS downlink snapshot.

All channels are line-of-sight templates built from planar-array steering
vectors, free-space loss (4*pi*d/lambda)^2, the parabolic-dish receive
pattern, and a log-normal rain factor on space-originating paths. The BS to
RIS leakage is taken as zero (panel oriented with the BS on its backside).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import Frame, direction_angles, forward_halfspace


class InvalidGeometry(ValueError):
    """Dish too small relative to wavelength for the piecewise gain pattern."""


class HalfspaceViolation(ValueError):
    """A link endpoint sits behind the RIS panel; the pose is infeasible."""


@dataclass(frozen=True)
class ChannelSet:
    """All channel vectors/matrices for one RIS pose and rain realization.

    h: (K, N_S) satellite->ES          g: (K, N_R)    RIS->ES
    G: (K, N_R, N_S) satellite->RIS    q: (K, L, N_R) RIS->UE
    v: (K, L, N_B) BS->UE              u: (K, N_B)    BS->ES (interference)
    f: (K, L, N_S) satellite->UE       rain: (K,) linear attenuation factors
    """

    h: np.ndarray
    G: np.ndarray
    g: np.ndarray
    v: np.ndarray
    f: np.ndarray
    q: np.ndarray
    u: np.ndarray
    rain: np.ndarray

    def without_ris(self):
        """Copy with the reflect paths removed (baseline without the panel)."""
        return ChannelSet(h=self.h, G=np.zeros_like(self.G), g=np.zeros_like(self.g),
                          v=self.v, f=self.f, q=np.zeros_like(self.q), u=self.u,
                          rain=self.rain)

    def scaled(self, factor):
        """Multiply every channel entry by ``factor`` (noise-normalization aid)."""
        return ChannelSet(h=self.h * factor, G=self.G * factor, g=self.g * factor,
                          v=self.v * factor, f=self.f * factor, q=self.q * factor,
                          u=self.u * factor, rain=self.rain)


def steering_vector(geom, wavelength, angles):
    """Unit-norm planar-array response for the given departure/arrival angles.

    Element (nx-1)*ny_count + ny carries phase
    (2*pi/lambda)*d0*((nx-1)*sin(th)*cos(ph) + (ny-1)*sin(th)*sin(ph)).
    """
    k0 = 2.0 * np.pi / wavelength * geom.spacing
    sin_t = np.sin(angles.elevation)
    px = np.exp(1j * k0 * np.arange(geom.nx) * sin_t * np.cos(angles.azimuth))
    py = np.exp(1j * k0 * np.arange(geom.ny) * sin_t * np.sin(angles.azimuth))
    return np.kron(px, py) / np.sqrt(geom.size)


def max_dish_gain(diameter, wavelength, eta):
    return eta * (np.pi * diameter / wavelength) ** 2


def receive_gain(offaxis_deg, diameter, wavelength, eta):
    """Linear power gain of the parabolic dish at ``offaxis_deg`` degrees.

    Piecewise reference pattern: a quadratic (in dB) main lobe up to phi_m, a
    constant shoulder up to phi_r = 15.85*(D/lambda)^-0.6, then the
    32 - 25*log10(phi) skirt floored at -10 dBi.
    """
    ratio = diameter / wavelength
    if ratio <= 1.0:
        raise InvalidGeometry("dish diameter must exceed the wavelength")
    gmax_dbi = 10.0 * np.log10(max_dish_gain(diameter, wavelength, eta))
    phi_r = 15.85 * ratio ** (-0.6)
    shoulder = 32.0 - 25.0 * np.log10(phi_r)
    root = gmax_dbi - 32.0 - 25.0 * np.log10(phi_r)
    if root <= 0.0:
        raise InvalidGeometry("main lobe does not clear the sidelobe shoulder")
    phi_m = 20.0 / ratio * np.sqrt(root)
    if phi_m >= phi_r:
        raise InvalidGeometry("pattern breakpoints out of order (phi_m >= phi_r)")
    phi = float(offaxis_deg)
    if phi < phi_m:
        g_dbi = gmax_dbi - 0.0025 * (ratio * phi) ** 2
    elif phi <= phi_r:
        g_dbi = shoulder
    else:
        g_dbi = max(32.0 - 25.0 * np.log10(phi), -10.0)
    return 10.0 ** (g_dbi / 10.0)


def sample_rain(mu, sigma, seed, count):
    """Draw ``count`` linear rain attenuations: ln(xi_dB) ~ Normal(mu, sigma^2)."""
    rng = np.random.default_rng(seed)
    xi_db = np.exp(rng.normal(mu, sigma, size=count))
    return 10.0 ** (xi_db / 10.0)


def free_space_loss(distance, wavelength):
    return (4.0 * np.pi * distance / wavelength) ** 2


def _offaxis_deg(axis_boresight, frompoint, topoint):
    d = np.asarray(topoint, dtype=float) - np.asarray(frompoint, dtype=float)
    d /= np.linalg.norm(d)
    cosang = np.clip(np.dot(axis_boresight, d), -1.0, 1.0)
    return np.degrees(np.arccos(cosang))


def build_cell_ris_channels(scenario, k, ris_frame, rain_k):
    """Reflect-path channels of cell ``k`` for one candidate panel pose.

    Returns (G_k, g_k, q_k) and raises HalfspaceViolation when the satellite
    or the earth station is not on the panel's forward side.
    """
    s = scenario
    lam = s.carrier_wavelength
    nr_geom, ns_geom = s.ris_array, s.sat_array
    es = s.es_positions[k]
    t = ris_frame.translation
    if not forward_halfspace(ris_frame, s.sat_position):
        raise HalfspaceViolation("satellite behind RIS panel (cell %d)" % k)
    if not forward_halfspace(ris_frame, es):
        raise HalfspaceViolation("earth station behind RIS panel (cell %d)" % k)

    d_sr = np.linalg.norm(s.sat_position - t)
    a_arr = steering_vector(nr_geom, lam, direction_angles(ris_frame, s.sat_position))
    a_dep = steering_vector(ns_geom, lam, direction_angles(s.sat_frame, t))
    amp = np.sqrt(nr_geom.size * ns_geom.size / free_space_loss(d_sr, lam) / rain_k)
    G_k = amp * np.outer(a_arr, a_dep.conj())

    # Dish boresight is anti-parallel to the axis direction; the panel sits on
    # the axis, so the dish sees it at zero off-axis angle (full gain).
    gain_es = max_dish_gain(s.es_dish_diameter, lam, s.es_dish_efficiency)
    d_re = np.linalg.norm(es - t)
    a_es = steering_vector(nr_geom, lam, direction_angles(ris_frame, es))
    g_k = np.sqrt(nr_geom.size * gain_es / free_space_loss(d_re, lam)) * a_es

    L = s.num_ues_per_cell
    q_k = np.zeros((L, nr_geom.size), dtype=complex)
    for l in range(L):
        ue = s.ue_positions[k, l]
        d_ru = np.linalg.norm(ue - t)
        a_ue = steering_vector(nr_geom, lam, direction_angles(ris_frame, ue))
        q_k[l] = np.sqrt(nr_geom.size / free_space_loss(d_ru, lam)) * a_ue
    return G_k, g_k, q_k


def build_channels(scenario, ris_frames, rain):
    """Synthesize the full ChannelSet for the given panel poses and rain draw."""
    s = scenario
    lam = s.carrier_wavelength
    K, L = s.num_cells, s.num_ues_per_cell
    ns, nb, nr = s.sat_array.size, s.bs_array.size, s.ris_array.size
    rain = np.asarray(rain, dtype=float)

    h = np.zeros((K, ns), dtype=complex)
    G = np.zeros((K, nr, ns), dtype=complex)
    g = np.zeros((K, nr), dtype=complex)
    v = np.zeros((K, L, nb), dtype=complex)
    f = np.zeros((K, L, ns), dtype=complex)
    q = np.zeros((K, L, nr), dtype=complex)
    u = np.zeros((K, nb), dtype=complex)

    for k in range(K):
        es = s.es_positions[k]
        boresight = -s.es_axis_dirs[k]
        d_es = np.linalg.norm(s.sat_position - es)
        phi1 = _offaxis_deg(boresight, es, s.sat_position)
        gain1 = receive_gain(phi1, s.es_dish_diameter, lam, s.es_dish_efficiency)
        a_es = steering_vector(s.sat_array, lam, direction_angles(s.sat_frame, es))
        h[k] = np.sqrt(ns * gain1 / free_space_loss(d_es, lam) / rain[k]) * a_es

        G[k], g[k], q[k] = build_cell_ris_channels(s, k, ris_frames[k], rain[k])

        bs_frame = s.bs_frames[k]
        phi_u = _offaxis_deg(boresight, es, bs_frame.translation)
        gain_u = receive_gain(phi_u, s.es_dish_diameter, lam, s.es_dish_efficiency)
        d_be = np.linalg.norm(bs_frame.translation - es)
        b_es = steering_vector(s.bs_array, lam, direction_angles(bs_frame, es))
        u[k] = np.sqrt(nb * gain_u / free_space_loss(d_be, lam)) * b_es

        for l in range(L):
            ue = s.ue_positions[k, l]
            d_u = np.linalg.norm(ue - bs_frame.translation)
            b_ue = steering_vector(s.bs_array, lam, direction_angles(bs_frame, ue))
            v[k, l] = np.sqrt(nb / free_space_loss(d_u, lam)) * b_ue
            d_su = np.linalg.norm(s.sat_position - ue)
            a_ue = steering_vector(s.sat_array, lam, direction_angles(s.sat_frame, ue))
            f[k, l] = np.sqrt(ns / free_space_loss(d_su, lam) / rain[k]) * a_ue

    return ChannelSet(h=h, G=G, g=g, v=v, f=f, q=q, u=u, rain=rain)


def effective_channels(channels, phases):
    """Combine direct and reflected paths through the per-cell phase vectors.

    Returns (h_eff, f_eff) with h_eff[k]^H = h[k]^H + g[k]^H Psi_k G[k] and the
    analogous satellite->UE composite.
    """
    K = channels.h.shape[0]
    L = channels.q.shape[1]
    h_eff = np.array(channels.h, copy=True)
    f_eff = np.array(channels.f, copy=True)
    for k in range(K):
        zeta = np.exp(1j * phases[k])
        # a^H Psi B == zeta^T diag(a^H) B, evaluated right-to-left
        cascade_rows = channels.G[k] * zeta[:, None]
        h_eff[k] += (channels.g[k].conj() @ cascade_rows).conj()
        for l in range(L):
            f_eff[k, l] += (channels.q[k, l].conj() @ cascade_rows).conj()
    return h_eff, f_eff


def dump_channels_csv(channels, path):
    """Write every channel entry as ``link,indices...,re,im`` rows (debug aid)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("link,i,j,l,re,im\n")
        def emit(tag, arr):
            it = np.nditer(arr, flags=["multi_index"])
            for val in it:
                idx = list(it.multi_index) + [0] * (3 - len(it.multi_index))
                fh.write("%s,%d,%d,%d,%.17g,%.17g\n"
                         % (tag, idx[0], idx[1], idx[2],
                            float(np.real(val)), float(np.imag(val))))
        emit("h", channels.h)
        emit("G", channels.G)
        emit("g", channels.g)
        emit("v", channels.v)
        emit("f", channels.f)
        emit("q", channels.q)
        emit("u", channels.u)
        emit("rain", channels.rain.astype(complex))
