"""Network snapshot (all constants of the design problem) and the optimization state.

``Scenario`` is immutable and shared read-only; ``DesignVariables`` bundles
everything the optimizer is allowed to move: satellite/BS beamformers, RIS
phase vectors, RIS-UAV poses and the common-rate plan.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Frame, identity_frame

SPEED_OF_LIGHT = 299792458.0


def dbm_to_watts(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts):
    return 10.0 * math.log10(watts * 1e3)


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular planar array: nx-by-ny elements spaced ``spacing`` meters apart."""

    nx: int
    ny: int
    spacing: float

    @property
    def size(self):
        return self.nx * self.ny


@dataclass(frozen=True)
class Box:
    """Axis-aligned region; bounds are inclusive."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    def contains(self, point, tol=0.0):
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


@dataclass(frozen=True)
class Scenario:
    """One network snapshot: geometry, powers, noise, weights and QoS floors.

    Positions are meters in the global frame. ``es_axis_dirs`` holds the unit
    direction of each earth-station dish axis pointing from the sky down to
    the dish (third component negative); the dish boresight is its negation,
    and the relay UAV is constrained to that axis.
    """

    carrier_wavelength: float
    num_cells: int
    num_ues_per_cell: int
    sat_position: np.ndarray
    sat_array: ArrayGeometry
    bs_array: ArrayGeometry
    ris_array: ArrayGeometry
    sat_frame: Frame
    bs_frames: tuple
    es_positions: np.ndarray
    ue_positions: np.ndarray
    es_dish_diameter: float
    es_dish_efficiency: float
    es_axis_dirs: np.ndarray
    rain_mu: float
    rain_sigma: float
    noise_es: np.ndarray
    noise_ue: np.ndarray
    p_sat_max: float
    p_bs_max: float
    weights: np.ndarray
    qos_es_min: float
    qos_ue_min: float
    uav_height_min: float
    uav_height_max: float
    uav_regions: tuple

    def __post_init__(self):
        for name in ("sat_position", "es_positions", "ue_positions", "es_axis_dirs",
                     "noise_es", "noise_ue", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "bs_frames", tuple(self.bs_frames))
        object.__setattr__(self, "uav_regions", tuple(self.uav_regions))


def validate(scenario):
    """Check every scenario invariant; returns a list of violation strings.

    An empty list means every downstream module may consume the scenario
    without further precondition checks.
    """
    v = []
    s = scenario
    if s.carrier_wavelength <= 0:
        v.append("carrier_wavelength must be > 0 (got %g)" % s.carrier_wavelength)
    if s.num_cells < 1:
        v.append("num_cells must be >= 1")
    if s.num_ues_per_cell < 1:
        v.append("num_ues_per_cell must be >= 1")
    for tag, arr in (("sat", s.sat_array), ("bs", s.bs_array), ("ris", s.ris_array)):
        if arr.nx < 1 or arr.ny < 1:
            v.append("%s_array element counts must be >= 1" % tag)
        if arr.spacing <= 0:
            v.append("%s_array spacing must be > 0" % tag)
    K, L = s.num_cells, s.num_ues_per_cell
    if s.es_positions.shape != (K, 3):
        v.append("es_positions must have shape (K,3)")
    if s.ue_positions.shape != (K, L, 3):
        v.append("ue_positions must have shape (K,L,3)")
    if s.es_axis_dirs.shape != (K, 3):
        v.append("es_axis_dirs must have shape (K,3)")
    else:
        for k in range(K):
            n = np.linalg.norm(s.es_axis_dirs[k])
            if abs(n - 1.0) > 1e-9:
                v.append("es_axis_dirs[%d] must be unit norm (|p|=%g)" % (k, n))
            if s.es_axis_dirs[k][2] >= 0:
                v.append("es_axis_dirs[%d] third component must be < 0 so the "
                         "axis height interval is nonempty" % k)
    if not (0 < s.es_dish_efficiency <= 1):
        v.append("es_dish_efficiency must lie in (0,1]")
    if s.es_dish_diameter <= 0:
        v.append("es_dish_diameter must be > 0")
    if s.rain_sigma < 0:
        v.append("rain_sigma must be >= 0")
    if s.noise_es.shape != (K,) or np.any(s.noise_es <= 0):
        v.append("noise_es must be K strictly positive powers")
    if s.noise_ue.shape != (K, L) or np.any(s.noise_ue <= 0):
        v.append("noise_ue must be KxL strictly positive powers")
    if s.p_sat_max <= 0:
        v.append("p_sat_max must be > 0")
    if s.p_bs_max <= 0:
        v.append("p_bs_max must be > 0")
    if s.weights.shape != (K, L + 1):
        v.append("weights must have shape (K, L+1)")
    else:
        if np.any(s.weights < 0):
            v.append("weights must be nonnegative")
        total = float(np.sum(s.weights))
        if abs(total - 1.0) > 1e-12:
            v.append("weights must sum to 1 within 1e-12 (sum=%.15g)" % total)
    if s.qos_es_min < 0 or s.qos_ue_min < 0:
        v.append("QoS floors must be >= 0")
    if not (0 < s.uav_height_min <= s.uav_height_max):
        v.append("uav height bounds must satisfy 0 < H_min <= H_max")
    if len(s.bs_frames) != K:
        v.append("need one bs_frame per cell")
    else:
        for k, f in enumerate(s.bs_frames):
            if not f.is_valid():
                v.append("bs_frames[%d] is not a valid rigid frame" % k)
    if not s.sat_frame.is_valid():
        v.append("sat_frame is not a valid rigid frame")
    if len(s.uav_regions) != K:
        v.append("need one uav_region per cell")
    return v


@dataclass
class DesignVariables:
    """Mutable optimizer state: beamformers, phases, poses, common-rate plan."""

    w_sat_common: np.ndarray
    w_sat: np.ndarray
    w_bs_common: np.ndarray
    w_bs: np.ndarray
    phases: np.ndarray
    ris_frames: list
    rate_common_es: np.ndarray
    rate_common_ue: np.ndarray

    def copy(self):
        return DesignVariables(
            w_sat_common=self.w_sat_common.copy(),
            w_sat=self.w_sat.copy(),
            w_bs_common=self.w_bs_common.copy(),
            w_bs=self.w_bs.copy(),
            phases=self.phases.copy(),
            ris_frames=list(self.ris_frames),
            rate_common_es=self.rate_common_es.copy(),
            rate_common_ue=self.rate_common_ue.copy(),
        )

    def sat_power(self):
        return float(np.sum(np.abs(self.w_sat_common) ** 2)
                     + np.sum(np.abs(self.w_sat) ** 2))

    def bs_power(self, k):
        return float(np.sum(np.abs(self.w_bs_common[k]) ** 2)
                     + np.sum(np.abs(self.w_bs[k]) ** 2))


def zero_design(scenario):
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    ns, nb, nr = scenario.sat_array.size, scenario.bs_array.size, scenario.ris_array.size
    return DesignVariables(
        w_sat_common=np.zeros(ns, dtype=complex),
        w_sat=np.zeros((K, ns), dtype=complex),
        w_bs_common=np.zeros((K, nb), dtype=complex),
        w_bs=np.zeros((K, L, nb), dtype=complex),
        phases=np.zeros((K, nr)),
        ris_frames=[identity_frame(scenario.es_positions[k] + np.array([0, 0, 100.0]))
                    for k in range(K)],
        rate_common_es=np.zeros(K),
        rate_common_ue=np.zeros((K, L)),
    )


# ---------------------------------------------------------------------------
# Default scenario generator
# ---------------------------------------------------------------------------

def default_scenario(seed=0, num_cells=3, num_ues_per_cell=2,
                     carrier_hz=28e9, p_bs_dbm=30.0, p_sat_w=5.0,
                     noise_dbm=-80.0, rain_mu=-3.125, rain_sigma=1.591,
                     sat_altitude=600e3, cell_spacing=500.0, bs_height=25.0,
                     ue_disc_radius=100.0, dish_diameter=1.5, dish_efficiency=0.6,
                     qos_es_min=0.1, qos_ue_min=0.1,
                     uav_height_min=50.0, uav_height_max=200.0,
                     uav_region_halfwidth=100.0, dish_offaxis_deg=0.3):
    """Deterministic desk-scale layout at the simulation defaults.

    Earth stations sit at cell centers on a ``cell_spacing`` grid along x, the
    base station of each cell is offset (150, 100) m at ``bs_height``, and UEs
    are drawn uniformly in a disc around the BS ground position (the same seed
    yields the same prefix of UE draws for any L, so sweeps over L stay
    paired). Each dish axis points at the satellite, then gets tilted by
    ``dish_offaxis_deg`` so the relay axis separates from the direct ray.
    """
    rng = np.random.default_rng(seed)
    K, L = num_cells, num_ues_per_cell
    lam = SPEED_OF_LIGHT / carrier_hz
    arr = ArrayGeometry(8, 8, lam / 2.0)

    es = np.zeros((K, 3))
    es[:, 0] = np.arange(K) * cell_spacing
    center = es.mean(axis=0)
    sat_pos = np.array([center[0], -150e3, sat_altitude])

    # Boresight of both UPAs points straight down (local z -> global -z).
    face_down = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    sat_frame = Frame(face_down, sat_pos)

    bs_frames = []
    ue_positions = np.zeros((K, L, 3))
    for k in range(K):
        bs_pos = es[k] + np.array([260.0, 180.0, bs_height])
        bs_frames.append(Frame(face_down, bs_pos))
        cell_rng = np.random.default_rng((seed, k))
        for l in range(L):
            radius = 10.0 + (ue_disc_radius - 10.0) * np.sqrt(cell_rng.uniform())
            angle = cell_rng.uniform(0.0, 2.0 * np.pi)
            ue_positions[k, l] = bs_pos[:2].tolist() + [0.0]
            ue_positions[k, l, 0] += radius * np.cos(angle)
            ue_positions[k, l, 1] += radius * np.sin(angle)

    # Dish axis: direction of arrival from the sky, tilted off the satellite
    # ray so the UAV relay does not sit exactly on the direct line.
    axis_dirs = np.zeros((K, 3))
    delta = math.radians(dish_offaxis_deg)
    for k in range(K):
        to_sat = sat_pos - es[k]
        to_sat /= np.linalg.norm(to_sat)
        horiz = np.array([to_sat[0], to_sat[1], 0.0])
        horiz /= np.linalg.norm(horiz)
        elev = math.asin(np.clip(to_sat[2], -1.0, 1.0)) - delta
        boresight = math.cos(elev) * horiz + np.array([0.0, 0.0, math.sin(elev)])
        axis_dirs[k] = -boresight / np.linalg.norm(boresight)

    regions = tuple(
        Box(es[k] + np.array([-uav_region_halfwidth, -uav_region_halfwidth, uav_height_min]),
            es[k] + np.array([uav_region_halfwidth, uav_region_halfwidth, uav_height_max]))
        for k in range(K)
    )

    noise_w = dbm_to_watts(noise_dbm)
    weights = np.zeros((K, L + 1))
    weights[:, 0] = 1.0 / (2.0 * K)
    weights[:, 1:] = 1.0 / (2.0 * K * L)

    return Scenario(
        carrier_wavelength=lam,
        num_cells=K,
        num_ues_per_cell=L,
        sat_position=sat_pos,
        sat_array=arr,
        bs_array=arr,
        ris_array=arr,
        sat_frame=sat_frame,
        bs_frames=tuple(bs_frames),
        es_positions=es,
        ue_positions=ue_positions,
        es_dish_diameter=dish_diameter,
        es_dish_efficiency=dish_efficiency,
        es_axis_dirs=axis_dirs,
        rain_mu=rain_mu,
        rain_sigma=rain_sigma,
        noise_es=np.full(K, noise_w),
        noise_ue=np.full((K, L), noise_w),
        p_sat_max=p_sat_w,
        p_bs_max=dbm_to_watts(p_bs_dbm),
        weights=weights,
        qos_es_min=qos_es_min,
        qos_ue_min=qos_ue_min,
        uav_height_min=uav_height_min,
        uav_height_max=uav_height_max,
        uav_regions=regions,
    )


def with_uniform_weights(scenario):
    """Replace the weight plan with the flat 1/(K*(L+1)) assignment."""
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    w = np.full((K, L + 1), 1.0 / (K * (L + 1)))
    return replace(scenario, weights=w)


# ---------------------------------------------------------------------------
# Flat key-value config serialization
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    """Malformed or incomplete scenario configuration."""


def _fmt(values):
    arr = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    return ", ".join(repr(float(x)) for x in arr)


def _frame_lines(prefix, frame):
    yield "%s.rotation = %s" % (prefix, _fmt(frame.rotation.ravel()))
    yield "%s.translation_m = %s" % (prefix, _fmt(frame.translation))


def scenario_to_config(scenario):
    """Render a scenario as UTF-8 ``key = value`` lines (dotted flat keys)."""
    s = scenario
    K, L = s.num_cells, s.num_ues_per_cell
    lines = [
        "# saginopt scenario configuration (units in key names)",
        "cells.count = %d" % K,
        "cells.ues_per_cell = %d" % L,
        "carrier.wavelength_m = %r" % s.carrier_wavelength,
        "sat.position_m = %s" % _fmt(s.sat_position),
        "sat.array = %d, %d" % (s.sat_array.nx, s.sat_array.ny),
        "sat.array.spacing_m = %r" % s.sat_array.spacing,
        "bs.array = %d, %d" % (s.bs_array.nx, s.bs_array.ny),
        "bs.array.spacing_m = %r" % s.bs_array.spacing,
        "ris.array = %d, %d" % (s.ris_array.nx, s.ris_array.ny),
        "ris.array.spacing_m = %r" % s.ris_array.spacing,
        "es.dish.diameter_m = %r" % s.es_dish_diameter,
        "es.dish.efficiency = %r" % s.es_dish_efficiency,
        "rain.mu = %r" % s.rain_mu,
        "rain.sigma = %r" % s.rain_sigma,
        "power.sat_max_w = %r" % s.p_sat_max,
        "power.bs_max_w = %r" % s.p_bs_max,
        "qos.es_min_bps_hz = %r" % s.qos_es_min,
        "qos.ue_min_bps_hz = %r" % s.qos_ue_min,
        "uav.height_min_m = %r" % s.uav_height_min,
        "uav.height_max_m = %r" % s.uav_height_max,
        "noise.es_w = %s" % _fmt(s.noise_es),
        "noise.ue_w = %s" % _fmt(s.noise_ue),
        "weights.alpha = %s" % _fmt(s.weights),
    ]
    lines.extend(_frame_lines("sat.frame", s.sat_frame))
    for k in range(K):
        lines.append("es.%d.position_m = %s" % (k, _fmt(s.es_positions[k])))
        lines.append("es.%d.axis_dir = %s" % (k, _fmt(s.es_axis_dirs[k])))
        lines.extend(_frame_lines("bs.%d.frame" % k, s.bs_frames[k]))
        lines.append("uav.%d.region_m = %s" % (
            k, _fmt(np.concatenate([s.uav_regions[k].lo, s.uav_regions[k].hi]))))
        for l in range(L):
            lines.append("ue.%d.%d.position_m = %s" % (k, l, _fmt(s.ue_positions[k, l])))
    return "\n".join(lines) + "\n"


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of float arrays."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            vals = np.array([float(tok) for tok in value.split(",") if tok.strip()])
        except ValueError:
            raise ConfigError("line %d: non-numeric value for %r" % (lineno, key))
        if key in out:
            raise ConfigError("duplicate key %r" % key)
        out[key] = vals
    return out


def _take(cfg, key, count=None):
    if key not in cfg:
        raise ConfigError("missing key %r" % key)
    vals = cfg.pop(key)
    if count is not None and vals.size != count:
        raise ConfigError("key %r expects %d values, got %d" % (key, count, vals.size))
    return vals


def _take_frame(cfg, prefix):
    rot = _take(cfg, prefix + ".rotation", 9).reshape(3, 3)
    tr = _take(cfg, prefix + ".translation_m", 3)
    return Frame(rot, tr)


def scenario_from_config(text):
    """Build a Scenario from config text; raises ConfigError on problems."""
    cfg = parse_config_text(text)
    K = int(_take(cfg, "cells.count", 1)[0])
    L = int(_take(cfg, "cells.ues_per_cell", 1)[0])
    if K < 1 or L < 1:
        raise ConfigError("cells.count and cells.ues_per_cell must be >= 1")

    def array_geom(tag):
        nx, ny = _take(cfg, tag + ".array", 2)
        spacing = float(_take(cfg, tag + ".array.spacing_m", 1)[0])
        return ArrayGeometry(int(nx), int(ny), spacing)

    lam = float(_take(cfg, "carrier.wavelength_m", 1)[0])
    sat_pos = _take(cfg, "sat.position_m", 3)
    sat_array = array_geom("sat")
    bs_array = array_geom("bs")
    ris_array = array_geom("ris")
    sat_frame = _take_frame(cfg, "sat.frame")

    es = np.zeros((K, 3))
    axes = np.zeros((K, 3))
    ue = np.zeros((K, L, 3))
    frames = []
    regions = []
    for k in range(K):
        es[k] = _take(cfg, "es.%d.position_m" % k, 3)
        axes[k] = _take(cfg, "es.%d.axis_dir" % k, 3)
        frames.append(_take_frame(cfg, "bs.%d.frame" % k))
        bounds = _take(cfg, "uav.%d.region_m" % k, 6)
        regions.append(Box(bounds[:3], bounds[3:]))
        for l in range(L):
            ue[k, l] = _take(cfg, "ue.%d.%d.position_m" % (k, l), 3)

    scenario = Scenario(
        carrier_wavelength=lam,
        num_cells=K,
        num_ues_per_cell=L,
        sat_position=sat_pos,
        sat_array=sat_array,
        bs_array=bs_array,
        ris_array=ris_array,
        sat_frame=sat_frame,
        bs_frames=tuple(frames),
        es_positions=es,
        ue_positions=ue,
        es_dish_diameter=float(_take(cfg, "es.dish.diameter_m", 1)[0]),
        es_dish_efficiency=float(_take(cfg, "es.dish.efficiency", 1)[0]),
        es_axis_dirs=axes,
        rain_mu=float(_take(cfg, "rain.mu", 1)[0]),
        rain_sigma=float(_take(cfg, "rain.sigma", 1)[0]),
        noise_es=_take(cfg, "noise.es_w", K),
        noise_ue=_take(cfg, "noise.ue_w", K * L).reshape(K, L),
        p_sat_max=float(_take(cfg, "power.sat_max_w", 1)[0]),
        p_bs_max=float(_take(cfg, "power.bs_max_w", 1)[0]),
        weights=_take(cfg, "weights.alpha", K * (L + 1)).reshape(K, L + 1),
        qos_es_min=float(_take(cfg, "qos.es_min_bps_hz", 1)[0]),
        qos_ue_min=float(_take(cfg, "qos.ue_min_bps_hz", 1)[0]),
        uav_height_min=float(_take(cfg, "uav.height_min_m", 1)[0]),
        uav_height_max=float(_take(cfg, "uav.height_max_m", 1)[0]),
        uav_regions=tuple(regions),
    )
    if cfg:
        raise ConfigError("unrecognized keys: %s" % ", ".join(sorted(cfg)))
    return scenario
