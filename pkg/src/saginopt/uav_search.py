"""Exhaustive panel-pose search: Euler-angle grid times axis positions.

The relay panel is confined to each earth station's dish axis; a candidate is
kept only when it lies inside the cell's deployment region and both link
endpoints sit in front of the panel. Scoring rebuilds the cell's reflect
channels and evaluates the same weighted-MSE surrogate the phase block uses,
so pose and phase updates chase one objective.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import HalfspaceViolation, build_cell_ris_channels
from .geometry import EulerAngles, Frame, rotation_from_euler
from .ris_admm import surrogate_cell_value


class EmptyGrid(RuntimeError):
    """No candidate pose survives region and halfspace filtering."""


class NoFeasibleCandidate(RuntimeError):
    """Every scored candidate violates a rate constraint; carries the cell."""

    def __init__(self, cell):
        super().__init__("no pose candidate satisfies the rate constraints "
                         "in cell %d" % cell)
        self.cell = cell


@dataclass(frozen=True)
class PoseGrid:
    """Sampling steps: radians per Euler axis, meters along the dish axis."""

    angle_step: float
    axis_step: float

    def angle_samples(self):
        count = max(1, int(np.floor(2.0 * np.pi / self.angle_step + 1e-9)))
        return self.angle_step * np.arange(count)

    def axis_samples(self, b_lo, b_hi):
        return np.arange(b_lo, b_hi + 1e-9, self.axis_step)


def default_pose_grid(scenario, angles_per_axis=8, axis_samples=8):
    """Coarse desk-scale grid; axis step spans cell 0's admissible interval."""
    b_lo, b_hi = axis_bounds(scenario, 0)
    step = (b_hi - b_lo) / max(1, axis_samples - 1)
    return PoseGrid(angle_step=2.0 * np.pi / angles_per_axis, axis_step=step)


def axis_bounds(scenario, k):
    """Admissible boresight distances: heights H_min..H_max mapped through the axis."""
    p3 = scenario.es_axis_dirs[k][2]
    return -scenario.uav_height_min / p3, -scenario.uav_height_max / p3


def pose_frame(scenario, k, euler, b):
    """Panel frame for one grid point: axis position plus Euler rotation."""
    rotation = rotation_from_euler(euler)
    translation = scenario.es_positions[k] - b * scenario.es_axis_dirs[k]
    return Frame(rotation, translation)


def candidate_poses(scenario, k, grid):
    """Filtered candidate frames in deterministic grid order.

    Raises EmptyGrid when region membership or the forward-halfspace test for
    the satellite and the earth station eliminates every grid point.
    """
    b_lo, b_hi = axis_bounds(scenario, k)
    angles = grid.angle_samples()
    region = scenario.uav_regions[k]
    es = scenario.es_positions[k]
    sat = scenario.sat_position
    out = []
    for bx, by, bz, b in itertools.product(angles, angles, angles,
                                           grid.axis_samples(b_lo, b_hi)):
        frame = pose_frame(scenario, k, EulerAngles(bx, by, bz), float(b))
        if not region.contains(frame.translation, tol=1e-9):
            continue
        local_z = frame.rotation[:, 2]
        if local_z @ (sat - frame.translation) <= 0.0:
            continue
        if local_z @ (es - frame.translation) <= 0.0:
            continue
        out.append(frame)
    if not out:
        raise EmptyGrid("no feasible pose candidate in cell %d" % k)
    return out


def _cell_rate_feasible(scenario, channels, vars_, k, h_eff_k, f_eff_k, tol=1e-6):
    """Rate-plan support at the candidate: QoS floors plus both capacity caps.

    The tolerance is looser than the final certification's because the
    unit-modulus projection at the end of the phase block can nudge the
    capacities a hair below the just-allocated plan; the next rate block
    re-tightens, and the incumbent pose must stay admissible meanwhile.
    """
    from .signal_model import compute_sinrs

    # Cell-local SINRs: swap in the candidate effective channels for cell k only.
    h_eff = np.array([h_eff_k])
    f_eff = np.array([f_eff_k])
    sub = _CellView(channels, k)
    sinrs = compute_sinrs(sub, (h_eff, f_eff), _CellVars(vars_, k),
                          scenario.noise_es[k:k + 1], scenario.noise_ue[k:k + 1])
    r_es = vars_.rate_common_es[k] + np.log2(1.0 + sinrs.es_private[0])
    if r_es < scenario.qos_es_min - tol:
        return False
    r_ue = vars_.rate_common_ue[k] + np.log2(1.0 + sinrs.ue_private[0])
    if np.any(r_ue < scenario.qos_ue_min - tol):
        return False
    if float(np.sum(vars_.rate_common_es)) > np.log2(1.0 + sinrs.es_common[0]) + tol:
        return False
    ue_cap = float(np.min(np.log2(1.0 + sinrs.ue_common[0])))
    if float(np.sum(vars_.rate_common_ue[k])) > ue_cap + tol:
        return False
    return True


class _CellView:
    """Single-cell slice of a ChannelSet (duck-typed for compute_sinrs)."""

    def __init__(self, channels, k):
        self.u = channels.u[k:k + 1]
        self.v = channels.v[k:k + 1]


class _CellVars:
    """Single-cell view of the design variables with the full satellite beams."""

    def __init__(self, vars_, k):
        self.w_sat_common = vars_.w_sat_common
        self.w_sat = vars_.w_sat
        self.w_bs_common = vars_.w_bs_common[k:k + 1]
        self.w_bs = vars_.w_bs[k:k + 1]


def exhaustive_search(scenario, channels, vars_, wmmse, grid, include_previous=True):
    """Best grid pose per cell under the phase-block surrogate.

    The current pose is appended to the candidate list so an accepted result
    never scores worse than the incumbent; ties keep the earliest candidate.
    Raises NoFeasibleCandidate when nothing (incumbent included) supports the
    current rate plan.
    """
    K = scenario.num_cells
    frames = list(vars_.ris_frames)
    for k in range(K):
        try:
            candidates = candidate_poses(scenario, k, grid)
        except EmptyGrid:
            if not include_previous:
                raise
            # Tight visibility cones can empty the grid; the incumbent still
            # competes so the block degrades to a no-op instead of an error.
            candidates = []
        if include_previous:
            candidates = candidates + [vars_.ris_frames[k]]
        best = None
        best_score = np.inf
        zeta_k = np.exp(1j * vars_.phases[k])
        for frame in candidates:
            try:
                G_k, g_k, q_k = build_cell_ris_channels(scenario, k, frame,
                                                        channels.rain[k])
            except HalfspaceViolation:
                continue
            cascade = (g_k.conj() @ (G_k * zeta_k[:, None])).conj()
            h_eff_k = channels.h[k] + cascade
            f_eff_k = channels.f[k] + np.array(
                [(q_k[l].conj() @ (G_k * zeta_k[:, None])).conj()
                 for l in range(q_k.shape[0])])
            if not _cell_rate_feasible(scenario, channels, vars_, k, h_eff_k, f_eff_k):
                continue
            score = surrogate_cell_value(k, channels.h[k], g_k, G_k,
                                         channels.f[k], q_k, zeta_k,
                                         vars_, wmmse, scenario.weights)
            if score < best_score:
                best_score = score
                best = frame
        if best is None:
            raise NoFeasibleCandidate(k)
        frames[k] = best
    return frames
