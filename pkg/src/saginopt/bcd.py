"""Outer optimization loop: rates -> MMSE state -> beams -> phases -> poses.

Every block that can change the true objective is wrapped in an acceptance
guard (the candidate is kept only when the weighted sum rate does not drop),
which makes the recorded trace monotone even where the subproblem surrogates
carry no global guarantee.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import beamforming_sca, rate_allocation, ris_admm, signal_model, uav_search
from .channel import build_channels, effective_channels, sample_rain
from .convex_kernel import SubproblemInfeasible
from .geometry import Frame
from .scenario import validate, zero_design
from .uav_search import (EmptyGrid, NoFeasibleCandidate, axis_bounds,
                         default_pose_grid)

SCHEMES = ("proposed", "no_rsma", "no_ris")
MONOTONE_SLACK = 1e-9


class InitializationInfeasible(RuntimeError):
    """No feasible operating point was reached from the documented start."""


@dataclass(frozen=True)
class BcdOptions:
    scheme: str = "proposed"
    tol: float = 1e-4
    max_outer: int = 50
    consecutive_stable: int = 3
    pose_period: int = 5
    pose_grid: object = None      # None -> default_pose_grid(scenario)
    sca_tol: float = beamforming_sca.SCA_TOL
    sca_max_outer: int = beamforming_sca.SCA_MAX_OUTER
    admm_rho: float = ris_admm.DEFAULT_RHO
    admm_tol_primal: float = ris_admm.DEFAULT_TOL_PRIMAL
    admm_tol_dual: float = ris_admm.DEFAULT_TOL_DUAL
    admm_max_iter: int = ris_admm.DEFAULT_MAX_ITER
    solver_tol: float = 1e-9
    max_rate_infeasible: int = 3


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    weighted_sum_rate: float
    wmmse_objective: float
    statuses: dict
    residuals: dict
    rates_es: np.ndarray
    rates_ue: np.ndarray
    feasible: bool
    wall_time_s: float


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]


def check_feasibility(scenario, channels, vars_):
    """Evaluate every design constraint with its reporting tolerance."""
    checks = []
    eff = effective_channels(channels, vars_.phases)
    sinrs = signal_model.compute_sinrs(channels, eff, vars_,
                                       scenario.noise_es, scenario.noise_ue)
    r_es, r_ue = signal_model.total_rates(sinrs, vars_.rate_common_es,
                                          vars_.rate_common_ue)

    min_rate = min(float(np.min(vars_.rate_common_es)),
                   float(np.min(vars_.rate_common_ue)))
    checks.append(ConstraintCheck("common_rates_nonnegative", min_rate >= -1e-9, min_rate))

    cap_es = float(np.min(np.log2(1.0 + sinrs.es_common)))
    margin = cap_es - float(np.sum(vars_.rate_common_es))
    checks.append(ConstraintCheck("es_common_capacity", margin >= -1e-9, margin))

    cap_ue = np.min(np.log2(1.0 + sinrs.ue_common), axis=1)
    margin = float(np.min(cap_ue - np.sum(vars_.rate_common_ue, axis=1)))
    checks.append(ConstraintCheck("ue_common_capacity", margin >= -1e-9, margin))

    margin = scenario.p_sat_max - vars_.sat_power()
    checks.append(ConstraintCheck("sat_power", margin >= -1e-8 * scenario.p_sat_max,
                                  margin))
    margin = min(scenario.p_bs_max - vars_.bs_power(k)
                 for k in range(scenario.num_cells))
    checks.append(ConstraintCheck("bs_power", margin >= -1e-8 * scenario.p_bs_max,
                                  margin))

    ph = vars_.phases
    in_range = bool(np.all(ph >= 0.0) and np.all(ph < 2.0 * np.pi))
    checks.append(ConstraintCheck("phase_range", in_range, float(np.min(ph, initial=0.0))))

    rot_dev = 0.0
    for frame in vars_.ris_frames:
        r = frame.rotation
        rot_dev = max(rot_dev, float(np.max(np.abs(r.T @ r - np.eye(3)))),
                      abs(float(np.linalg.det(r)) - 1.0))
    checks.append(ConstraintCheck("rotation_valid", rot_dev <= 1e-9, 1e-9 - rot_dev))

    in_region = all(scenario.uav_regions[k].contains(vars_.ris_frames[k].translation,
                                                     tol=1e-9)
                    for k in range(scenario.num_cells))
    checks.append(ConstraintCheck("pose_region", in_region, 0.0 if in_region else -1.0))

    half = np.inf
    for k in range(scenario.num_cells):
        frame = vars_.ris_frames[k]
        local_z = frame.rotation[:, 2]
        half = min(half,
                   float(local_z @ (scenario.sat_position - frame.translation)),
                   float(local_z @ (scenario.es_positions[k] - frame.translation)))
    checks.append(ConstraintCheck("forward_halfspace", half > 0.0, half))

    margin = float(np.min(r_es)) - scenario.qos_es_min
    checks.append(ConstraintCheck("qos_es", margin >= -1e-9, margin))
    margin = float(np.min(r_ue)) - scenario.qos_ue_min
    checks.append(ConstraintCheck("qos_ue", margin >= -1e-9, margin))
    return FeasibilityReport(checks=tuple(checks))


def initial_pose(scenario, k):
    """Mid-axis placement with the panel normal bisecting the two link directions."""
    b_lo, b_hi = axis_bounds(scenario, k)
    b = 0.5 * (b_lo + b_hi)
    t = scenario.es_positions[k] - b * scenario.es_axis_dirs[k]
    to_sat = scenario.sat_position - t
    to_sat /= np.linalg.norm(to_sat)
    to_es = scenario.es_positions[k] - t
    to_es /= np.linalg.norm(to_es)
    normal = to_sat + to_es
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        # Antipodal endpoints: any normal orthogonal to the axis works.
        normal = np.cross(to_sat, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(normal) < 1e-9:
            normal = np.cross(to_sat, np.array([0.0, 1.0, 0.0]))
        norm = np.linalg.norm(normal)
    normal /= norm
    seed = np.array([1.0, 0.0, 0.0])
    if abs(seed @ normal) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    x_axis = seed - (seed @ normal) * normal
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(normal, x_axis)
    rotation = np.column_stack([x_axis, y_axis, normal])
    return Frame(rotation, t)


def _matched_filter(vec):
    n = np.linalg.norm(vec)
    if n < 1e-300:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / n


SAT_COMMON_INIT_SHARES = (0.0, 0.15, 0.3, 0.5, 0.7, 0.85)
BS_COMMON_INIT_SHARE = 0.0


def _design_for_shares(scenario, h_eff, channels, sat_share, bs_share, frames):
    vars_ = zero_design(scenario)
    vars_.ris_frames = frames
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    p_priv = scenario.p_sat_max * (1.0 - sat_share) / K
    for k in range(K):
        vars_.w_sat[k] = np.sqrt(p_priv) * _matched_filter(h_eff[k])
    if sat_share > 0.0:
        vars_.w_sat_common = np.sqrt(scenario.p_sat_max * sat_share) \
            * _matched_filter(np.sum([_matched_filter(h_eff[k]) for k in range(K)],
                                     axis=0))
    p_priv = scenario.p_bs_max * (1.0 - bs_share) / L
    for k in range(K):
        for l in range(L):
            vars_.w_bs[k, l] = np.sqrt(p_priv) * _matched_filter(channels.v[k, l])
        if bs_share > 0.0:
            vars_.w_bs_common[k] = np.sqrt(scenario.p_bs_max * bs_share) \
                * _matched_filter(np.sum([_matched_filter(channels.v[k, l])
                                          for l in range(L)], axis=0))
    return vars_


def initial_design(scenario, channels, include_common):
    """Matched-filter beams scaled to meet both power budgets with equality.

    The common-rate plan can only hold what the first capacities offer (the
    beam block treats common beams as constraints, never as value), so the
    initial satellite power split decides how much rate splitting the run can
    use. The near-collinear satellite receivers often share a broadcast
    stream well, but rain fades make its min-capacity hostage to the worst
    dish, so the share is picked per instance: each candidate split is scored
    by its one-step objective (rates greedily allocated at matched-filter
    SINRs) and the best start wins. UE channels inside a cell separate
    spatially, where a common stream pinned at the weaker receiver costs more
    private rate than it carries, so the BS common beams start at zero and
    stay out of the plan unless a scenario makes them worthwhile.
    """
    frames = [initial_pose(scenario, k) for k in range(scenario.num_cells)]
    probe = zero_design(scenario)
    probe.ris_frames = frames
    eff = effective_channels(channels, probe.phases)
    h_eff, _ = eff
    if not include_common:
        return _design_for_shares(scenario, h_eff, channels, 0.0, 0.0, frames)

    best = None
    best_value = -np.inf
    for share in SAT_COMMON_INIT_SHARES:
        cand = _design_for_shares(scenario, h_eff, channels, share,
                                  BS_COMMON_INIT_SHARE, frames)
        sinrs = signal_model.compute_sinrs(channels, eff, cand,
                                           scenario.noise_es, scenario.noise_ue)
        bounds = rate_allocation.compute_bounds(sinrs, scenario.qos_es_min,
                                                scenario.qos_ue_min)
        try:
            r_es, r_ue = rate_allocation.greedy_allocate(bounds, scenario.weights)
            cand.rate_common_es, cand.rate_common_ue = r_es, r_ue
        except rate_allocation.InfeasibleAllocation:
            pass
        value = signal_model.objective_value(scenario, channels, eff, cand)
        if value > best_value:
            best_value = value
            best = _design_for_shares(scenario, h_eff, channels, share,
                                      BS_COMMON_INIT_SHARE, frames)
    return best


def optimize(scenario, seed, options=BcdOptions()):
    """Run the full block-coordinate loop; returns (variables, traces).

    Deterministic for identical (scenario, seed, options). Raises
    InitializationInfeasible when the rate plan stays unsupportable for
    ``max_rate_infeasible`` consecutive iterations.
    """
    violations = validate(scenario)
    if violations:
        raise ValueError("invalid scenario: " + "; ".join(violations))
    if options.scheme not in SCHEMES:
        raise ValueError("unknown scheme %r" % options.scheme)
    use_ris = options.scheme != "no_ris"
    use_common = options.scheme != "no_rsma"

    rain = sample_rain(scenario.rain_mu, scenario.rain_sigma, seed, scenario.num_cells)
    grid = options.pose_grid if options.pose_grid is not None else default_pose_grid(scenario)

    pre_channels = build_channels(
        scenario, [initial_pose(scenario, k) for k in range(scenario.num_cells)], rain)
    channels = pre_channels if use_ris else pre_channels.without_ris()
    vars_ = initial_design(scenario, channels, use_common)

    traces = []
    prev_obj = None
    stable = 0
    rate_infeasible_streak = 0
    for iteration in range(1, options.max_outer + 1):
        t0 = time.perf_counter()
        statuses = {}
        residuals = {}
        eff = effective_channels(channels, vars_.phases)
        wmmse = signal_model.wmmse_state(channels, eff, vars_,
                                         scenario.noise_es, scenario.noise_ue)
        surrogate = signal_model.wmmse_objective(scenario.weights, wmmse.omega,
                                                 wmmse.mse)
        current_obj = signal_model.objective_value(scenario, channels, eff, vars_)

        # (1) common-rate plan
        if use_common:
            sinrs = signal_model.compute_sinrs(channels, eff, vars_,
                                               scenario.noise_es, scenario.noise_ue)
            bounds = rate_allocation.compute_bounds(sinrs, scenario.qos_es_min,
                                                    scenario.qos_ue_min)
            try:
                r_es, r_ue = rate_allocation.greedy_allocate(bounds, scenario.weights)
                cand = vars_.copy()
                cand.rate_common_es, cand.rate_common_ue = r_es, r_ue
                cand_obj = signal_model.objective_value(scenario, channels, eff, cand)
                if cand_obj >= current_obj - MONOTONE_SLACK:
                    vars_, current_obj = cand, cand_obj
                    statuses["rates"] = "accepted"
                else:
                    statuses["rates"] = "rejected"
                rate_infeasible_streak = 0
            except rate_allocation.InfeasibleAllocation as exc:
                statuses["rates"] = "infeasible:%r" % (exc.pool,)
                rate_infeasible_streak += 1
                if rate_infeasible_streak >= options.max_rate_infeasible:
                    raise InitializationInfeasible(
                        "rate allocation infeasible for %d consecutive iterations "
                        "(pool %r)" % (rate_infeasible_streak, exc.pool))
        else:
            statuses["rates"] = "skipped"

        # (2) beamformers
        rate_plan = (vars_.rate_common_es, vars_.rate_common_ue)
        try:
            cand = beamforming_sca.sca_optimize(
                scenario, channels, eff, wmmse, rate_plan, vars_,
                include_common=use_common, tol=options.sca_tol,
                max_outer=options.sca_max_outer, solver_tol=options.solver_tol)
            cand_obj = signal_model.objective_value(scenario, channels, eff, cand)
            if cand_obj >= current_obj - MONOTONE_SLACK:
                vars_, current_obj = cand, cand_obj
                statuses["beams"] = "accepted"
            else:
                statuses["beams"] = "rejected"
        except SubproblemInfeasible:
            statuses["beams"] = "infeasible"

        # (3) panel phases
        if use_ris:
            wmmse_now = signal_model.wmmse_state(channels, eff, vars_,
                                                 scenario.noise_es, scenario.noise_ue)
            try:
                result = ris_admm.admm_optimize(
                    scenario, channels, vars_, wmmse_now,
                    (vars_.rate_common_es, vars_.rate_common_ue),
                    rho=options.admm_rho, tol_primal=options.admm_tol_primal,
                    tol_dual=options.admm_tol_dual, max_iter=options.admm_max_iter,
                    solver_tol=options.solver_tol)
                residuals["admm_primal"] = result.primal_residual
                residuals["admm_dual"] = result.dual_residual
                cand = vars_.copy()
                cand.phases = result.phases
                cand_eff = effective_channels(channels, cand.phases)
                cand_obj = signal_model.objective_value(scenario, channels, cand_eff, cand)
                if cand_obj >= current_obj - MONOTONE_SLACK:
                    vars_, current_obj, eff = cand, cand_obj, cand_eff
                    statuses["phases"] = "accepted"
                else:
                    statuses["phases"] = "rejected"
            except SubproblemInfeasible:
                statuses["phases"] = "infeasible"
        else:
            statuses["phases"] = "skipped"

        # (4) panel poses
        if use_ris and iteration % options.pose_period == 0:
            wmmse_now = signal_model.wmmse_state(channels, eff, vars_,
                                                 scenario.noise_es, scenario.noise_ue)
            try:
                frames = uav_search.exhaustive_search(scenario, channels, vars_,
                                                      wmmse_now, grid)
                cand = vars_.copy()
                cand.ris_frames = frames
                cand_channels = build_channels(scenario, frames, rain)
                cand_eff = effective_channels(cand_channels, cand.phases)
                cand_obj = signal_model.objective_value(scenario, cand_channels,
                                                        cand_eff, cand)
                if cand_obj >= current_obj - MONOTONE_SLACK:
                    vars_, current_obj = cand, cand_obj
                    channels, eff = cand_channels, cand_eff
                    statuses["poses"] = "accepted"
                else:
                    statuses["poses"] = "rejected"
            except (EmptyGrid, NoFeasibleCandidate) as exc:
                statuses["poses"] = "infeasible:%s" % exc
        else:
            statuses["poses"] = "skipped"

        sinrs = signal_model.compute_sinrs(channels, eff, vars_,
                                           scenario.noise_es, scenario.noise_ue)
        r_es, r_ue = signal_model.total_rates(sinrs, vars_.rate_common_es,
                                              vars_.rate_common_ue)
        report = check_feasibility(scenario, channels, vars_)
        traces.append(IterationTrace(
            iteration=iteration,
            weighted_sum_rate=current_obj,
            wmmse_objective=surrogate,
            statuses=statuses,
            residuals=residuals,
            rates_es=r_es,
            rates_ue=r_ue,
            feasible=report.all_passed,
            wall_time_s=time.perf_counter() - t0,
        ))

        if prev_obj is not None and \
                abs(current_obj - prev_obj) < options.tol * max(1.0, abs(prev_obj)):
            stable += 1
            if stable >= options.consecutive_stable:
                break
        else:
            stable = 0
        prev_obj = current_obj

    return vars_, traces
