"""Beamformer block: successive convex approximation over all transmit beams.

The weighted-MSE objective is an exact convex quadratic in the stacked beams;
only the QoS and common-rate constraints are nonconvex, and those are restricted
with first-order Taylor under-estimators anchored at the previous iterate, so
every accepted iterate is feasible for the true constraints and the objective
decreases monotonically.
"""

from dataclasses import dataclass

import numpy as np

from . import convex_kernel as ck
from .convex_kernel import (AffineEq, ConvexProblem, SubproblemInfeasible,
                            conj_inner_rows, lift, norm_ball,
                            quadratic_leq_affine, real_part_functional, unlift)

SCA_TOL = 1e-5
SCA_MAX_OUTER = 20


@dataclass(frozen=True)
class TaylorAnchor:
    """Expansion point for the |channel^H beam|^2 under-estimators."""

    w_sat_common: np.ndarray
    w_sat: np.ndarray
    w_bs_common: np.ndarray
    w_bs: np.ndarray

    @classmethod
    def from_design(cls, vars_):
        return cls(w_sat_common=vars_.w_sat_common.copy(), w_sat=vars_.w_sat.copy(),
                   w_bs_common=vars_.w_bs_common.copy(), w_bs=vars_.w_bs.copy())


GAMMA_FLOOR = 1e-9


def gamma_active(gamma):
    """Whether an SINR target warrants a constraint.

    Nonpositive targets are vacuous and must be dropped rather than flipped;
    targets at numerical noise (dead common streams) are dropped too so they
    do not inject degenerate cones into every subproblem.
    """
    return gamma > GAMMA_FLOOR


@dataclass(frozen=True)
class RsmaGammas:
    """SINR targets implied by the current rate plan and QoS floors."""

    es: np.ndarray        # (K,) private targets 2^(Rmin - r) - 1
    ue: np.ndarray        # (K, L)
    es_common: float      # 2^(sum_k r_es) - 1
    ue_common: np.ndarray  # (K,) 2^(sum_l r_ue) - 1

    @classmethod
    def from_rate_plan(cls, rate_es, rate_ue, qos_es_min, qos_ue_min):
        return cls(
            es=2.0 ** (qos_es_min - np.asarray(rate_es)) - 1.0,
            ue=2.0 ** (qos_ue_min - np.asarray(rate_ue)) - 1.0,
            es_common=float(2.0 ** np.sum(rate_es) - 1.0),
            ue_common=2.0 ** np.sum(np.asarray(rate_ue), axis=1) - 1.0,
        )


@dataclass(frozen=True)
class TaylorAffine:
    """Affine global under-estimator of w -> |h^H w|^2 anchored at w*."""

    h: np.ndarray
    w_anchor: np.ndarray
    s_anchor: complex

    def __call__(self, w):
        return (abs(self.s_anchor) ** 2
                + 2.0 * np.real(np.conj(self.s_anchor)
                                * (self.h.conj() @ (w - self.w_anchor))))

    def lifted(self):
        """(coeff, offset) with value = coeff @ lift(w) + offset.

        Re{conj(s*) h^H w} = Re{(h s*)^H w}, so the lifted functional carries
        h * s_anchor.
        """
        coeff = 2.0 * real_part_functional(self.h * self.s_anchor)
        return coeff, -abs(self.s_anchor) ** 2


def taylor_affine(h, w_anchor):
    return TaylorAffine(h=np.asarray(h), w_anchor=np.asarray(w_anchor),
                        s_anchor=complex(np.asarray(h).conj() @ np.asarray(w_anchor)))


class BeamLayout:
    """Column layout of the real-lifted stacked beam vector."""

    def __init__(self, K, L, n_sat, n_bs, include_common=True):
        self.K, self.L = K, L
        self.n_sat, self.n_bs = n_sat, n_bs
        self.include_common = include_common
        self.slices = {}
        offset = 0

        def add(key, n):
            nonlocal offset
            self.slices[key] = slice(offset, offset + 2 * n)
            offset += 2 * n

        if include_common:
            add("sat_c", n_sat)
        for k in range(K):
            add(("sat", k), n_sat)
        for k in range(K):
            if include_common:
                add(("bs_c", k), n_bs)
            for l in range(L):
                add(("bs", k, l), n_bs)
        self.dimension = offset

    def place_rows(self, key, rows2):
        out = np.zeros((rows2.shape[0], self.dimension))
        out[:, self.slices[key]] = rows2
        return out

    def place_vector(self, key, vec):
        out = np.zeros(self.dimension)
        out[self.slices[key]] = vec
        return out

    def columns(self, keys):
        idx = []
        for key in keys:
            sl = self.slices[key]
            idx.extend(range(sl.start, sl.stop))
        return np.asarray(idx, dtype=int)

    def pack(self, vars_):
        x = np.zeros(self.dimension)
        if self.include_common:
            x[self.slices["sat_c"]] = lift(vars_.w_sat_common)
        for k in range(self.K):
            x[self.slices[("sat", k)]] = lift(vars_.w_sat[k])
            if self.include_common:
                x[self.slices[("bs_c", k)]] = lift(vars_.w_bs_common[k])
            for l in range(self.L):
                x[self.slices[("bs", k, l)]] = lift(vars_.w_bs[k, l])
        return x

    def unpack(self, x, template):
        out = template.copy()
        if self.include_common:
            out.w_sat_common = unlift(x[self.slices["sat_c"]])
        else:
            out.w_sat_common = np.zeros(self.n_sat, dtype=complex)
        for k in range(self.K):
            out.w_sat[k] = unlift(x[self.slices[("sat", k)]])
            if self.include_common:
                out.w_bs_common[k] = unlift(x[self.slices[("bs_c", k)]])
            else:
                out.w_bs_common[k] = np.zeros(self.n_bs, dtype=complex)
            for l in range(self.L):
                out.w_bs[k, l] = unlift(x[self.slices[("bs", k, l)]])
        return out


def build_subproblem(scenario, channels, effective, wmmse, rate_plan, anchor,
                     include_common=True):
    """Assemble the convex beam subproblem at the given Taylor anchor.

    Channel rows inside the constraints are normalized by the smallest noise
    power so the cone data is well conditioned; the normalization leaves the
    feasible set and the argmin unchanged. Beam dimensions are taken from the
    channel arrays, so the same assembly serves the span-reduced solve path.
    """
    h_eff, f_eff = effective
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    layout = BeamLayout(K, L, h_eff.shape[1], channels.v.shape[2], include_common)
    alpha, mu, omega = scenario.weights, wmmse.mu, wmmse.omega
    rate_es, rate_ue = rate_plan
    gammas = RsmaGammas.from_rate_plan(rate_es, rate_ue,
                                       scenario.qos_es_min, scenario.qos_ue_min)
    noise_ref = min(float(np.min(scenario.noise_es)), float(np.min(scenario.noise_ue)))
    cscale = 1.0 / np.sqrt(noise_ref)

    quad_rows = []
    linear = np.zeros(layout.dimension)

    def add_quad(coeff, key, channel):
        quad_rows.append(np.sqrt(coeff) * layout.place_rows(key, conj_inner_rows(channel)))

    for k in range(K):
        c_es = alpha[k, 0] * omega[k, 0]
        mu_es = mu[k, 0]
        for j in range(K):
            add_quad(c_es * abs(mu_es) ** 2, ("sat", j), h_eff[k])
        if include_common:
            add_quad(c_es * abs(mu_es) ** 2, ("bs_c", k), channels.u[k])
        for j in range(L):
            add_quad(c_es * abs(mu_es) ** 2, ("bs", k, j), channels.u[k])
        linear += layout.place_vector(("sat", k), -2.0 * c_es
                                      * real_part_functional(h_eff[k] * np.conj(mu_es)))
        for l in range(L):
            c_ue = alpha[k, l + 1] * omega[k, l + 1]
            mu_ue = mu[k, l + 1]
            for j in range(L):
                add_quad(c_ue * abs(mu_ue) ** 2, ("bs", k, j), channels.v[k, l])
            if include_common:
                add_quad(c_ue * abs(mu_ue) ** 2, "sat_c", f_eff[k, l])
            for j in range(K):
                add_quad(c_ue * abs(mu_ue) ** 2, ("sat", j), f_eff[k, l])
            linear += layout.place_vector(("bs", k, l), -2.0 * c_ue
                                          * real_part_functional(channels.v[k, l]
                                                                 * np.conj(mu_ue)))

    socs = []

    def interference_rows_es(k, exclude_private):
        rows, offs = [], []
        for j in range(K):
            if exclude_private and j == k:
                continue
            rows.append(layout.place_rows(("sat", j), conj_inner_rows(cscale * h_eff[k])))
            offs.append(np.zeros(2))
        if include_common:
            rows.append(layout.place_rows(("bs_c", k), conj_inner_rows(cscale * channels.u[k])))
            offs.append(np.zeros(2))
        for j in range(L):
            rows.append(layout.place_rows(("bs", k, j), conj_inner_rows(cscale * channels.u[k])))
            offs.append(np.zeros(2))
        return np.vstack(rows), np.concatenate(offs)

    def interference_rows_ue(k, l, exclude_private):
        rows, offs = [], []
        for j in range(L):
            if exclude_private and j == l:
                continue
            rows.append(layout.place_rows(("bs", k, j), conj_inner_rows(cscale * channels.v[k, l])))
            offs.append(np.zeros(2))
        if include_common:
            rows.append(layout.place_rows("sat_c", conj_inner_rows(cscale * f_eff[k, l])))
            offs.append(np.zeros(2))
        for j in range(K):
            rows.append(layout.place_rows(("sat", j), conj_inner_rows(cscale * f_eff[k, l])))
            offs.append(np.zeros(2))
        return np.vstack(rows), np.concatenate(offs)

    def taylor_rhs(key, channel, w_anchor):
        coeff, offset = taylor_affine(cscale * channel, w_anchor).lifted()
        return layout.place_vector(key, coeff), offset

    for k in range(K):
        if gammas.es[k] > 0.0:
            A, b = interference_rows_es(k, exclude_private=True)
            c, d = taylor_rhs(("sat", k), h_eff[k], anchor.w_sat[k])
            socs.append(quadratic_leq_affine(
                np.sqrt(gammas.es[k]) * A, np.sqrt(gammas.es[k]) * b,
                gammas.es[k] * scenario.noise_es[k] / noise_ref, c, d))
        if include_common and gammas.es_common > 0.0:
            A, b = interference_rows_es(k, exclude_private=False)
            c, d = taylor_rhs("sat_c", h_eff[k], anchor.w_sat_common)
            socs.append(quadratic_leq_affine(
                np.sqrt(gammas.es_common) * A, np.sqrt(gammas.es_common) * b,
                gammas.es_common * scenario.noise_es[k] / noise_ref, c, d))
        for l in range(L):
            if gammas.ue[k, l] > 0.0:
                A, b = interference_rows_ue(k, l, exclude_private=True)
                c, d = taylor_rhs(("bs", k, l), channels.v[k, l], anchor.w_bs[k, l])
                socs.append(quadratic_leq_affine(
                    np.sqrt(gammas.ue[k, l]) * A, np.sqrt(gammas.ue[k, l]) * b,
                    gammas.ue[k, l] * scenario.noise_ue[k, l] / noise_ref, c, d))
            if include_common and gammas.ue_common[k] > 0.0:
                A, b = interference_rows_ue(k, l, exclude_private=False)
                c, d = taylor_rhs(("bs_c", k), channels.v[k, l], anchor.w_bs_common[k])
                socs.append(quadratic_leq_affine(
                    np.sqrt(gammas.ue_common[k]) * A, np.sqrt(gammas.ue_common[k]) * b,
                    gammas.ue_common[k] * scenario.noise_ue[k, l] / noise_ref, c, d))

    sat_keys = (["sat_c"] if include_common else []) + [("sat", k) for k in range(K)]
    socs.append(norm_ball(layout.columns(sat_keys), np.sqrt(scenario.p_sat_max),
                          layout.dimension))
    for k in range(K):
        bs_keys = ([("bs_c", k)] if include_common else []) \
            + [("bs", k, l) for l in range(L)]
        socs.append(norm_ball(layout.columns(bs_keys), np.sqrt(scenario.p_bs_max),
                              layout.dimension))

    problem = ConvexProblem(dimension=layout.dimension,
                            quad_rows=np.vstack(quad_rows), linear=linear,
                            soc_constraints=socs)
    return problem, layout


@dataclass(frozen=True)
class _ChannelView:
    """The two beam-facing channel arrays build_subproblem reads."""

    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class SpanBasis:
    """Orthonormal bases of the channel spans each beam group acts through.

    Every term of the subproblem sees a satellite beam only via inner products
    with the effective satellite-side channels, and a BS beam only via its own
    cell's UE/ES channels; components orthogonal to those spans change nothing
    but consume power, so restricting the solve to the spans is exact.
    """

    sat: np.ndarray   # (N_S, m_sat)
    bs: tuple         # per cell: (N_B, m_bs)

    @classmethod
    def from_channels(cls, channels, effective):
        h_eff, f_eff = effective
        K, L = channels.v.shape[0], channels.v.shape[1]
        sat_stack = np.concatenate(
            [h_eff.T] + [f_eff[:, l].T for l in range(L)], axis=1)
        sat_q = np.linalg.qr(sat_stack, mode="reduced")[0]
        bs_q = tuple(
            np.linalg.qr(np.concatenate([channels.v[k].T,
                                         channels.u[k][:, None]], axis=1),
                         mode="reduced")[0]
            for k in range(K))
        return cls(sat=sat_q, bs=bs_q)

    def reduce(self, channels, effective, anchor):
        h_eff, f_eff = effective
        K, L = channels.v.shape[0], channels.v.shape[1]
        h_red = h_eff @ np.conj(self.sat)
        f_red = np.stack([f_eff[:, l] @ np.conj(self.sat) for l in range(L)], axis=1)
        u_red = np.stack([channels.u[k] @ np.conj(self.bs[k]) for k in range(K)])
        v_red = np.stack([channels.v[k] @ np.conj(self.bs[k]) for k in range(K)])
        anchor_red = TaylorAnchor(
            w_sat_common=self.sat.conj().T @ anchor.w_sat_common,
            w_sat=anchor.w_sat @ np.conj(self.sat),
            w_bs_common=np.stack([self.bs[k].conj().T @ anchor.w_bs_common[k]
                                  for k in range(K)]),
            w_bs=np.stack([anchor.w_bs[k] @ np.conj(self.bs[k]) for k in range(K)]))
        return _ChannelView(u=u_red, v=v_red), (h_red, f_red), anchor_red

    def expand(self, reduced_vars, template):
        out = template.copy()
        K, L = template.w_bs.shape[0], template.w_bs.shape[1]
        out.w_sat_common = self.sat @ reduced_vars.w_sat_common
        out.w_sat = reduced_vars.w_sat @ self.sat.T
        for k in range(K):
            out.w_bs_common[k] = self.bs[k] @ reduced_vars.w_bs_common[k]
            out.w_bs[k] = reduced_vars.w_bs[k] @ self.bs[k].T
        return out


def _reduced_template(basis, K, L):
    from .scenario import DesignVariables

    m_sat = basis.sat.shape[1]
    m_bs = basis.bs[0].shape[1]
    return DesignVariables(
        w_sat_common=np.zeros(m_sat, dtype=complex),
        w_sat=np.zeros((K, m_sat), dtype=complex),
        w_bs_common=np.zeros((K, m_bs), dtype=complex),
        w_bs=np.zeros((K, L, m_bs), dtype=complex),
        phases=np.zeros((K, 1)), ris_frames=[],
        rate_common_es=np.zeros(K), rate_common_ue=np.zeros((K, L)))


def _anchor_as_design(anchor, basis, K, L):
    out = _reduced_template(basis, K, L)
    out.w_sat_common = anchor.w_sat_common
    out.w_sat = anchor.w_sat
    out.w_bs_common = anchor.w_bs_common
    out.w_bs = anchor.w_bs
    return out


def sca_optimize(scenario, channels, effective, wmmse, rate_plan, vars_,
                 include_common=True, tol=SCA_TOL, max_outer=SCA_MAX_OUTER,
                 solver_tol=ck.DEFAULT_TOLERANCE, reduce_span=True):
    """Iterate subproblem solves, re-anchoring at each accepted iterate.

    Returns a DesignVariables copy carrying the new beams. Raises
    SubproblemInfeasible when the restricted problem admits no point; the
    caller keeps the previous beams in that case.
    """
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    current = vars_.copy()
    basis = SpanBasis.from_channels(channels, effective) if reduce_span else None
    for _ in range(max_outer):
        anchor = TaylorAnchor.from_design(current)
        if basis is not None:
            view, eff_red, anchor_red = basis.reduce(channels, effective, anchor)
            problem, layout = build_subproblem(scenario, view, eff_red, wmmse,
                                               rate_plan, anchor_red, include_common)
            anchor_x = layout.pack(_anchor_as_design(anchor_red, basis, K, L))
        else:
            problem, layout = build_subproblem(scenario, channels, effective, wmmse,
                                               rate_plan, anchor, include_common)
            anchor_x = layout.pack(current)
        anchor_obj = problem.objective_value(anchor_x)
        solution = ck.solve(problem, tolerance=solver_tol)
        if solution.status == ck.INFEASIBLE:
            raise SubproblemInfeasible("beam subproblem infeasible")
        if solution.status != ck.OPTIMAL:
            break
        if basis is not None:
            reduced = layout.unpack(solution.x, _reduced_template(basis, K, L))
            current = basis.expand(reduced, current)
        else:
            current = layout.unpack(solution.x, current)
        if anchor_obj - solution.objective_value < tol * max(1.0, abs(anchor_obj)):
            break
    return current
