"""Panel phase block: ADMM over the relaxed phase vectors with unit-modulus copies.

The weighted-MSE surrogate restricted to the phases is a complex quadratic in
zeta_k = exp(j*psi_k); it is expanded once into (constant, |zeta^T c|^2 terms,
Re{zeta^T d} terms) and each ADMM step minimizes that form plus the proximal
penalty, subject to the common-rate and QoS restrictions. The z-update has the
closed-form unit-modulus projection.
"""

from dataclasses import dataclass

import numpy as np

from . import convex_kernel as ck
from .beamforming_sca import RsmaGammas
from .convex_kernel import (ConvexProblem, SubproblemInfeasible, lift,
                            quadratic_leq_affine, transpose_inner_rows,
                            transpose_real_functional, unlift)

DEFAULT_RHO = 1.0
RHO_MAX = 64.0
RHO_STALL_WINDOW = 20
DEFAULT_TOL_PRIMAL = 1e-4
DEFAULT_TOL_DUAL = 1e-4
DEFAULT_MAX_ITER = 300


@dataclass(frozen=True)
class PhaseQuadraticForm:
    """g(zeta) = constant + sum |zeta_k^T c_{k,j}|^2 + sum Re{zeta_k^T d_{k,j}}."""

    constant: float
    quad_vectors: tuple   # per cell: (n_c, N_R) complex array
    lin_vectors: tuple    # per cell: (n_d, N_R) complex array

    def value(self, zetas):
        total = self.constant
        for k, zeta in enumerate(zetas):
            if self.quad_vectors[k].size:
                total += float(np.sum(np.abs(self.quad_vectors[k] @ zeta) ** 2))
            if self.lin_vectors[k].size:
                total += float(np.sum(np.real(self.lin_vectors[k] @ zeta)))
        return total


@dataclass
class AdmmState:
    zeta: np.ndarray  # (K, N_R) relaxed phases
    Z: np.ndarray     # (K, N_R) unit-modulus copies
    Y: np.ndarray     # (K, N_R) scaled duals
    rho: float


@dataclass(frozen=True)
class AdmmResult:
    phases: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float


def _cell_surrogate_terms(k, h_k, g_k, G_k, f_k, q_k, vars_, wmmse, weights):
    """(kappa, s0, ctilde) triples plus the linear desired-term data for cell k.

    Each magnitude term of the surrogate is |s0 + zeta^T ctilde|^2 with
    ctilde = conj(reflect channel) * (G_k @ beam); the desired term contributes
    -2*alpha*omega*Re{mu*(s0_k + zeta^T ctilde_k)}.
    """
    terms = []
    a0 = weights[k, 0] * wmmse.omega[k, 0]
    mu0 = wmmse.mu[k, 0]
    gw = [G_k @ vars_.w_sat[j] for j in range(vars_.w_sat.shape[0])]
    gwc = G_k @ vars_.w_sat_common
    for j in range(vars_.w_sat.shape[0]):
        terms.append((a0 * abs(mu0) ** 2,
                      complex(h_k.conj() @ vars_.w_sat[j]),
                      np.conj(g_k) * gw[j]))
    k_desired = (-2.0 * a0 * mu0,
                 complex(h_k.conj() @ vars_.w_sat[k]),
                 np.conj(g_k) * gw[k])
    L = q_k.shape[0]
    for l in range(L):
        cu = weights[k, l + 1] * wmmse.omega[k, l + 1] * abs(wmmse.mu[k, l + 1]) ** 2
        terms.append((cu,
                      complex(f_k[l].conj() @ vars_.w_sat_common),
                      np.conj(q_k[l]) * gwc))
        for j in range(vars_.w_sat.shape[0]):
            terms.append((cu,
                          complex(f_k[l].conj() @ vars_.w_sat[j]),
                          np.conj(q_k[l]) * gw[j]))
    return terms, k_desired


def surrogate_cell_value(k, h_k, g_k, G_k, f_k, q_k, zeta_k, vars_, wmmse, weights):
    """Direct evaluation of cell k's surrogate term at the given zeta."""
    terms, desired = _cell_surrogate_terms(k, h_k, g_k, G_k, f_k, q_k,
                                           vars_, wmmse, weights)
    total = 0.0
    for kappa, s0, ctilde in terms:
        total += kappa * abs(s0 + zeta_k @ ctilde) ** 2
    coeff, s0, ctilde = desired
    total += np.real(coeff * (s0 + zeta_k @ ctilde))
    return float(total)


def phase_objective(channels, vars_, wmmse, weights, zetas):
    """The printed phase surrogate evaluated directly (sums the per-cell terms)."""
    K = channels.h.shape[0]
    return sum(
        surrogate_cell_value(k, channels.h[k], channels.g[k], channels.G[k],
                             channels.f[k], channels.q[k], zetas[k],
                             vars_, wmmse, weights)
        for k in range(K)
    )


def assemble_form(channels, vars_, wmmse, weights):
    """Expand the surrogate into its constant/quadratic/linear pieces."""
    K = channels.h.shape[0]
    constant = 0.0
    quad = []
    lin = []
    for k in range(K):
        terms, desired = _cell_surrogate_terms(
            k, channels.h[k], channels.g[k], channels.G[k],
            channels.f[k], channels.q[k], vars_, wmmse, weights)
        c_rows = []
        d_rows = []
        for kappa, s0, ctilde in terms:
            constant += kappa * abs(s0) ** 2
            c_rows.append(np.sqrt(kappa) * ctilde)
            d_rows.append(2.0 * kappa * np.conj(s0) * ctilde)
        coeff, s0, ctilde = desired
        constant += np.real(coeff * s0)
        d_rows.append(coeff * ctilde)
        nr = channels.g.shape[1]
        quad.append(np.vstack(c_rows) if c_rows else np.zeros((0, nr), dtype=complex))
        lin.append(np.vstack(d_rows) if d_rows else np.zeros((0, nr), dtype=complex))
    return PhaseQuadraticForm(constant=float(constant), quad_vectors=tuple(quad),
                              lin_vectors=tuple(lin))


def project_unit_modulus(values):
    """Elementwise closest unit-modulus point; exact zeros map to 1+0j."""
    values = np.asarray(values, dtype=complex)
    mags = np.abs(values)
    out = np.where(mags > 0.0, values / np.where(mags > 0.0, mags, 1.0), 1.0 + 0.0j)
    return out


# --- constraint assembly for the zeta update --------------------------------

@dataclass(frozen=True)
class _CellConstraintData:
    """Scaled magnitude terms of one restriction: sum |s0_i + zeta^T c_i|^2 + const <= rhs."""

    s0: np.ndarray        # complex offsets of the affine scalars
    cvecs: np.ndarray     # (n, N_R) complex
    const: float          # nonnegative, includes noise
    rhs_taylor: tuple     # (s0_c, ctilde_c) for a Taylor RHS, or None
    rhs_const: float      # used when rhs_taylor is None
    gamma: float


def _cell_constraints(scenario, channels, vars_, gammas, k, cscale):
    """Constraint data for cell k; all channel rows pre-scaled by cscale."""
    out = []
    K, L = scenario.num_cells, scenario.num_ues_per_cell
    G_k = channels.G[k] * cscale
    h_k = channels.h[k] * cscale
    g_k = channels.g[k]
    u_k = channels.u[k] * cscale
    noise_ref = 1.0 / cscale ** 2
    gw = [G_k @ vars_.w_sat[j] for j in range(K)]
    gwc = G_k @ vars_.w_sat_common
    bs_const_all = abs(u_k.conj() @ vars_.w_bs_common[k]) ** 2 \
        + float(np.sum(np.abs(u_k.conj() @ vars_.w_bs[k].T) ** 2))

    # Common-rate restriction at the ES (all satellite private beams).
    if gammas.es_common > 0.0:
        s0 = np.array([h_k.conj() @ vars_.w_sat[j] for j in range(K)])
        cv = np.vstack([np.conj(g_k) * gw[j] for j in range(K)])
        out.append(_CellConstraintData(
            s0=s0, cvecs=cv,
            const=bs_const_all + scenario.noise_es[k] / noise_ref,
            rhs_taylor=(complex(h_k.conj() @ vars_.w_sat_common), np.conj(g_k) * gwc),
            rhs_const=0.0, gamma=gammas.es_common))

    # ES QoS restriction (other cells' satellite beams interfere).
    if gammas.es[k] > 0.0:
        idx = [j for j in range(K) if j != k]
        s0 = np.array([h_k.conj() @ vars_.w_sat[j] for j in idx])
        cv = (np.vstack([np.conj(g_k) * gw[j] for j in idx]) if idx
              else np.zeros((0, g_k.size), dtype=complex))
        out.append(_CellConstraintData(
            s0=s0, cvecs=cv,
            const=bs_const_all + scenario.noise_es[k] / noise_ref,
            rhs_taylor=(complex(h_k.conj() @ vars_.w_sat[k]), np.conj(g_k) * gw[k]),
            rhs_const=0.0, gamma=gammas.es[k]))

    for l in range(L):
        f_kl = channels.f[k, l] * cscale
        q_kl = channels.q[k, l]
        v_kl = channels.v[k, l] * cscale
        bs_priv = np.abs(v_kl.conj() @ vars_.w_bs[k].T) ** 2
        sat_s0 = np.array([f_kl.conj() @ vars_.w_sat_common]
                          + [f_kl.conj() @ vars_.w_sat[j] for j in range(K)])
        sat_cv = np.vstack([np.conj(q_kl) * gwc] + [np.conj(q_kl) * gw[j] for j in range(K)])

        # Per-cell common-rate restriction at UE (k,l); RHS is beam-only.
        if gammas.ue_common[k] > 0.0:
            out.append(_CellConstraintData(
                s0=sat_s0, cvecs=sat_cv,
                const=float(np.sum(bs_priv)) + scenario.noise_ue[k, l] / noise_ref,
                rhs_taylor=None,
                rhs_const=abs(v_kl.conj() @ vars_.w_bs_common[k]) ** 2,
                gamma=float(gammas.ue_common[k])))

        # UE QoS restriction.
        if gammas.ue[k, l] > 0.0:
            out.append(_CellConstraintData(
                s0=sat_s0, cvecs=sat_cv,
                const=float(np.sum(bs_priv) - bs_priv[l]) + scenario.noise_ue[k, l] / noise_ref,
                rhs_taylor=None,
                rhs_const=float(bs_priv[l]),
                gamma=float(gammas.ue[k, l])))
    return out


def _constraint_satisfied(con, zeta, anchor):
    lhs = con.gamma * (float(np.sum(np.abs(con.s0 + con.cvecs @ zeta) ** 2)) + con.const)
    rhs = _rhs_value(con, zeta, anchor)
    return lhs <= rhs + 1e-9 * (1.0 + abs(rhs))


def _rhs_value(con, zeta, anchor):
    if con.rhs_taylor is None:
        return con.rhs_const
    s0c, cvc = con.rhs_taylor
    psi_star = s0c + anchor @ cvc
    psi = s0c + zeta @ cvc
    return abs(psi_star) ** 2 + 2.0 * np.real(np.conj(psi_star) * (psi - psi_star))


def _soc_from_constraint(con, anchor, nr):
    rows = np.sqrt(con.gamma) * np.vstack([transpose_inner_rows(c) for c in con.cvecs]) \
        if con.cvecs.shape[0] else np.zeros((0, 2 * nr))
    offs = np.sqrt(con.gamma) * np.concatenate(
        [[np.real(s), np.imag(s)] for s in con.s0]) if con.s0.size else np.zeros(0)
    if con.rhs_taylor is None:
        c_vec = np.zeros(2 * nr)
        d = con.rhs_const
    else:
        s0c, cvc = con.rhs_taylor
        psi_star = s0c + anchor @ cvc
        c_vec = 2.0 * transpose_real_functional(np.conj(psi_star) * cvc)
        d = 2.0 * np.real(np.conj(psi_star) * s0c) - abs(psi_star) ** 2
    return quadratic_leq_affine(rows, offs, con.gamma * con.const, c_vec, d)


def zeta_update(form_k, k, prox_target, rho, constraints, anchor, solver_tol=1e-9):
    """Minimize the cell's quadratic plus proximal term under its restrictions.

    The unconstrained minimizer is a single linear solve; it is returned
    directly whenever it already satisfies every restriction (where it
    coincides with the constrained optimum), otherwise the cone program runs.
    """
    quad, lin = form_k
    nr = prox_target.size
    n = 2 * nr
    Q = 0.5 * rho * np.eye(n)
    q = -rho * lift(prox_target)
    for c in quad:
        rows = transpose_inner_rows(c)
        Q += rows.T @ rows
    for d in lin:
        q += transpose_real_functional(d)
    x = np.linalg.solve(2.0 * Q, -q)
    zeta = unlift(x)
    if all(_constraint_satisfied(con, zeta, anchor) for con in constraints):
        return zeta

    quad_rows = [np.sqrt(0.5 * rho) * np.eye(n)]
    quad_offs = [-np.sqrt(0.5 * rho) * lift(prox_target)]
    for c in quad:
        quad_rows.append(transpose_inner_rows(c))
        quad_offs.append(np.zeros(2))
    linear = np.zeros(n)
    for d in lin:
        linear += transpose_real_functional(d)
    socs = [_soc_from_constraint(con, anchor, nr) for con in constraints]
    problem = ConvexProblem(dimension=n, quad_rows=np.vstack(quad_rows),
                            quad_offset=np.concatenate(quad_offs),
                            linear=linear, soc_constraints=socs)
    solution = ck.solve(problem, tolerance=solver_tol)
    if solution.status == ck.INFEASIBLE:
        raise SubproblemInfeasible("phase restriction set is empty (cell %d)" % k)
    return unlift(solution.x)


def admm_optimize(scenario, channels, vars_, wmmse, rate_plan,
                  rho=DEFAULT_RHO, tol_primal=DEFAULT_TOL_PRIMAL,
                  tol_dual=DEFAULT_TOL_DUAL, max_iter=DEFAULT_MAX_ITER,
                  solver_tol=1e-9):
    """Run scaled-dual ADMM and return candidate phases with residual info.

    The caller is responsible for the acceptance guard (keep the previous
    phases when the true objective would decrease).
    """
    K, nr = vars_.phases.shape
    rate_es, rate_ue = rate_plan
    gammas = RsmaGammas.from_rate_plan(rate_es, rate_ue,
                                       scenario.qos_es_min, scenario.qos_ue_min)
    noise_ref = min(float(np.min(scenario.noise_es)), float(np.min(scenario.noise_ue)))
    cscale = 1.0 / np.sqrt(noise_ref)
    form = assemble_form(channels, vars_, wmmse, scenario.weights)
    cons = [_cell_constraints(scenario, channels, vars_, gammas, k, cscale)
            for k in range(K)]

    state = AdmmState(zeta=np.exp(1j * vars_.phases), Z=np.exp(1j * vars_.phases),
                      Y=np.zeros((K, nr), dtype=complex), rho=float(rho))
    primal = dual = np.inf
    best_primal = np.inf
    stall = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        for k in range(K):
            anchor = state.zeta[k].copy()
            state.zeta[k] = zeta_update(
                (form.quad_vectors[k], form.lin_vectors[k]), k,
                state.Z[k] - state.Y[k], state.rho, cons[k], anchor, solver_tol)
        z_prev = state.Z.copy()
        state.Z = project_unit_modulus(state.zeta + state.Y)
        state.Y = state.Y + state.zeta - state.Z
        primal = float(np.linalg.norm(state.zeta - state.Z))
        dual = float(state.rho * np.linalg.norm(state.Z - z_prev))
        if primal <= tol_primal and dual <= tol_dual:
            break
        if primal < 0.99 * best_primal:
            best_primal = primal
            stall = 0
        else:
            stall += 1
            if stall >= RHO_STALL_WINDOW and state.rho < RHO_MAX:
                state.rho = min(2.0 * state.rho, RHO_MAX)
                state.Y = state.Y / 2.0
                stall = 0
    phases = np.mod(np.angle(state.Z), 2.0 * np.pi)
    return AdmmResult(phases=phases, iterations=iterations,
                      primal_residual=primal, dual_residual=dual)
