"""SINRs, achievable rates, the weighted sum-rate objective and MMSE updates.

Stream indexing convention: per cell k, stream j=0 is the earth station's
private satellite stream and j=1..L are the UE private streams. The common
streams enter through the rate plan and capacity constraints, not through
the MSE state.
"""

from dataclasses import dataclass

import numpy as np


class NonpositiveMse(ValueError):
    """MSE values must be strictly positive to invert into weights."""


@dataclass(frozen=True)
class SinrSet:
    es_common: np.ndarray   # (K,)
    es_private: np.ndarray  # (K,)
    ue_common: np.ndarray   # (K, L)
    ue_private: np.ndarray  # (K, L)


@dataclass(frozen=True)
class WmmseState:
    mu: np.ndarray     # (K, L+1) complex receivers
    omega: np.ndarray  # (K, L+1) positive weights
    mse: np.ndarray    # (K, L+1)


def _es_power_terms(h_eff_k, u_k, vars_, k):
    """Received powers at ES k: all satellite private beams, serving-BS beams."""
    sat_priv = np.abs(h_eff_k.conj() @ vars_.w_sat.T) ** 2
    bs_common = abs(u_k.conj() @ vars_.w_bs_common[k]) ** 2
    bs_priv = np.abs(u_k.conj() @ vars_.w_bs[k].T) ** 2
    return sat_priv, bs_common, bs_priv


def _ue_power_terms(v_kl, f_eff_kl, vars_, k):
    """Received powers at UE (k,l): own-BS beams plus every satellite beam."""
    bs_priv = np.abs(v_kl.conj() @ vars_.w_bs[k].T) ** 2
    sat_common = abs(f_eff_kl.conj() @ vars_.w_sat_common) ** 2
    sat_priv = np.abs(f_eff_kl.conj() @ vars_.w_sat.T) ** 2
    return bs_priv, sat_common, sat_priv


def compute_sinrs(channels, effective, vars_, noise_es, noise_ue):
    """Per-stream SINRs of the common and private signals at every receiver."""
    h_eff, f_eff = effective
    K, L = channels.v.shape[0], channels.v.shape[1]
    es_c = np.zeros(K)
    es_p = np.zeros(K)
    ue_c = np.zeros((K, L))
    ue_p = np.zeros((K, L))
    for k in range(K):
        sat_priv, bs_c, bs_p = _es_power_terms(h_eff[k], channels.u[k], vars_, k)
        base = bs_c + np.sum(bs_p) + noise_es[k]
        sig_c = abs(h_eff[k].conj() @ vars_.w_sat_common) ** 2
        es_c[k] = sig_c / (np.sum(sat_priv) + base)
        others = np.sum(sat_priv) - sat_priv[k]
        es_p[k] = sat_priv[k] / (others + base)
        for l in range(L):
            bs_priv, sat_c, sat_p = _ue_power_terms(channels.v[k, l], f_eff[k, l], vars_, k)
            ubase = sat_c + np.sum(sat_p) + noise_ue[k, l]
            sig_c = abs(channels.v[k, l].conj() @ vars_.w_bs_common[k]) ** 2
            ue_c[k, l] = sig_c / (np.sum(bs_priv) + ubase)
            ue_p[k, l] = bs_priv[l] / (np.sum(bs_priv) - bs_priv[l] + ubase)
    return SinrSet(es_common=es_c, es_private=es_p, ue_common=ue_c, ue_private=ue_p)


def total_rates(sinrs, rate_common_es, rate_common_ue):
    """Total per-receiver rates: common share plus private log term."""
    r_es = rate_common_es + np.log2(1.0 + sinrs.es_private)
    r_ue = rate_common_ue + np.log2(1.0 + sinrs.ue_private)
    return r_es, r_ue


def weighted_sum_rate(weights, rates_es, rates_ue):
    return float(np.sum(weights[:, 0] * rates_es) + np.sum(weights[:, 1:] * rates_ue))


def objective_value(scenario, channels, effective, vars_):
    """The true design objective at the current state (rates from SINRs)."""
    sinrs = compute_sinrs(channels, effective, vars_, scenario.noise_es, scenario.noise_ue)
    r_es, r_ue = total_rates(sinrs, vars_.rate_common_es, vars_.rate_common_ue)
    return weighted_sum_rate(scenario.weights, r_es, r_ue)


def update_receivers(channels, effective, vars_, noise_es, noise_ue):
    """Closed-form MMSE receivers: conj(desired) over total received power."""
    h_eff, f_eff = effective
    K, L = channels.v.shape[0], channels.v.shape[1]
    mu = np.zeros((K, L + 1), dtype=complex)
    for k in range(K):
        sat_priv, bs_c, bs_p = _es_power_terms(h_eff[k], channels.u[k], vars_, k)
        total = np.sum(sat_priv) + bs_c + np.sum(bs_p) + noise_es[k]
        mu[k, 0] = np.conj(h_eff[k].conj() @ vars_.w_sat[k]) / total
        for l in range(L):
            bs_priv, sat_c, sat_p = _ue_power_terms(channels.v[k, l], f_eff[k, l], vars_, k)
            total = np.sum(bs_priv) + sat_c + np.sum(sat_p) + noise_ue[k, l]
            mu[k, l + 1] = np.conj(channels.v[k, l].conj() @ vars_.w_bs[k, l]) / total
    return mu


def mse_terms(channels, effective, vars_, mu, noise_es, noise_ue):
    """Per-stream mean square error for arbitrary (not necessarily MMSE) receivers."""
    h_eff, f_eff = effective
    K, L = channels.v.shape[0], channels.v.shape[1]
    mse = np.zeros((K, L + 1))
    for k in range(K):
        sat_priv, bs_c, bs_p = _es_power_terms(h_eff[k], channels.u[k], vars_, k)
        total = np.sum(sat_priv) + bs_c + np.sum(bs_p) + noise_es[k]
        desired = h_eff[k].conj() @ vars_.w_sat[k]
        mse[k, 0] = (abs(mu[k, 0]) ** 2 * total
                     - 2.0 * np.real(mu[k, 0] * desired) + 1.0)
        for l in range(L):
            bs_priv, sat_c, sat_p = _ue_power_terms(channels.v[k, l], f_eff[k, l], vars_, k)
            total = np.sum(bs_priv) + sat_c + np.sum(sat_p) + noise_ue[k, l]
            desired = channels.v[k, l].conj() @ vars_.w_bs[k, l]
            mse[k, l + 1] = (abs(mu[k, l + 1]) ** 2 * total
                             - 2.0 * np.real(mu[k, l + 1] * desired) + 1.0)
    return mse


def update_weights(mse):
    if np.any(mse <= 0.0):
        raise NonpositiveMse("MSE values must be positive, got min %g" % np.min(mse))
    return 1.0 / mse


def wmmse_objective(weights, omega, mse):
    """Weighted MSE surrogate: sum alpha*(omega*e - log2(omega)).

    The log base matches the rate expressions so the surrogate optimum equals
    one minus the weighted private sum rate.
    """
    return float(np.sum(weights * (omega * mse - np.log2(omega))))


def wmmse_state(channels, effective, vars_, noise_es, noise_ue):
    """Receivers, MSEs and weights at the MMSE point for the current beams."""
    mu = update_receivers(channels, effective, vars_, noise_es, noise_ue)
    mse = mse_terms(channels, effective, vars_, mu, noise_es, noise_ue)
    return WmmseState(mu=mu, omega=update_weights(mse), mse=mse)
