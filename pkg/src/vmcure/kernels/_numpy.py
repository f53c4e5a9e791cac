"""Vectorised NumPy reference implementations of the hot kernels.

Each function mirrors a numba twin in ``_numba``; inputs are pre-sorted by
observation time (ascending) and indexed by the EventTable arrays.
"""

import numpy as np


def cox_value_score_info(gamma, z, w, risk_first, d, ev_z_sum):
    """Weighted Cox partial log-likelihood with score and information.

    Breslow tie convention: the d_k events at a distinct event time share the
    risk-set denominator S0(t_k) = sum_{l in R_k} w_l exp(gamma'z_l).
    """
    phi = w * np.exp(z @ gamma)
    c0 = np.cumsum(phi[::-1])[::-1]
    s0 = c0[risk_first]
    phi_z = phi[:, None] * z
    c1 = np.cumsum(phi_z[::-1], axis=0)[::-1]
    s1 = c1[risk_first]
    phi_zz = phi_z[:, :, None] * z[:, None, :]
    c2 = np.cumsum(phi_zz[::-1], axis=0)[::-1]
    s2 = c2[risk_first]
    mu = s1 / s0[:, None]
    value = float(ev_z_sum.sum(axis=0) @ gamma - d @ np.log(s0))
    score = ev_z_sum.sum(axis=0) - (d[:, None] * mu).sum(axis=0)
    info = np.einsum("k,kab->ab", d, s2 / s0[:, None, None]) \
        - np.einsum("k,ka,kb->ab", d, mu, mu)
    return value, score, info


def breslow_denoms(gamma, z, w, risk_first):
    """Weighted risk-set sums S0(t_k); Breslow jumps are d_k / S0(t_k)."""
    phi = w * np.exp(z @ gamma)
    return np.cumsum(phi[::-1])[::-1][risk_first]


def loglik1(p, lp, jumps, sub_k, is_event, jump_idx, zero_tail):
    """Observed log L1 of the incidence/latency factor.

    Events contribute log[p * dL(t_i) e^(lp) * exp(-L(t_i) e^(lp))] with the
    cumulative hazard L including the jump at the event's own time; censored
    subjects contribute log[p * S(t_i) + 1 - p], which collapses to
    log(1 - p) past the last event time under the zero-tail constraint.
    """
    cum = np.concatenate(([0.0], np.cumsum(jumps)))
    lam = cum[sub_k]
    elp = np.exp(lp)
    haz = lam * elp
    K = jumps.shape[0]
    out = np.empty(p.shape[0])
    ev = is_event
    out[ev] = np.log(p[ev]) + np.log(jumps[jump_idx[ev]]) + lp[ev] - haz[ev]
    cens = ~ev
    surv = np.exp(-haz[cens])
    mix = p[cens] * surv + (1.0 - p[cens])
    if zero_tail:
        beyond = sub_k[cens] == K
        mix = np.where(beyond, 1.0 - p[cens], mix)
    out[cens] = np.log(mix)
    return float(out.sum())


def estep_weights(p, lp, jumps, sub_k, is_event):
    """Posterior susceptibility weights: 1 for events, the mixture posterior
    for censored subjects, and 0 past the last event time (zero tail)."""
    cum = np.concatenate(([0.0], np.cumsum(jumps)))
    surv = np.exp(-cum[sub_k] * np.exp(lp))
    K = jumps.shape[0]
    num = p * surv
    w = num / (num + 1.0 - p)
    w = np.where(sub_k == K, 0.0, w)
    w = np.where(is_event, 1.0, w)
    return w
