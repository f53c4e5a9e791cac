"""Numba-compiled hot kernels (single-pass loops, GIL released).

Same contracts as ``_numpy``; selected at import time unless the
``VMCURE_NO_NUMBA`` environment flag disables compilation.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def cox_value_score_info(gamma, z, w, risk_first, d, ev_z_sum):
    n, p = z.shape
    K = d.shape[0]
    value = 0.0
    score = np.zeros(p)
    info = np.zeros((p, p))
    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p))
    idx = n - 1
    for k in range(K - 1, -1, -1):
        start = risk_first[k]
        while idx >= start:
            lp = 0.0
            for a in range(p):
                lp += gamma[a] * z[idx, a]
            phi = w[idx] * np.exp(lp)
            s0 += phi
            for a in range(p):
                pa = phi * z[idx, a]
                s1[a] += pa
                for b in range(p):
                    s2[a, b] += pa * z[idx, b]
            idx -= 1
        for a in range(p):
            value += gamma[a] * ev_z_sum[k, a]
        value -= d[k] * np.log(s0)
        for a in range(p):
            mu_a = s1[a] / s0
            score[a] += ev_z_sum[k, a] - d[k] * mu_a
            for b in range(p):
                info[a, b] += d[k] * (s2[a, b] / s0 - mu_a * s1[b] / s0)
    return value, score, info


@njit(**_OPTS)
def breslow_denoms(gamma, z, w, risk_first):
    n, p = z.shape
    K = risk_first.shape[0]
    out = np.empty(K)
    s0 = 0.0
    idx = n - 1
    for k in range(K - 1, -1, -1):
        start = risk_first[k]
        while idx >= start:
            lp = 0.0
            for a in range(p):
                lp += gamma[a] * z[idx, a]
            s0 += w[idx] * np.exp(lp)
            idx -= 1
        out[k] = s0
    return out


@njit(**_OPTS)
def loglik1(p, lp, jumps, sub_k, is_event, jump_idx, zero_tail):
    n = p.shape[0]
    K = jumps.shape[0]
    cum = np.empty(K + 1)
    cum[0] = 0.0
    for k in range(K):
        cum[k + 1] = cum[k] + jumps[k]
    total = 0.0
    for i in range(n):
        haz = cum[sub_k[i]] * np.exp(lp[i])
        if is_event[i]:
            total += np.log(p[i]) + np.log(jumps[jump_idx[i]]) + lp[i] - haz
        elif zero_tail and sub_k[i] == K:
            total += np.log(1.0 - p[i])
        else:
            total += np.log(p[i] * np.exp(-haz) + 1.0 - p[i])
    return total


@njit(**_OPTS)
def estep_weights(p, lp, jumps, sub_k, is_event):
    n = p.shape[0]
    K = jumps.shape[0]
    cum = np.empty(K + 1)
    cum[0] = 0.0
    for k in range(K):
        cum[k + 1] = cum[k] + jumps[k]
    w = np.empty(n)
    for i in range(n):
        if is_event[i]:
            w[i] = 1.0
        elif sub_k[i] == K:
            w[i] = 0.0
        else:
            s = np.exp(-cum[sub_k[i]] * np.exp(lp[i]))
            num = p[i] * s
            w[i] = num / (num + 1.0 - p[i])
    return w
