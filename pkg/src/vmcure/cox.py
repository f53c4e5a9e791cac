"""Weighted Cox proportional-hazards machinery for the conditional total hazard.

Covers the three pieces the EM needs: the weighted partial likelihood (value,
score, information), the weighted Breslow baseline update
dL0(t_k) = d_k / sum_{l in R_k} w_l exp(gamma'z_l), and conditional survival
with the optional zero-tail constraint that sends survival to zero strictly
beyond the last event time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import EventTable, event_table
from .exceptions import FitError


@dataclass
class BaselineHazard:
    """Step-function baseline hazard with jumps at the distinct event times."""

    event_times: np.ndarray
    jumps: np.ndarray
    zero_tail: bool = False

    def __post_init__(self):
        self.event_times = np.asarray(self.event_times, dtype=float)
        self.jumps = np.asarray(self.jumps, dtype=float)
        if np.any(self.jumps < 0):
            raise FitError("baseline jumps must be nonnegative")
        self._cum = np.concatenate(([0.0], np.cumsum(self.jumps)))

    @property
    def t_max(self):
        return float(self.event_times[-1])

    def cumulative(self, t):
        """Lambda0(t): right-continuous prefix sum of the jumps."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.event_times, t_arr, side="right")
        out = self._cum[idx]
        return float(out) if np.isscalar(t) else out

    def survival(self, t, log_rate=0.0):
        """exp(-Lambda0(t) e^{log_rate}); exactly 0 beyond t_K with zero tail."""
        t_arr = np.asarray(t, dtype=float)
        s = np.exp(-self.cumulative(t_arr) * np.exp(log_rate))
        if self.zero_tail:
            s = np.where(t_arr > self.t_max, 0.0, s)
        return float(s) if np.isscalar(t) else s

    def jump_at(self, t):
        """dLambda0 at an event time (0 elsewhere)."""
        idx = np.searchsorted(self.event_times, t)
        if idx < len(self.event_times) and self.event_times[idx] == t:
            return float(self.jumps[idx])
        return 0.0


@dataclass
class CoxFit:
    """Fitted weighted Cox model."""

    gamma: np.ndarray
    baseline: BaselineHazard
    partial_loglik: float
    information: np.ndarray
    converged: bool
    iterations: int
    names: tuple = ()

    @property
    def covariance(self):
        if self.gamma.size == 0:
            return np.zeros((0, 0))
        return np.linalg.inv(self.information)

    @property
    def standard_errors(self):
        return np.sqrt(np.diag(self.covariance))


class CoxContext:
    """Sorted views of one dataset/design pair reused across solver calls."""

    def __init__(self, dataset, design=None, table=None):
        self.table = table if table is not None else event_table(dataset)
        z = dataset.columns(dataset.config.latency) if design is None else np.asarray(design, float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        self.z_sorted = np.ascontiguousarray(z[self.table.order])
        self.n, self.p = self.z_sorted.shape
        ev = self.table.is_event_sorted
        K = self.table.K
        self.ev_z_sum = np.zeros((K, self.p))
        if self.p:
            np.add.at(self.ev_z_sum, self.table.jump_idx[ev], self.z_sorted[ev])

    def sort_weights(self, weights):
        if weights is None:
            return np.ones(self.n)
        return np.ascontiguousarray(np.asarray(weights, dtype=float)[self.table.order])


def _as_context(table_or_ctx, dataset, design=None):
    if isinstance(table_or_ctx, CoxContext):
        return table_or_ctx
    if isinstance(table_or_ctx, EventTable):
        return CoxContext(dataset, design=design, table=table_or_ctx)
    raise TypeError("expected an EventTable or CoxContext")


def weighted_breslow(gamma, weights, table, dataset, design=None, zero_tail=False):
    """Weighted Breslow baseline: jumps d_k over weighted risk-set sums.

    Requires unit weights on every event subject; a vanishing denominator is
    reported with the offending event time.
    """
    ctx = _as_context(table, dataset, design)
    w = ctx.sort_weights(weights)
    if np.any(np.abs(w[ctx.table.is_event_sorted] - 1.0) > 1e-12):
        raise FitError("event subjects must carry weight 1")
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    denoms = kernels.breslow_denoms(gamma, ctx.z_sorted, w, ctx.table.risk_first)
    bad = denoms <= 0.0
    if np.any(bad):
        t_bad = ctx.table.event_times[np.argmax(bad)]
        raise FitError(f"zero risk-set denominator at event time {t_bad:g}")
    return BaselineHazard(ctx.table.event_times.copy(),
                          ctx.table.multiplicities / denoms, zero_tail)


def weighted_partial_loglik(gamma, weights, table, dataset, design=None):
    """Log weighted partial likelihood with its score and information in gamma."""
    ctx = _as_context(table, dataset, design)
    w = ctx.sort_weights(weights)
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    return kernels.cox_value_score_info(gamma, ctx.z_sorted, w,
                                        ctx.table.risk_first,
                                        ctx.table.multiplicities, ctx.ev_z_sum)


def fit_weighted_cox(weights, table, dataset, design=None, init_gamma=None,
                     tol=1e-9, max_iter=100, zero_tail=False, names=()):
    """Newton maximisation of the weighted partial likelihood (Breslow ties).

    The baseline is recomputed at the final gamma via the weighted Breslow
    update.  Step halving keeps the partial likelihood nondecreasing; a
    non-convergence flag is returned instead of raising.
    """
    ctx = _as_context(table, dataset, design)
    w = ctx.sort_weights(weights)
    p = ctx.p
    gamma = np.zeros(p) if init_gamma is None else np.atleast_1d(np.asarray(init_gamma, float)).copy()

    if p == 0:
        baseline = weighted_breslow(np.zeros(0), weights, ctx, dataset, zero_tail=zero_tail)
        return CoxFit(np.zeros(0), baseline, 0.0, np.zeros((0, 0)), True, 0, tuple(names))

    value, score, info = kernels.cox_value_score_info(
        gamma, ctx.z_sorted, w, ctx.table.risk_first, ctx.table.multiplicities, ctx.ev_z_sum)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(info + 1e-8 * np.eye(p), score)
        new_gamma = gamma + step
        new = kernels.cox_value_score_info(
            new_gamma, ctx.z_sorted, w, ctx.table.risk_first,
            ctx.table.multiplicities, ctx.ev_z_sum)
        halvings = 0
        while not np.isfinite(new[0]) or new[0] < value - 1e-12:
            halvings += 1
            if halvings > 30:
                break
            step = step / 2.0
            new_gamma = gamma + step
            new = kernels.cox_value_score_info(
                new_gamma, ctx.z_sorted, w, ctx.table.risk_first,
                ctx.table.multiplicities, ctx.ev_z_sum)
        delta = np.max(np.abs(new_gamma - gamma))
        gamma = new_gamma
        value, score, info = new
        if delta < tol or np.max(np.abs(score)) < tol:
            converged = True
            break

    baseline = weighted_breslow(gamma, weights, ctx, dataset, zero_tail=zero_tail)
    return CoxFit(gamma, baseline, value, info, converged, it, tuple(names))


def conditional_survival(t, z, fit):
    """S(t | Y=1, z) = exp(-Lambda0(t) e^{gamma'z}) with the fit's tail rule."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lp = float(fit.gamma @ z) if fit.gamma.size else 0.0
    return fit.baseline.survival(t, lp)
