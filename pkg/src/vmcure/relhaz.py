"""Relative cause-specific hazards: the distribution of cause given failure time.

pi_j(t | u) is a softmax over causes of kappa_j'B(t) + upsilon_j'u with the
last cause's coefficients pinned at zero.  The model is fitted on the
observed failures only, so it is identical whether or not a cure fraction is
modelled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeBasis, build_time_basis
from .exceptions import DataError, FitError
from .glm import MultinomFit, fit_multinomial


@dataclass
class RelativeHazardModel:
    """Fitted (or specified) relative-hazard model."""

    basis: TimeBasis
    eta: np.ndarray                 # (J, r + q), last row zero
    num_causes: int
    u_names: tuple = ()
    fit_info: MultinomFit = None

    def features(self, t, u=None):
        b = self.basis.evaluate(t)
        if u is None or len(self.u_names) == 0:
            u_arr = np.zeros(0)
        else:
            u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        if b.ndim == 1:
            return np.concatenate([b, u_arr])
        u_tiled = np.tile(u_arr, (b.shape[0], 1))
        return np.hstack([b, u_tiled])

    def pi(self, t, u=None):
        """Probability vector over the J causes at failure time t."""
        x = self.features(t, u)
        lp = x @ self.eta.T
        lp = lp - lp.max(axis=-1, keepdims=True)
        e = np.exp(lp)
        return e / e.sum(axis=-1, keepdims=True)

    def pi_standard_errors(self, t, u=None):
        """Delta-method standard errors of pi_j(t | u) per cause."""
        if self.num_causes == 1:
            return np.zeros(1)
        if self.fit_info is None:
            raise FitError("model carries no information matrix; fit it first")
        x = self.features(t, u)
        p = self.pi(t, u)
        J, m = self.eta.shape
        xi = self.fit_info.pseudo_inverse
        se = np.empty(J)
        for j in range(J):
            grad = np.zeros((J, m))
            for l in range(J):
                grad[l] = p[j] * ((1.0 if l == j else 0.0) - p[l]) * x
            g = grad.ravel()
            se[j] = np.sqrt(max(g @ xi @ g, 0.0))
        return se


def fit(dataset, basis=None, u_columns=None):
    """Fit the relative-hazard model on the event rows of a dataset.

    The multinomial factor of the likelihood depends only on observed
    failures, so the result is the same in VM and VMCF mode.  A piecewise
    basis interval whose events all share one cause makes the coefficients
    diverge; that is detected up front and reported with the interval named.
    """
    cfg = dataset.config
    if basis is None:
        basis = build_time_basis(cfg.basis, dataset)
    elif isinstance(basis, dict):
        basis = build_time_basis(basis, dataset)
    if u_columns is None:
        u_columns = cfg.relative_hazard if cfg is not None else ()
    J = dataset.num_causes

    ev = dataset.status > 0
    if not np.any(ev):
        raise DataError("no events to fit the relative-hazard model on")
    t_ev = dataset.time[ev]
    labels = dataset.status[ev]
    B = basis.evaluate(t_ev)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    U = dataset.columns(u_columns)[ev]
    feats = np.hstack([B, U])

    if J >= 2 and basis.kind == "piecewise_indicator":
        for k, lab in enumerate(basis.labels()):
            in_k = B[:, k] == 1.0
            if np.any(in_k) and np.unique(labels[in_k]).size == 1:
                raise FitError(
                    f"basis interval {lab} contains events of a single cause; "
                    "relative-hazard coefficients diverge")

    names = tuple(basis.labels()) + tuple(u_columns)
    mfit = fit_multinomial(feats, labels, J, names=names)
    return RelativeHazardModel(basis, mfit.eta, J, tuple(u_columns), mfit)


def loglik(model, dataset):
    """log L2: sum over events of log pi_{D_i}(t_i | U_i)."""
    ev = dataset.status > 0
    if not np.any(ev):
        return 0.0
    t_ev = dataset.time[ev]
    labels = dataset.status[ev]
    U = dataset.columns(model.u_names)[ev]
    total = 0.0
    B = model.basis.evaluate(t_ev)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    feats = np.hstack([B, U])
    lp = feats @ model.eta.T
    lp = lp - lp.max(axis=1, keepdims=True)
    logp = lp - np.log(np.exp(lp).sum(axis=1, keepdims=True))
    total = float(logp[np.arange(feats.shape[0]), labels - 1].sum())
    return total
