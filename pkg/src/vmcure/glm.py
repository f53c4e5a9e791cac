"""Newton/IRLS solvers for weighted binary and multinomial regression.

These are the two generalised-linear building blocks used by the rest of the
package: a weighted binary regression that accepts fractional responses
(the M-step posterior weights act as outcomes) and a multinomial logistic
regression over failure causes with the last cause as reference.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import FitError
from .links import get_link

RIDGE = 1e-8
MAX_HALVINGS = 30
SEPARATION_BOUND = 50.0


@dataclass
class GlmFit:
    """Result of a weighted binary regression."""

    coefficients: np.ndarray
    covariance: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    separated: bool = False
    names: tuple = ()


@dataclass
class MultinomFit:
    """Multinomial logistic fit with cause J as the zero reference.

    ``eta`` has one row per cause (the last row identically zero);
    ``information`` is the observed information over all J*m coordinates
    (singular by construction) and ``pseudo_inverse`` its Moore-Penrose
    generalised inverse.
    """

    eta: np.ndarray
    information: np.ndarray
    pseudo_inverse: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    num_causes: int
    names: tuple = ()
    separated: bool = False

    @property
    def n_features(self):
        return self.eta.shape[1]

    def probabilities(self, features):
        """Cause probabilities for rows of the feature matrix."""
        feats = np.atleast_2d(np.asarray(features, dtype=float))
        lp = feats @ self.eta.T
        lp -= lp.max(axis=1, keepdims=True)
        e = np.exp(lp)
        out = e / e.sum(axis=1, keepdims=True)
        return out if np.asarray(features).ndim > 1 else out[0]


def _bernoulli_loglik(y, p, omega):
    return float(np.sum(omega * (y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def fit_weighted_binary(design, outcome, weights=None, link="logit",
                        tol=1e-8, max_iter=100):
    """Maximise the weighted Bernoulli log-likelihood with fractional outcomes.

    Parameters
    ----------
    design : (n, q) matrix including any intercept column.
    outcome : values in [0, 1]; fractional responses are allowed and enter
        the log-likelihood linearly.
    weights : optional nonnegative case weights.
    link : link function or name ('logit', 'cloglog', 'probit').

    Newton iterations use Fisher-scoring weights with step halving; a ridge
    term stabilises a numerically singular information matrix.  Divergent
    coefficients are reported through the ``separated`` flag rather than an
    exception.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(outcome, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise FitError("outcomes must lie in [0, 1]")
    omega = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if np.any(omega < 0):
        raise FitError("weights must be nonnegative")
    if isinstance(link, str):
        link = get_link(link)

    q = X.shape[1]
    beta = np.zeros(q)
    p = link.inverse(X @ beta)
    ll = _bernoulli_loglik(y, p, omega)
    converged = False
    separated = False
    it = 0
    for it in range(1, max_iter + 1):
        s = X @ beta
        p = link.inverse(s)
        dmu = link.dinverse(s)
        v = p * (1.0 - p)
        score = X.T @ (omega * dmu * (y - p) / v)
        W = omega * dmu * dmu / v
        info = (X * W[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(info + RIDGE * np.eye(q), score)
        new_beta = beta + step
        new_ll = _bernoulli_loglik(y, link.inverse(X @ new_beta), omega)
        halvings = 0
        while not np.isfinite(new_ll) or new_ll < ll - 1e-12:
            halvings += 1
            if halvings > MAX_HALVINGS:
                break
            step = step / 2.0
            new_beta = beta + step
            new_ll = _bernoulli_loglik(y, link.inverse(X @ new_beta), omega)
        delta = np.max(np.abs(new_beta - beta))
        beta, ll = new_beta, new_ll
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            separated = True
            break
        if delta < tol:
            converged = True
            break

    s = X @ beta
    p = link.inverse(s)
    dmu = link.dinverse(s)
    W = omega * dmu * dmu / (p * (1.0 - p))
    info = (X * W[:, None]).T @ X
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    if separated:
        warnings.warn("binary fit shows separation (divergent coefficients)",
                      RuntimeWarning, stacklevel=2)
    return GlmFit(beta, cov, ll, converged, it, separated)


def _multinom_loglik(W_free, feats, labels, J):
    lp = np.zeros((feats.shape[0], J))
    lp[:, :J - 1] = feats @ W_free.T
    lp -= lp.max(axis=1, keepdims=True)
    e = np.exp(lp)
    logp = lp - np.log(e.sum(axis=1, keepdims=True))
    return float(logp[np.arange(feats.shape[0]), labels - 1].sum())


def fit_multinomial(features, labels, num_causes, tol=1e-8, max_iter=200,
                    names=()):
    """Maximise the multinomial likelihood over causes 1..J (reference J).

    ``features`` are the per-event rows (time-basis values concatenated with
    covariates); ``labels`` are cause codes in 1..J.  For J = 1 the
    degenerate fit (all probability on the single cause) is returned.  The
    full-coordinate observed information and its Moore-Penrose pseudo-inverse
    are attached for downstream delta-method work.
    """
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=np.int64)
    J = int(num_causes)
    n, m = feats.shape
    if labels.shape[0] != n:
        raise FitError("labels and features disagree on length")
    if np.any((labels < 1) | (labels > J)):
        raise FitError(f"cause labels must lie in 1..{J}")

    if J == 1:
        eta = np.zeros((1, m))
        info = np.zeros((m, m))
        return MultinomFit(eta, info, np.zeros((m, m)), 0.0, True, 0, 1, tuple(names))

    nf = (J - 1) * m
    W = np.zeros((J - 1, m))
    ll = _multinom_loglik(W, feats, labels, J)
    converged = False
    separated = False
    it = 0
    onehot = np.zeros((n, J))
    onehot[np.arange(n), labels - 1] = 1.0
    for it in range(1, max_iter + 1):
        lp = np.zeros((n, J))
        lp[:, :J - 1] = feats @ W.T
        lp -= lp.max(axis=1, keepdims=True)
        e = np.exp(lp)
        pi = e / e.sum(axis=1, keepdims=True)
        score = ((onehot - pi)[:, :J - 1].T @ feats).ravel()
        # blocks H[j,l] = sum_i x x' * pi_j (delta_jl - pi_l)
        hess = np.zeros((nf, nf))
        for j in range(J - 1):
            for l in range(j, J - 1):
                wjl = pi[:, j] * ((1.0 if j == l else 0.0) - pi[:, l])
                block = (feats * wjl[:, None]).T @ feats
                hess[j * m:(j + 1) * m, l * m:(l + 1) * m] = block
                if l != j:
                    hess[l * m:(l + 1) * m, j * m:(j + 1) * m] = block
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + RIDGE * np.eye(nf), score)
        new_W = W + step.reshape(J - 1, m)
        new_ll = _multinom_loglik(new_W, feats, labels, J)
        halvings = 0
        while not np.isfinite(new_ll) or new_ll < ll - 1e-12:
            halvings += 1
            if halvings > MAX_HALVINGS:
                break
            step = step / 2.0
            new_W = W + step.reshape(J - 1, m)
            new_ll = _multinom_loglik(new_W, feats, labels, J)
        delta = np.max(np.abs(new_W - W))
        W, ll = new_W, new_ll
        if np.max(np.abs(W)) > SEPARATION_BOUND:
            separated = True
            break
        if delta < tol:
            converged = True
            break

    eta = np.vstack([W, np.zeros(m)])
    info = full_multinomial_information(eta, feats)
    xi = np.linalg.pinv(info)
    if separated:
        warnings.warn("multinomial fit shows separation (divergent coefficients)",
                      RuntimeWarning, stacklevel=2)
    return MultinomFit(eta, info, xi, ll, converged, it, J, tuple(names), separated)


def full_multinomial_information(eta, features):
    """Observed information over all J*m coordinates of the softmax model.

    Singular with rank (J-1)*m: adding a constant vector to every cause's
    coefficients leaves the probabilities unchanged.
    """
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    J, m = eta.shape
    lp = feats @ eta.T
    lp -= lp.max(axis=1, keepdims=True)
    e = np.exp(lp)
    pi = e / e.sum(axis=1, keepdims=True)
    info = np.zeros((J * m, J * m))
    for j in range(J):
        for l in range(j, J):
            wjl = pi[:, j] * ((1.0 if j == l else 0.0) - pi[:, l])
            block = (feats * wjl[:, None]).T @ feats
            info[j * m:(j + 1) * m, l * m:(l + 1) * m] = block
            if l != j:
                info[l * m:(l + 1) * m, j * m:(j + 1) * m] = block
    return info
