"""EM estimation of the vertical mixture cure model, plus the cure-free fit.

The observed likelihood factorises into L1 (incidence + conditional total
hazard, carrying the latent cure indicator) and L2 (relative hazards, a
function of observed failures only).  L2 is maximised once by the
multinomial solver; L1 is maximised by an EM algorithm whose E-step computes
posterior susceptibility weights and whose M-step runs a fractional-response
binary regression and a weighted Cox fit with a Breslow baseline update,
under the zero-tail constraint that identifies the cure fraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels, relhaz
from .cox import BaselineHazard, CoxContext, CoxFit, fit_weighted_cox, weighted_breslow
from .data import Dataset, ModelConfig, TimeBasis, event_table
from .exceptions import DataError, FitError
from .glm import GlmFit, MultinomFit, fit_weighted_binary
from .links import get_link
from .relhaz import RelativeHazardModel

SCHEMA_VERSION = 1


@dataclass
class EMState:
    """Mutable state of the EM iteration."""

    beta: np.ndarray
    gamma: np.ndarray
    baseline: BaselineHazard
    weights: np.ndarray
    loglik_trace: list = field(default_factory=list)


@dataclass
class FitResult:
    """A fitted vertical model (with or without a cure fraction)."""

    mode: str
    config: ModelConfig
    beta: np.ndarray            # incidence coefficients incl. intercept; None in VM mode
    beta_names: tuple
    gamma: np.ndarray
    gamma_names: tuple
    baseline: BaselineHazard
    relhaz: RelativeHazardModel
    weights: np.ndarray
    loglik1: float
    loglik2: float
    loglik: float
    converged: bool
    iterations: int
    loglik_trace: list
    covariate_means: dict
    n: int
    n_events: int
    beta_se: np.ndarray = None
    gamma_se: np.ndarray = None
    incidence_fit: GlmFit = None
    cox_fit: CoxFit = None

    @property
    def link(self):
        return get_link(self.config.link)

    def incidence_probability(self, x):
        """p(x) = g^{-1}(beta' x*) for an incidence design vector (no intercept)."""
        if self.beta is None:
            return 1.0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.link.inverse(self.beta @ np.concatenate(([1.0], x))))

    def latency_log_rate(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return float(self.gamma @ z) if self.gamma.size else 0.0

    # -- serialisation -------------------------------------------------------

    def to_dict(self):
        rh = self.relhaz
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "config": self.config.to_dict(),
            "beta": None if self.beta is None else list(self.beta),
            "beta_names": list(self.beta_names),
            "beta_se": None if self.beta_se is None else list(self.beta_se),
            "gamma": list(self.gamma),
            "gamma_names": list(self.gamma_names),
            "gamma_se": None if self.gamma_se is None else list(self.gamma_se),
            "baseline": {
                "event_times": [float(t) for t in self.baseline.event_times],
                "jumps": [float(j) for j in self.baseline.jumps],
                "zero_tail": bool(self.baseline.zero_tail),
            },
            "relhaz": {
                "basis": rh.basis.to_dict(),
                "eta": [list(row) for row in rh.eta],
                "u_names": list(rh.u_names),
                "xi_eta": [list(row) for row in rh.fit_info.pseudo_inverse]
                if rh.fit_info is not None else None,
                "num_causes": rh.num_causes,
            },
            "weights": [float(w) for w in self.weights],
            "loglik1": self.loglik1,
            "loglik2": self.loglik2,
            "loglik": self.loglik,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "covariate_means": dict(self.covariate_means),
            "n": self.n,
            "n_events": self.n_events,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d):
        cfg = ModelConfig.from_dict(d["config"])
        base = BaselineHazard(np.array(d["baseline"]["event_times"]),
                              np.array(d["baseline"]["jumps"]),
                              d["baseline"]["zero_tail"])
        rh_d = d["relhaz"]
        eta = np.array(rh_d["eta"], dtype=float)
        fit_info = None
        if rh_d.get("xi_eta") is not None:
            xi = np.array(rh_d["xi_eta"], dtype=float)
            fit_info = MultinomFit(eta, np.zeros_like(xi), xi, 0.0, True, 0,
                                   rh_d["num_causes"])
        rh = RelativeHazardModel(TimeBasis.from_dict(rh_d["basis"]), eta,
                                 rh_d["num_causes"], tuple(rh_d["u_names"]), fit_info)
        return cls(
            mode=d["mode"], config=cfg,
            beta=None if d["beta"] is None else np.array(d["beta"], dtype=float),
            beta_names=tuple(d["beta_names"]),
            gamma=np.array(d["gamma"], dtype=float),
            gamma_names=tuple(d["gamma_names"]),
            baseline=base, relhaz=rh,
            weights=np.array(d["weights"], dtype=float),
            loglik1=d["loglik1"], loglik2=d["loglik2"], loglik=d["loglik"],
            converged=d["converged"], iterations=d["iterations"],
            loglik_trace=list(d["loglik_trace"]),
            covariate_means=dict(d["covariate_means"]),
            n=d["n"], n_events=d["n_events"],
            beta_se=None if d.get("beta_se") is None else np.array(d["beta_se"]),
            gamma_se=None if d.get("gamma_se") is None else np.array(d["gamma_se"]),
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# E and M steps
# ---------------------------------------------------------------------------

def _sorted_inputs(table, p_vec, lp):
    order = table.order
    return p_vec[order], lp[order]


def e_step(beta, gamma, baseline, dataset, link, table=None, X=None, Z=None):
    """Posterior susceptibility weights at the current parameter values.

    Events get weight 1; a censored subject gets
    p S0(t)^{exp(gamma'z)} / (p S0(t)^{exp(gamma'z)} + 1 - p), which is 0 for
    censoring times at or beyond the last event time under the zero tail.
    """
    if table is None:
        table = event_table(dataset)
    if X is None:
        X = dataset.incidence_design()[0]
    if Z is None:
        Z = dataset.latency_design()[0]
    if isinstance(link, str):
        link = get_link(link)
    p_vec = link.inverse(X @ beta)
    lp = Z @ gamma if gamma.size else np.zeros(dataset.n)
    p_s, lp_s = _sorted_inputs(table, np.asarray(p_vec, float), np.asarray(lp, float))
    w_sorted = kernels.estep_weights(p_s, lp_s, baseline.jumps, table.sub_k,
                                     table.is_event_sorted)
    w = np.empty(dataset.n)
    w[table.order] = w_sorted
    return w


def m_step(weights, dataset, config, beta_init=None, gamma_init=None,
           table=None, ctx=None, X=None):
    """Maximise the expected complete log-likelihood at fixed weights.

    Returns the incidence GLM fit, the weighted Cox fit and the refreshed
    Breslow baseline (zero tail on).
    """
    if table is None:
        table = event_table(dataset)
    if ctx is None:
        ctx = CoxContext(dataset, design=dataset.latency_design()[0], table=table)
    if X is None:
        X = dataset.incidence_design()[0]
    link = get_link(config.link)
    glm_fit = fit_weighted_binary(X, weights, link=link, tol=1e-10)
    cox_fit = fit_weighted_cox(weights, ctx, dataset, init_gamma=gamma_init,
                               zero_tail=True)
    return glm_fit, cox_fit, cox_fit.baseline


def observed_loglik(beta, gamma, baseline, relhaz_model, dataset, link=None,
                    table=None, X=None, Z=None, zero_tail=True):
    """(log L1, log L2, total) of the observed data at given parameters."""
    if table is None:
        table = event_table(dataset)
    if X is None and beta is not None:
        X = dataset.incidence_design()[0]
    if Z is None:
        Z = dataset.latency_design()[0] if gamma is not None and np.size(gamma) else np.zeros((dataset.n, 0))
    if beta is None:
        p_vec = np.ones(dataset.n)
    else:
        if link is None:
            link = get_link(dataset.config.link)
        elif isinstance(link, str):
            link = get_link(link)
        p_vec = np.asarray(link.inverse(X @ beta), dtype=float)
    lp = Z @ gamma if np.size(gamma) else np.zeros(dataset.n)
    p_s, lp_s = _sorted_inputs(table, p_vec, np.asarray(lp, float))
    l1 = kernels.loglik1(p_s, lp_s, baseline.jumps, table.sub_k,
                         table.is_event_sorted, table.jump_idx, zero_tail)
    l2 = relhaz.loglik(relhaz_model, dataset) if relhaz_model is not None else 0.0
    return l1, l2, l1 + l2


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def fit_vmcf(dataset, config=None):
    """Fit the vertical mixture cure model by EM.

    Initialisation: incidence coefficients from a binary GLM of the event
    indicator, gamma = 0, weights from one E-step against the unweighted
    Breslow baseline.  Iterates until both the parameter change and the
    relative change of log L1 fall below the configured tolerance.
    """
    config = config or dataset.config
    if config.mode != "vmcf":
        raise FitError("config mode must be 'vmcf'")
    if dataset.n_events == 0:
        raise DataError("no events in dataset")
    if dataset.n_events == dataset.n:
        raise DataError("no censoring: cure fraction unidentifiable")

    link = get_link(config.link)
    table = event_table(dataset)
    X, x_names = dataset.incidence_design()
    Z, z_names = dataset.latency_design()
    ctx = CoxContext(dataset, design=Z, table=table)
    rh = relhaz.fit(dataset)

    init_fit = fit_weighted_binary(X, (dataset.status > 0).astype(float), link=link)
    beta = init_fit.coefficients
    gamma = np.zeros(Z.shape[1])
    baseline = weighted_breslow(gamma, None, ctx, dataset, zero_tail=True)
    w = e_step(beta, gamma, baseline, dataset, link, table, X, Z)

    trace = []
    l1_prev = -np.inf
    converged = False
    glm_fit = init_fit
    cox_fit = None
    it = 0
    for it in range(1, config.em_max_iter + 1):
        glm_fit, cox_fit, baseline = m_step(
            w, dataset, config, beta_init=beta, gamma_init=gamma,
            table=table, ctx=ctx, X=X)
        new_beta, new_gamma = glm_fit.coefficients, cox_fit.gamma
        l1, _, _ = observed_loglik(new_beta, new_gamma, baseline, None, dataset,
                                   link, table, X, Z)
        trace.append(l1)
        delta_par = max(
            np.max(np.abs(new_beta - beta)),
            np.max(np.abs(new_gamma - gamma)) if gamma.size else 0.0)
        rel_l1 = abs(l1 - l1_prev) / max(1.0, abs(l1_prev))
        beta, gamma = new_beta, new_gamma
        w = e_step(beta, gamma, baseline, dataset, link, table, X, Z)
        if delta_par < config.em_tol and rel_l1 < config.em_tol:
            converged = True
            break
        l1_prev = l1

    l1, l2, total = observed_loglik(beta, gamma, baseline, rh, dataset, link,
                                    table, X, Z)
    return FitResult(
        mode="vmcf", config=config,
        beta=beta, beta_names=x_names,
        gamma=gamma, gamma_names=z_names,
        baseline=baseline, relhaz=rh, weights=w,
        loglik1=l1, loglik2=l2, loglik=total,
        converged=converged, iterations=it, loglik_trace=trace,
        covariate_means=dataset.column_means(),
        n=dataset.n, n_events=dataset.n_events,
        incidence_fit=glm_fit, cox_fit=cox_fit,
    )


def fit_vm(dataset, config=None):
    """Fit the cure-free vertical model: an unweighted all-cause Cox fit plus
    the shared relative-hazard model.  Predictions carry no cure plateau."""
    config = config or dataset.config
    if config.mode != "vm":
        raise FitError("config mode must be 'vm'")
    if dataset.n_events == 0:
        raise DataError("no events in dataset")

    table = event_table(dataset)
    Z, z_names = dataset.latency_design()
    ctx = CoxContext(dataset, design=Z, table=table)
    cox_fit = fit_weighted_cox(None, ctx, dataset, zero_tail=False, names=z_names)
    rh = relhaz.fit(dataset)
    l1, l2, total = observed_loglik(None, cox_fit.gamma, cox_fit.baseline, rh,
                                    dataset, None, table, None, Z,
                                    zero_tail=False)
    gamma_se = cox_fit.standard_errors if cox_fit.gamma.size else np.zeros(0)
    return FitResult(
        mode="vm", config=config,
        beta=None, beta_names=(),
        gamma=cox_fit.gamma, gamma_names=z_names,
        baseline=cox_fit.baseline, relhaz=rh,
        weights=np.ones(dataset.n),
        loglik1=l1, loglik2=l2, loglik=total,
        converged=cox_fit.converged, iterations=cox_fit.iterations,
        loglik_trace=[l1],
        covariate_means=dataset.column_means(),
        n=dataset.n, n_events=dataset.n_events,
        gamma_se=gamma_se, cox_fit=cox_fit,
    )
