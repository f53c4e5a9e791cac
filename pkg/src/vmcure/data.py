"""Observed-data records, covariate designs, time-function bases and CSV ingestion.

A dataset is a set of right-censored competing-risks records: an observation
time, a status code (0 = censored, 1..J = cause of failure) and a vector of
numeric baseline covariates.  Covariate subsets for the three model
components (incidence, latency, relative hazards) are declared in a JSON
config together with optional affine transforms, the status recoding and the
time-function basis.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSpec:
    """Declarative description of the time-function basis B(t)."""

    kind: str = "constant"            # constant | polynomial | piecewise | piecewise_quartiles
    breakpoints: tuple = ()           # explicit interior cut points (piecewise)
    degree: int = 0                   # polynomial degree
    quantile_type: int = 7            # interpolation rule for quartile-derived cuts

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "constant")
        if kind not in ("constant", "polynomial", "piecewise", "piecewise_quartiles"):
            raise ConfigError(f"unknown basis kind {kind!r}")
        return cls(
            kind=kind,
            breakpoints=tuple(float(b) for b in d.get("breakpoints", ())),
            degree=int(d.get("degree", 0)),
            quantile_type=int(d.get("quantile_type", 7)),
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": list(self.breakpoints),
            "degree": self.degree,
            "quantile_type": self.quantile_type,
        }


@dataclass(frozen=True)
class ModelConfig:
    """Parsed model/schema configuration (the JSON config document)."""

    num_causes: int = 1
    time_column: str = "time"
    status_column: str = "status"
    time_scale: float = 1.0
    status_map: dict = field(default_factory=dict)     # raw code -> {0..J}
    transforms: dict = field(default_factory=dict)     # col -> {center, scale}
    incidence: tuple = ()
    latency: tuple = ()
    relative_hazard: tuple = ()
    link: str = "logit"
    basis: BasisSpec = field(default_factory=BasisSpec)
    mode: str = "vmcf"                                 # vmcf | vm
    em_max_iter: int = 500
    em_tol: float = 1e-7

    @classmethod
    def from_dict(cls, d):
        design = d.get("design", {})
        mode = d.get("mode", "vmcf").lower()
        if mode not in ("vmcf", "vm"):
            raise ConfigError(f"unknown mode {mode!r}")
        em = d.get("em", {})
        return cls(
            num_causes=int(d.get("num_causes", 1)),
            time_column=d.get("time_column", "time"),
            status_column=d.get("status_column", "status"),
            time_scale=float(d.get("time_scale", 1.0)),
            status_map={str(k): int(v) for k, v in d.get("status_map", {}).items()},
            transforms={k: dict(v) for k, v in d.get("transforms", {}).items()},
            incidence=tuple(design.get("incidence", ())),
            latency=tuple(design.get("latency", ())),
            relative_hazard=tuple(design.get("relative_hazard", ())),
            link=d.get("link", "logit"),
            basis=BasisSpec.from_dict(d.get("basis", {})),
            mode=mode,
            em_max_iter=int(em.get("max_iter", 500)),
            em_tol=float(em.get("tol", 1e-7)),
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "num_causes": self.num_causes,
            "time_column": self.time_column,
            "status_column": self.status_column,
            "time_scale": self.time_scale,
            "status_map": dict(self.status_map),
            "transforms": {k: dict(v) for k, v in self.transforms.items()},
            "design": {
                "incidence": list(self.incidence),
                "latency": list(self.latency),
                "relative_hazard": list(self.relative_hazard),
            },
            "link": self.link,
            "basis": self.basis.to_dict(),
            "mode": self.mode,
            "em": {"max_iter": self.em_max_iter, "tol": self.em_tol},
        }

    def transform_value(self, column, value):
        """Apply the declared affine map (x - center) / scale to a raw value."""
        t = self.transforms.get(column)
        if not t:
            return float(value)
        return (float(value) - float(t.get("center", 0.0))) / float(t.get("scale", 1.0))


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subject:
    """A single observed record (view into a Dataset row)."""

    id: int
    time: float
    status: int
    covariates: dict


class Dataset:
    """Immutable collection of subjects with named covariate columns.

    Covariate values are stored after the schema transforms were applied;
    `time` is stored after division by ``time_scale`` and `status` after the
    ``status_map`` recoding.
    """

    def __init__(self, time, status, covariates, covariate_names, num_causes,
                 config=None):
        time = np.asarray(time, dtype=float)
        status = np.asarray(status, dtype=np.int64)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(len(time), -1)
        if np.any(time < 0):
            raise DataError("negative time")
        if np.any((status < 0) | (status > num_causes)):
            raise DataError(f"status outside 0..{num_causes}")
        if num_causes < 1:
            raise DataError("num_causes must be >= 1")
        self.time = time
        self.status = status
        self.covariates = covariates
        self.covariate_names = tuple(covariate_names)
        self.num_causes = int(num_causes)
        self.config = config
        for a in (self.time, self.status, self.covariates):
            a.setflags(write=False)

    # -- basic structure ----------------------------------------------------

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def is_event(self):
        return self.status > 0

    @property
    def n_events(self):
        return int(np.sum(self.status > 0))

    def subjects(self):
        for i in range(self.n):
            yield Subject(i, float(self.time[i]), int(self.status[i]),
                          dict(zip(self.covariate_names, self.covariates[i])))

    def column(self, name):
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise DataError(f"unknown covariate {name!r}") from None
        return self.covariates[:, j]

    def columns(self, names):
        if len(names) == 0:
            return np.empty((self.n, 0))
        return np.column_stack([self.column(nm) for nm in names])

    def column_means(self):
        return {nm: float(self.column(nm).mean()) for nm in self.covariate_names}

    # -- model designs ------------------------------------------------------

    def incidence_design(self):
        """Design matrix with leading intercept column for the incidence GLM."""
        cfg = self._require_config()
        X = self.columns(cfg.incidence)
        return np.column_stack([np.ones(self.n), X]), ("intercept",) + tuple(cfg.incidence)

    def latency_design(self):
        cfg = self._require_config()
        return self.columns(cfg.latency), tuple(cfg.latency)

    def relhaz_design(self):
        cfg = self._require_config()
        return self.columns(cfg.relative_hazard), tuple(cfg.relative_hazard)

    def _require_config(self):
        if self.config is None:
            raise ConfigError("dataset has no attached model config")
        return self.config

    def resample(self, indices):
        """Dataset made of the given subject rows (bootstrap helper)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.time[idx], self.status[idx], self.covariates[idx],
                       self.covariate_names, self.num_causes, self.config)


def load_dataset(path, config):
    """Read and validate a CSV file against a model config.

    The file needs a header row with the time and status columns plus any
    covariates named in the config's design lists.  Raw status codes are
    recoded through ``status_map`` when one is declared; affine transforms
    are applied to the declared covariates; time is divided by ``time_scale``.
    """
    if isinstance(config, (str, bytes)):
        config = ModelConfig.from_json(config)
    needed = set(config.incidence) | set(config.latency) | set(config.relative_hazard)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("no rows") from None
        header = [h.strip() for h in header]
        for col in (config.time_column, config.status_column, *sorted(needed)):
            if col not in header:
                raise DataError(f"missing column {col!r}")
        t_ix = header.index(config.time_column)
        s_ix = header.index(config.status_column)
        cov_names = [h for h in header if h not in (config.time_column, config.status_column)]
        cov_ix = [header.index(c) for c in cov_names]

        times, statuses, rows = [], [], []
        for rownum, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise DataError(f"expected {len(header)} cells, got {len(rec)}", row=rownum)
            try:
                t = float(rec[t_ix])
            except ValueError:
                raise DataError(f"non-numeric time {rec[t_ix]!r}", row=rownum) from None
            if not math.isfinite(t) or t < 0:
                raise DataError(f"negative or non-finite time {rec[t_ix]!r}", row=rownum)
            raw_status = rec[s_ix].strip()
            if config.status_map:
                if raw_status not in config.status_map:
                    raise DataError(f"status {raw_status!r} not in status_map", row=rownum)
                s = config.status_map[raw_status]
            else:
                try:
                    s = int(raw_status)
                except ValueError:
                    raise DataError(f"non-numeric status {raw_status!r}", row=rownum) from None
            if not 0 <= s <= config.num_causes:
                raise DataError(
                    f"status {s} outside 0..{config.num_causes}", row=rownum)
            vals = []
            for name, ix in zip(cov_names, cov_ix):
                try:
                    v = float(rec[ix])
                except ValueError:
                    raise DataError(f"non-numeric value {rec[ix]!r} in column {name!r}",
                                    row=rownum) from None
                if not math.isfinite(v):
                    raise DataError(f"non-finite value in column {name!r}", row=rownum)
                vals.append(config.transform_value(name, v))
            times.append(t / config.time_scale)
            statuses.append(s)
            rows.append(vals)
    if not times:
        raise DataError("no rows")
    return Dataset(np.array(times), np.array(statuses), np.array(rows),
                   cov_names, config.num_causes, config)


def write_dataset(dataset, path):
    """Write a dataset back to CSV with canonical (shortest round-trip) floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "status", *dataset.covariate_names])
        for i in range(dataset.n):
            w.writerow([repr(float(dataset.time[i])), int(dataset.status[i]),
                        *(repr(float(v)) for v in dataset.covariates[i])])


# ---------------------------------------------------------------------------
# time basis
# ---------------------------------------------------------------------------

class TimeBasis:
    """The r-vector B(t) of pre-specified time functions.

    Piecewise-indicator bases use half-open intervals (a, b]; evaluation past
    the final breakpoint reuses the last interval (documented extrapolation).
    Polynomial bases are (1, t, ..., t^degree).
    """

    def __init__(self, kind, breakpoints=(), degree=0, max_time=None):
        if kind not in ("piecewise_indicator", "polynomial"):
            raise ConfigError(f"unknown basis kind {kind!r}")
        self.kind = kind
        self.breakpoints = tuple(float(b) for b in breakpoints)
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ConfigError("breakpoints must be strictly ascending")
        self.degree = int(degree)
        self.max_time = None if max_time is None else float(max_time)
        if kind == "piecewise_indicator":
            self.r = len(self.breakpoints) + 1
        else:
            self.r = self.degree + 1

    def evaluate(self, t):
        """B(t); accepts a scalar or an array, returns shape (r,) or (n, r)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "piecewise_indicator":
            # interval index for half-open (a, b]: count of breakpoints < t
            idx = np.searchsorted(np.array(self.breakpoints), t_arr, side="left")
            idx = np.minimum(idx, self.r - 1)
            out = np.zeros((t_arr.shape[0], self.r))
            out[np.arange(t_arr.shape[0]), idx] = 1.0
        else:
            out = np.vander(t_arr, self.r, increasing=True)
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def labels(self):
        if self.kind == "polynomial":
            return tuple(f"t^{k}" for k in range(self.r))
        edges = [0.0, *self.breakpoints, self.max_time]
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            hi = "inf" if b is None else f"{b:g}"
            out.append(f"({a:g},{hi}]")
        return tuple(out)

    def to_dict(self):
        return {"kind": self.kind, "breakpoints": list(self.breakpoints),
                "degree": self.degree, "max_time": self.max_time}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("breakpoints", ()), d.get("degree", 0),
                   d.get("max_time"))


def _quantile(sorted_x, p, qtype):
    """Empirical quantile with R-style type 7 or type 8 interpolation."""
    n = sorted_x.shape[0]
    if qtype == 7:
        h = (n - 1) * p + 1.0
    elif qtype == 8:
        h = (n + 1.0 / 3.0) * p + 1.0 / 3.0
    else:
        raise ConfigError(f"unsupported quantile type {qtype}")
    h = min(max(h, 1.0), float(n))
    lo = int(math.floor(h))
    frac = h - lo
    if lo >= n:
        return float(sorted_x[-1])
    return float(sorted_x[lo - 1] + frac * (sorted_x[lo] - sorted_x[lo - 1]))


def build_time_basis(spec, dataset):
    """Construct an evaluable TimeBasis from a declarative spec and a dataset.

    Quartile mode places cut points at the 0.25/0.5/0.75 empirical quantiles
    of the uncensored event times and closes the last interval at the maximum
    observed time.
    """
    if isinstance(spec, dict):
        spec = BasisSpec.from_dict(spec)
    max_time = float(dataset.time.max())
    if spec.kind == "constant":
        return TimeBasis("polynomial", degree=0, max_time=max_time)
    if spec.kind == "polynomial":
        return TimeBasis("polynomial", degree=spec.degree, max_time=max_time)
    if spec.kind == "piecewise":
        return TimeBasis("piecewise_indicator", spec.breakpoints, max_time=max_time)
    # piecewise_quartiles
    ev = np.sort(dataset.time[dataset.status > 0])
    if ev.size == 0:
        raise DataError("quantile-derived breakpoints need at least one event")
    cuts = [_quantile(ev, p, spec.quantile_type) for p in (0.25, 0.5, 0.75)]
    if len(set(cuts)) != 3:
        raise DataError("fewer distinct event times than requested breakpoints")
    return TimeBasis("piecewise_indicator", cuts, max_time=max_time)


# ---------------------------------------------------------------------------
# event table
# ---------------------------------------------------------------------------

class EventTable:
    """Distinct ordered event times with multiplicities and nested risk sets.

    All index arrays refer to the time-ascending ordering stored in ``order``.
    ``risk_first[k]`` is the first sorted position belonging to the risk set
    of event time k (ties between events and censorings keep the censored
    subject at risk).  ``sub_k[i]`` counts event times <= the sorted subject
    i's observation time, so cumulative hazards are prefix sums indexed by it.
    """

    def __init__(self, dataset):
        time = dataset.time
        status = dataset.status
        if not np.any(status > 0):
            raise DataError("no events in dataset")
        order = np.argsort(time, kind="stable")
        t_sorted = time[order]
        s_sorted = status[order]
        is_event = s_sorted > 0
        self.order = order
        self.time_sorted = t_sorted
        self.status_sorted = s_sorted
        self.event_times = np.unique(t_sorted[is_event])
        self.K = self.event_times.shape[0]
        self.multiplicities = np.array(
            [int(np.sum((t_sorted == t) & is_event)) for t in self.event_times], dtype=float)
        self.risk_first = np.searchsorted(t_sorted, self.event_times, side="left").astype(np.int64)
        # number of event times <= each sorted subject's time
        self.sub_k = np.searchsorted(self.event_times, t_sorted, side="right").astype(np.int64)
        self.is_event_sorted = is_event
        # jump index of each sorted event row (position of its event time)
        self.jump_idx = np.full(t_sorted.shape[0], -1, dtype=np.int64)
        self.jump_idx[is_event] = np.searchsorted(self.event_times, t_sorted[is_event])
        for a in (self.order, self.time_sorted, self.status_sorted, self.event_times,
                  self.multiplicities, self.risk_first, self.sub_k, self.jump_idx):
            a.setflags(write=False)

    def risk_set(self, k):
        """Original-order subject indices at risk at the k-th event time."""
        return self.order[self.risk_first[k]:]


def event_table(dataset):
    """Build the EventTable of a dataset (requires at least one event)."""
    return EventTable(dataset)
