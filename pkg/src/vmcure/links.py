"""Binary-regression link functions (logit, complementary log-log, probit)."""

import numpy as np
from scipy import special

from .exceptions import ConfigError

P_CLAMP = 1e-12


def _clamp(p):
    return np.clip(p, P_CLAMP, 1.0 - P_CLAMP)


class LinkFunction:
    """A link g with inverse and the derivative of the inverse.

    The inverse is clamped into [1e-12, 1 - 1e-12] so downstream logs stay
    finite; g is strictly increasing on (0, 1).
    """

    def __init__(self, name, forward, inverse, dinverse):
        self.name = name
        self._forward = forward
        self._inverse = inverse
        self._dinverse = dinverse

    def __call__(self, p):
        return self._forward(np.asarray(p, dtype=float))

    def inverse(self, s):
        return _clamp(self._inverse(np.asarray(s, dtype=float)))

    def dinverse(self, s):
        """d g^{-1}(s) / ds, evaluated without clamping."""
        return self._dinverse(np.asarray(s, dtype=float))

    def __repr__(self):
        return f"LinkFunction({self.name!r})"


def _cloglog_inv(s):
    return -np.expm1(-np.exp(s))


_LINKS = {
    "logit": LinkFunction(
        "logit",
        forward=lambda p: special.logit(p),
        inverse=special.expit,
        dinverse=lambda s: special.expit(s) * (1.0 - special.expit(s)),
    ),
    "cloglog": LinkFunction(
        "cloglog",
        forward=lambda p: np.log(-np.log1p(-p)),
        inverse=_cloglog_inv,
        dinverse=lambda s: np.exp(s - np.exp(s)),
    ),
    "probit": LinkFunction(
        "probit",
        forward=special.ndtri,
        inverse=special.ndtr,
        dinverse=lambda s: np.exp(-0.5 * s * s) / np.sqrt(2.0 * np.pi),
    ),
}


def get_link(name):
    """Look up a link function by name."""
    try:
        return _LINKS[name]
    except KeyError:
        raise ConfigError(f"unknown link {name!r}; choose from {sorted(_LINKS)}") from None


def apply_inverse_link(link, s):
    """g^{-1}(s) as a probability clamped away from 0 and 1."""
    if isinstance(link, str):
        link = get_link(link)
    return link.inverse(s)
