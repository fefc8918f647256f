"""Normalized application utility curves.

Two families are supported:

* sigmoidal (real-time traffic)::

      U(r) = c * (1 / (1 + exp(-a (r - b))) - d)
      c = (1 + exp(a b)) / exp(a b),  d = 1 / (1 + exp(a b))

* logarithmic (delay-tolerant traffic)::

      U(r) = log(1 + k r) / log(1 + k r_max)

Both satisfy U(0) = 0. The sigmoid tends to 1 as r grows; the logarithmic
curve reaches 1 at ``r_max`` and is clamped there.

The sigmoid is never evaluated in the textbook form, since ``exp(a b)``
overflows for moderately steep curves. Expanding the normalization gives
the equivalent product

      U(r) = (1 - exp(-a r)) * sigmoid(a (r - b))

which is exact, has no cancellation near r = 0, and has a log that splits
into two concave terms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit

from .errors import DomainError, InvalidParameterError


class UtilityKind(enum.Enum):
    SIGMOIDAL = "sigmoidal"
    LOGARITHMIC = "logarithmic"


@dataclass(frozen=True)
class Utility:
    """A user's satisfaction curve. Build with :func:`make_sigmoidal` or
    :func:`make_logarithmic` rather than directly."""

    kind: UtilityKind
    a: float = math.nan
    b: float = math.nan
    k: float = math.nan
    r_max: float = math.nan

    @property
    def c_norm(self) -> float:
        if self.kind is not UtilityKind.SIGMOIDAL:
            return math.nan
        # (1 + e^{ab}) / e^{ab}
        return 1.0 + math.exp(-self.a * self.b)

    @property
    def d_norm(self) -> float:
        if self.kind is not UtilityKind.SIGMOIDAL:
            return math.nan
        return float(expit(-self.a * self.b))

    @property
    def inflection(self) -> float:
        return self.b if self.kind is UtilityKind.SIGMOIDAL else 0.0

    def value(self, r):
        return _dispatch(self, "value", r)

    def slope(self, r):
        return _dispatch(self, "slope", r)

    def log_value(self, r):
        return _dispatch(self, "log_value", r)

    def slope_ratio(self, r):
        """U'(r) / U(r), with +inf where U(r) = 0."""
        return _dispatch(self, "ratio", r)

    def to_dict(self) -> dict:
        if self.kind is UtilityKind.SIGMOIDAL:
            return {"kind": self.kind.value, "a": self.a, "b": self.b}
        return {"kind": self.kind.value, "k": self.k, "r_max": self.r_max}


def _positive(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")
    return value


def make_sigmoidal(a: float, b: float) -> Utility:
    return Utility(UtilityKind.SIGMOIDAL, a=_positive("a", a), b=_positive("b", b))


def make_logarithmic(k: float, r_max: float) -> Utility:
    return Utility(UtilityKind.LOGARITHMIC, k=_positive("k", k), r_max=_positive("r_max", r_max))


# -- elementwise kernels; parameters may be scalars or arrays broadcast with r

def _sig_value(r, a, b):
    return -np.expm1(-a * r) * expit(a * (r - b))


def _sig_slope(r, a, b):
    x = a * (r - b)
    return a * (1.0 + np.exp(-a * b)) * expit(x) * expit(-x)


def _sig_log_value(r, a, b):
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-a * r)) + log_expit(a * (r - b))


def _sig_ratio(r, a, b):
    # U'/U = a c sigmoid(-a(r-b)) / (1 - e^{-ar}); no e^{ab} anywhere.
    with np.errstate(divide="ignore"):
        return a * (1.0 + np.exp(-a * b)) * expit(-a * (r - b)) / -np.expm1(-a * r)


def _log_value(r, k, r_max):
    return np.minimum(np.log1p(k * r) / np.log1p(k * r_max), 1.0)


def _log_slope(r, k, r_max):
    # unclamped above r_max
    return k / ((1.0 + k * r) * np.log1p(k * r_max))


def _log_log_value(r, k, r_max):
    with np.errstate(divide="ignore"):
        return np.log(_log_value(r, k, r_max))


def _log_ratio(r, k, r_max):
    with np.errstate(divide="ignore"):
        return _log_slope(r, k, r_max) / _log_value(r, k, r_max)


_KERNELS = {
    UtilityKind.SIGMOIDAL: {
        "value": _sig_value,
        "slope": _sig_slope,
        "log_value": _sig_log_value,
        "ratio": _sig_ratio,
    },
    UtilityKind.LOGARITHMIC: {
        "value": _log_value,
        "slope": _log_slope,
        "log_value": _log_log_value,
        "ratio": _log_ratio,
    },
}


def _params(u: Utility):
    if u.kind is UtilityKind.SIGMOIDAL:
        return u.a, u.b
    return u.k, u.r_max


def _check_rate(r):
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"rate must be >= 0, got {r!r}")
    return arr


def _dispatch(u: Utility, what: str, r):
    arr = _check_rate(r)
    out = _KERNELS[u.kind][what](arr, *_params(u))
    return float(out) if np.ndim(out) == 0 else out


def utility_value(u: Utility, r):
    """U(r), in [0, 1]."""
    return u.value(r)


def utility_slope(u: Utility, r):
    """dU/dr. For logarithmic utilities this is not clamped above ``r_max``."""
    return u.slope(r)


def log_utility(u: Utility, r):
    """ln U(r); ``-inf`` where U(r) = 0."""
    return u.log_value(r)


class UtilityGroup:
    """Vectorized evaluation of one utility per user.

    ``group.value(r)`` takes a rate vector aligned with ``utilities`` and
    returns the per-user values. Used on the scheduler hot path.
    """

    def __init__(self, utilities: Sequence[Utility]):
        self.utilities = list(utilities)
        kinds = np.array([u.kind is UtilityKind.SIGMOIDAL for u in self.utilities], dtype=bool)
        self._sig = np.flatnonzero(kinds)
        self._log = np.flatnonzero(~kinds)
        self._sig_a = np.array([self.utilities[i].a for i in self._sig])
        self._sig_b = np.array([self.utilities[i].b for i in self._sig])
        self._log_k = np.array([self.utilities[i].k for i in self._log])
        self._log_rmax = np.array([self.utilities[i].r_max for i in self._log])

    def __len__(self):
        return len(self.utilities)

    def _eval(self, what: str, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty(len(self.utilities))
        if self._sig.size:
            out[self._sig] = _KERNELS[UtilityKind.SIGMOIDAL][what](r[self._sig], self._sig_a, self._sig_b)
        if self._log.size:
            out[self._log] = _KERNELS[UtilityKind.LOGARITHMIC][what](r[self._log], self._log_k, self._log_rmax)
        return out

    def value(self, r):
        return self._eval("value", r)

    def slope(self, r):
        return self._eval("slope", r)

    def log_value(self, r):
        return self._eval("log_value", r)

    def slope_ratio(self, r):
        return self._eval("ratio", r)
