"""Stationary law of the one-dimensional logistic SDE on the boundary.

The prey-only equation d(phi) = phi (g - b phi) dt + s phi dB has, when
g > s^2/2, a unique stationary Gamma(q, a) distribution with
q = 2g/s^2 - 1 and a = 2b/s^2.  The same construction is reused for the
predator-dominating process (growth -a2 + c2/m2, crowding b2, noise beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from .errors import NonPositiveCrowdingError, NonPositivePointError


@dataclass(frozen=True)
class GammaLaw:
    """Gamma(shape q, rate a) with the normalizing constant cached in log space."""

    q: float
    a: float

    def __post_init__(self):
        if not (self.q > 0 and self.a > 0):
            raise ValueError(f"Gamma law needs q, a > 0, got q={self.q}, a={self.a}")

    @property
    def log_norm_const(self) -> float:
        # log(a^q / Gamma(q)); kept in log space since q can be large
        return self.q * math.log(self.a) - gammaln(self.q)

    @property
    def norm_const(self) -> float:
        return math.exp(self.log_norm_const)

    @property
    def mean(self) -> float:
        return self.q / self.a

    @property
    def variance(self) -> float:
        return self.q / self.a**2


class DegeneratesToZero:
    """Marker result: the logistic SDE collapses to 0 (growth <= noise^2/2)."""

    def __repr__(self):
        return "DegeneratesToZero"

    def __eq__(self, other):
        return isinstance(other, DegeneratesToZero)

    def __hash__(self):
        return hash("DegeneratesToZero")


LogisticLawResult = Union[GammaLaw, DegeneratesToZero]


def from_logistic(growth: float, crowding: float, noise: float) -> LogisticLawResult:
    """Stationary law of d(phi) = phi(growth - crowding*phi)dt + noise*phi dB.

    Returns GammaLaw(q = 2*growth/noise^2 - 1, a = 2*crowding/noise^2) when
    growth > noise^2/2, else DegeneratesToZero.
    """
    if not crowding > 0:
        raise NonPositiveCrowdingError(f"crowding = {crowding} must be > 0")
    if noise == 0:
        raise NonPositiveCrowdingError("noise must be nonzero")
    s2 = noise * noise
    if growth <= s2 / 2:
        return DegeneratesToZero()
    return GammaLaw(q=2.0 * growth / s2 - 1.0, a=2.0 * crowding / s2)


def moment(law: GammaLaw, p: float) -> float:
    """K_p = Gamma(p+q) / (a^p Gamma(q)), evaluated via log-Gamma."""
    if not p > 0:
        raise ValueError(f"moment order p = {p} must be > 0")
    return math.exp(gammaln(p + law.q) - gammaln(law.q) - p * math.log(law.a))


def log_density(law: GammaLaw, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonPositivePointError("density is defined for x > 0 only")
    return law.log_norm_const + (law.q - 1.0) * np.log(x) - law.a * x


def density(law: GammaLaw, x):
    """Stationary density C x^{q-1} e^{-ax}, computed in log space."""
    return np.exp(log_density(law, x))


def sample(law: GammaLaw, n: int, seed) -> np.ndarray:
    """n i.i.d. draws, deterministic given seed (counter-based Philox stream).

    Backed by numpy's squeeze/rejection gamma sampler, which is valid for all
    shapes q > 0 (q < 1 handled by boosting internally).
    """
    if n < 1:
        raise ValueError(f"sample size n = {n} must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.standard_gamma(law.q, size=n) / law.a
