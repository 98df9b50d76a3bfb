"""Model coefficients and the drift/diffusion fields of the predator-prey SDE.

The system is

    dx = x (a1 - b1 x - c1 y / (m1 + m2 x + m3 y)) dt + alpha x dB1
    dy = y (-a2 - b2 y + c2 x / (m1 + m2 x + m3 y)) dt + beta y dB2

with either two independent driving noises or a single shared one.  All
simulation happens in log coordinates (u, v) = (ln x, ln y), where the noise
is additive and positivity is automatic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import OverflowGuardError, ValidationError

# exp() of a log coordinate above this would overflow a double
LOG_OVERFLOW_GUARD = 700.0

DEFAULT_EPS_CRITICAL = 1e-3

_COEFF_NAMES = ("a1", "b1", "c1", "a2", "b2", "c2", "m1", "m2", "m3", "alpha", "beta")


class NoiseMode(enum.Enum):
    INDEPENDENT = "independent"
    SHARED = "shared"


class Regime(enum.Enum):
    BOTH_EXTINCT = "BothExtinct"
    PREDATOR_EXTINCT = "PredatorExtinct"
    COEXISTENCE = "Coexistence"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class ModelParams:
    """The eleven coefficients of the model, canonicalized (alpha > 0)."""

    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float
    m1: float
    m2: float
    m3: float
    alpha: float
    beta: float

    def with_(self, **changes) -> "ModelParams":
        """A copy with some coefficients replaced, re-validated."""
        p = replace(self, **changes)
        return validate([getattr(p, n) for n in _COEFF_NAMES])

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in _COEFF_NAMES}


def validate(raw) -> ModelParams:
    """Check all coefficient constraints; return canonical ModelParams.

    Accepts a sequence in the order (a1, b1, c1, a2, b2, c2, m1, m2, m3,
    alpha, beta) or a mapping with those keys.  alpha is stored as |alpha|
    (the prey noise is symmetric); beta's sign is preserved because the
    degenerate-case control set depends on it.

    Raises ValidationError naming every violated constraint.
    """
    if isinstance(raw, dict):
        extra = set(raw) - set(_COEFF_NAMES)
        missing = set(_COEFF_NAMES) - set(raw)
        if extra or missing:
            probs = []
            if extra:
                probs.append(f"unknown coefficients: {sorted(extra)}")
            if missing:
                probs.append(f"missing coefficients: {sorted(missing)}")
            raise ValidationError(probs)
        vals = [float(raw[n]) for n in _COEFF_NAMES]
    else:
        vals = [float(v) for v in raw]
        if len(vals) != len(_COEFF_NAMES):
            raise ValidationError(
                [f"expected {len(_COEFF_NAMES)} coefficients, got {len(vals)}"]
            )

    named = dict(zip(_COEFF_NAMES, vals))
    violations = []
    for n in ("a1", "b1", "c1", "a2", "b2", "c2", "m1", "m2"):
        if not named[n] > 0:
            violations.append(f"NonPositiveCoefficient: {n} = {named[n]} must be > 0")
    if named["m3"] < 0:
        violations.append(f"NegativeInterference: m3 = {named['m3']} must be >= 0")
    if named["alpha"] == 0:
        violations.append("ZeroNoise: alpha must be nonzero")
    if named["beta"] == 0:
        violations.append("ZeroNoise: beta must be nonzero")
    for n in _COEFF_NAMES:
        if not math.isfinite(named[n]):
            violations.append(f"NonFiniteCoefficient: {n} = {named[n]}")
    if violations:
        raise ValidationError(violations)

    named["alpha"] = abs(named["alpha"])
    return ModelParams(**named)


def response(p: ModelParams, x, y):
    """Functional-response factor x / (m1 + m2 x + m3 y), in [0, 1/m2]."""
    return x / (p.m1 + p.m2 * x + p.m3 * y)


def drift(p: ModelParams, x, y):
    """Population-coordinate drift vector; broadcasts over array inputs."""
    denom = p.m1 + p.m2 * x + p.m3 * y
    fx = x * (p.a1 - p.b1 * x - p.c1 * y / denom)
    fy = y * (-p.a2 - p.b2 * y + p.c2 * x / denom)
    return np.asarray((fx, fy))


def log_drift(p: ModelParams, u, v):
    """Drift A(u, v) of the log-coordinate system (same for both noise modes).

    Raises OverflowGuardError if e^u or e^v would overflow; arbitrarily
    negative log-states are fine (the exponential underflows to zero).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u > LOG_OVERFLOW_GUARD) or np.any(v > LOG_OVERFLOW_GUARD):
        raise OverflowGuardError(f"log-state above {LOG_OVERFLOW_GUARD}")
    eu = np.exp(u)
    ev = np.exp(v)
    denom = p.m1 + p.m2 * eu + p.m3 * ev
    du = p.a1 - 0.5 * p.alpha**2 - p.b1 * eu - p.c1 * ev / denom
    dv = -p.a2 - 0.5 * p.beta**2 - p.b2 * ev + p.c2 * eu / denom
    return np.asarray((du, dv))


def diffusion_matrix(p: ModelParams, mode: NoiseMode) -> np.ndarray:
    """Log-coordinate diffusion: 2x2 diag for independent noise, 2x1 column
    for the shared (rank-1, degenerate) case."""
    if mode is NoiseMode.INDEPENDENT:
        return np.diag([p.alpha, p.beta])
    return np.array([[p.alpha], [p.beta]])
