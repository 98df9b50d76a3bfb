"""The extinction/permanence threshold and literature-comparison conditions.

The threshold is

    lambda = -a2 - beta^2/2 + E[ c2 X / (m1 + m2 X) ],   X ~ Gamma(q, a)

with Gamma(q, a) the stationary law of the prey-only boundary process.  Its
sign separates predator extinction (lambda < 0) from coexistence with a
unique invariant measure (lambda > 0).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.stats import gamma as gamma_dist

from . import boundary
from .boundary import DegeneratesToZero, GammaLaw
from .errors import (
    GridTooLargeError,
    NonPositiveLambdaError,
    RegimePreconditionError,
    ToleranceNotMetError,
)
from .model import DEFAULT_EPS_CRITICAL, ModelParams, Regime

DEFAULT_QUAD_TOL = 1e-8
SWEEP_CELL_CAP = 10_000_000


def prey_law(p: ModelParams) -> GammaLaw:
    """Stationary Gamma law of the prey boundary process; requires a1 > alpha^2/2."""
    law = boundary.from_logistic(p.a1, p.b1, p.alpha)
    if isinstance(law, DegeneratesToZero):
        raise RegimePreconditionError(
            f"a1 = {p.a1} <= alpha^2/2 = {0.5 * p.alpha**2}: both species die out"
        )
    return law


def predator_dominating_law(p: ModelParams):
    """Stationary law of the dominating process psi (growth -a2 + c2/m2).

    May legitimately be DegeneratesToZero, in which case the y-moment bounds
    are vacuous (y -> 0 pathwise).
    """
    return boundary.from_logistic(-p.a2 + p.c2 / p.m2, p.b2, p.beta)


def y_moment_bound(p: ModelParams, order: float) -> float:
    """K_hat_p: the time-average bound for y^p, realized via the psi law.

    Returns +inf only never; DegeneratesToZero yields 0 (y -> 0, bound vacuous).
    """
    law = predator_dominating_law(p)
    if isinstance(law, DegeneratesToZero):
        return 0.0
    return boundary.moment(law, order)


def _response_mean(p: ModelParams, tol: float):
    """(E[c2 X/(m1+m2 X)], error estimate) for X ~ prey_law(p).

    Uses the reduction x/(m1+m2x) = (1/m2)(1 - m1/(m1+m2x)), so only the
    bounded monotone integrand 1/(m1+m2x) is integrated (adaptive
    Gauss-Kronrod on (0, xmax), gamma tail mass below xmax's share of tol).
    """
    law = prey_law(p)
    scale = p.c2 * p.m1 / p.m2  # lambda error = scale * (error of E[1/(m1+m2X)])
    # tail of the reduced integral contributes at most (c2/m2) * tailmass
    tail_mass = min(1e-12, tol * p.m2 / (10.0 * p.c2))
    xmax = float(gamma_dist.isf(tail_mass, law.q, scale=1.0 / law.a))
    epsabs = tol / (4.0 * scale) if scale > 0 else 1e-12

    lognc = law.log_norm_const

    def integrand(x):
        return math.exp(lognc + (law.q - 1.0) * math.log(x) - law.a * x) / (
            p.m1 + p.m2 * x
        )

    mode = max((law.q - 1.0) / law.a, xmax * 1e-6)
    val, abserr = integrate.quad(
        integrand, 0.0, xmax, epsabs=epsabs, epsrel=1e-12, limit=400,
        points=[mode, min(10.0 * mode, xmax)],
    )
    total_err = scale * abserr + (p.c2 / p.m2) * tail_mass
    if total_err > tol:
        raise ToleranceNotMetError(
            f"quadrature error {total_err:.3e} exceeds requested tol {tol:.3e}"
        )
    mean_resp = (p.c2 / p.m2) * (1.0 - p.m1 * val)
    return mean_resp, total_err


def response_integral(p: ModelParams, tol: float = DEFAULT_QUAD_TOL) -> float:
    """E[c2 X/(m1+m2 X)] over the prey stationary law (always < c2/m2)."""
    return _response_mean(p, tol)[0]


def lambda_quadrature(p: ModelParams, tol: float = DEFAULT_QUAD_TOL):
    """(lambda, error estimate) by adaptive quadrature against the prey law."""
    mean_resp, err = _response_mean(p, tol)
    return mean_resp - p.a2 - 0.5 * p.beta**2, err


def lambda_mc(p: ModelParams, n: int, seed):
    """(Monte Carlo estimate of lambda, standard error) from n Gamma draws."""
    if n < 1000:
        raise ValueError(f"n = {n} too small for a meaningful estimate")
    law = prey_law(p)
    x = boundary.sample(law, n, seed)
    vals = p.c2 * x / (p.m1 + p.m2 * x)
    est = float(np.mean(vals)) - p.a2 - 0.5 * p.beta**2
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    return est, se


def classify(
    p: ModelParams,
    eps_critical: float = DEFAULT_EPS_CRITICAL,
    tol: float = DEFAULT_QUAD_TOL,
) -> Regime:
    """Regime by the sign of lambda against the critical band +-eps_critical."""
    if p.a1 <= 0.5 * p.alpha**2:
        return Regime.BOTH_EXTINCT
    lam, _ = lambda_quadrature(p, tol)
    if lam > eps_critical:
        return Regime.COEXISTENCE
    if lam < -eps_critical:
        return Regime.PREDATOR_EXTINCT
    return Regime.CRITICAL


def jensen_bound(p: ModelParams) -> float:
    """Upper bound on lambda from Jensen: -a2 - beta^2/2 + c2 K1/(m1 + m2 K1)."""
    k1 = prey_law(p).mean
    return -p.a2 - 0.5 * p.beta**2 + p.c2 * k1 / (p.m1 + p.m2 * k1)


def permanence_floor(p: ModelParams, lam: float) -> float:
    """m_bar: the lower bound on the time-average of y when lambda > 0."""
    if not lam > 0:
        raise NonPositiveLambdaError(f"lambda = {lam} must be > 0")
    num = p.b1 * p.m1**2 * p.m2 * lam
    den = (
        p.c1 * p.c2 * p.m2
        + p.b1 * p.c2 * p.m1 * p.m3
        + p.b1 * p.b2 * p.m1**2 * p.m2
    )
    return num / den


# ---------------------------------------------------------------------------
# deterministic equilibrium and literature conditions
# ---------------------------------------------------------------------------

def _interior_residual(p: ModelParams, x: float, y: float):
    d = p.m1 + p.m2 * x + p.m3 * y
    return np.array(
        [p.a1 - p.b1 * x - p.c1 * y / d, -p.a2 - p.b2 * y + p.c2 * x / d]
    )


def _interior_jacobian(p: ModelParams, x: float, y: float):
    d = p.m1 + p.m2 * x + p.m3 * y
    d2 = d * d
    return np.array(
        [
            [-p.b1 + p.c1 * y * p.m2 / d2, -p.c1 * (p.m1 + p.m2 * x) / d2],
            [p.c2 * (p.m1 + p.m3 * y) / d2, -p.b2 - p.c2 * x * p.m3 / d2],
        ]
    )


def deterministic_equilibrium(
    p: ModelParams, residual_tol: float = 1e-10
) -> Optional[tuple]:
    """Interior equilibrium of the noise-free system, or None.

    Damped Newton from a 4x4 log-grid multistart over the box
    [1e-8, 10*max(K1, 1)]^2 (K1 falls back to a1/b1 when noise kills the
    prey law).  A root is accepted only with residual norm <= residual_tol.
    """
    if p.a1 > 0.5 * p.alpha**2:
        k1 = (p.a1 - 0.5 * p.alpha**2) / p.b1
    else:
        k1 = p.a1 / p.b1
    hi = 10.0 * max(k1, 1.0)
    lo = 1e-8
    starts = np.exp(np.linspace(math.log(lo), math.log(hi), 4))
    best = None
    for x0, y0 in itertools.product(starts, starts):
        x, y = float(x0), float(y0)
        f = _interior_residual(p, x, y)
        for _ in range(60):
            try:
                step = np.linalg.solve(_interior_jacobian(p, x, y), -f)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            improved = False
            for _ in range(40):
                xn, yn = x + t * step[0], y + t * step[1]
                if lo <= xn <= hi and lo <= yn <= hi:
                    fn = _interior_residual(p, xn, yn)
                    if np.linalg.norm(fn) < np.linalg.norm(f):
                        x, y, f = xn, yn, fn
                        improved = True
                        break
                t *= 0.5
            if not improved:
                break
            if np.linalg.norm(f) <= residual_tol:
                break
        if np.linalg.norm(f) <= residual_tol and x > 0 and y > 0:
            if best is None or np.linalg.norm(f) < best[2]:
                best = (x, y, np.linalg.norm(f))
    if best is None:
        return None
    return best[0], best[1]


def ji_condition(p: ModelParams) -> str:
    """Stationarity condition of the Lyapunov-function literature criterion.

    Returns 'yes', 'no', or 'no-equilibrium' (when the deterministic system
    has no interior equilibrium to anchor the condition).
    """
    eq = deterministic_equilibrium(p)
    if eq is None:
        return "no-equilibrium"
    xs, ys = eq
    cond1 = (p.c2 - p.a2 * p.m2) * p.a1 / p.b1 > p.a2 * p.m1
    cond2 = p.b1 > p.a1 * p.m2 / (p.m1 + p.m2 * xs)
    delta = p.c2 * xs * p.alpha**2 / 2 + p.c1 * ys * p.beta**2 / 2
    clause_a = (
        p.c2
        * (p.b1 - p.m2 * (p.a1 - p.b1 * xs) / p.m1)
        * (p.m1 + p.m3 * ys)
        * xs**2
    )
    clause_b = p.b2 * p.c1 * (p.m1 + p.m2 * xs) * ys**2
    cond3 = delta < min(clause_a, clause_b)
    return "yes" if (cond1 and cond2 and cond3) else "no"


@dataclass(frozen=True)
class LwFlags:
    """Holling-type-II (m1=m2=1, m3=0) literature flags.

    The extinction inequality is transcribed as printed (c2 + a2 - beta^2/2
    < 0); extinct_sign_corrected evaluates the plausible intended variant
    c2 - a2 - beta^2/2 < 0 alongside it.
    """

    applicable: bool
    extinct: Optional[bool] = None
    persist: Optional[bool] = None
    extinct_sign_corrected: Optional[bool] = None


def lw_condition(p: ModelParams) -> LwFlags:
    if not (p.m1 == 1.0 and p.m2 == 1.0 and p.m3 == 0.0):
        return LwFlags(applicable=False)
    prey_ok = p.a1 - 0.5 * p.alpha**2 > 0
    extinct = prey_ok and (p.c2 + p.a2 - 0.5 * p.beta**2 < 0)
    extinct_alt = prey_ok and (p.c2 - p.a2 - 0.5 * p.beta**2 < 0)
    persist = (
        prey_ok
        and (p.a2 - 0.5 * p.beta**2 > 0)
        and ((p.a1 - 0.5 * p.alpha**2) / p.c1 > (p.c2 + p.a2 - 0.5 * p.beta**2) / p.b2)
    )
    return LwFlags(
        applicable=True,
        extinct=extinct,
        persist=persist,
        extinct_sign_corrected=extinct_alt,
    )


# ---------------------------------------------------------------------------
# full report and parameter sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdReport:
    regime: Regime
    lam: Optional[float]
    quadrature_error: Optional[float]
    response_integral: Optional[float]
    jensen: Optional[float]
    permanence: Optional[float]
    ji: str
    lw: LwFlags

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "lambda": self.lam,
            "quadrature_error": self.quadrature_error,
            "response_integral": self.response_integral,
            "jensen_bound": self.jensen,
            "permanence_floor": self.permanence,
            "ji_condition": self.ji,
            "lw_applicable": self.lw.applicable,
            "lw_extinct": self.lw.extinct,
            "lw_persist": self.lw.persist,
            "lw_extinct_sign_corrected": self.lw.extinct_sign_corrected,
        }


def threshold_report(
    p: ModelParams,
    tol: float = DEFAULT_QUAD_TOL,
    eps_critical: float = DEFAULT_EPS_CRITICAL,
) -> ThresholdReport:
    ji = ji_condition(p)
    lw = lw_condition(p)
    if p.a1 <= 0.5 * p.alpha**2:
        return ThresholdReport(
            regime=Regime.BOTH_EXTINCT,
            lam=None,
            quadrature_error=None,
            response_integral=None,
            jensen=None,
            permanence=None,
            ji=ji,
            lw=lw,
        )
    lam, err = lambda_quadrature(p, tol)
    regime = classify(p, eps_critical, tol)
    floor = permanence_floor(p, lam) if lam > 0 else None
    return ThresholdReport(
        regime=regime,
        lam=lam,
        quadrature_error=err,
        response_integral=lam + p.a2 + 0.5 * p.beta**2,
        jensen=jensen_bound(p),
        permanence=floor,
        ji=ji,
        lw=lw,
    )


def sweep(
    p: ModelParams,
    axes: dict,
    eps_critical: float = DEFAULT_EPS_CRITICAL,
    tol: float = DEFAULT_QUAD_TOL,
    cell_cap: int = SWEEP_CELL_CAP,
):
    """Evaluate the threshold report over a cartesian grid of coefficients.

    axes maps coefficient name -> sequence of values; all other coefficients
    stay at their values in p.  Returns (rows, summary) where each row holds
    the grid point and its report fields, in grid order.
    """
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValueError("sweep grid must be nonempty on every axis")
    names = list(axes)
    sizes = [len(axes[n]) for n in names]
    total = math.prod(sizes)
    if total > cell_cap:
        raise GridTooLargeError(f"{total} cells exceeds cap {cell_cap}")

    rows = []
    counts = {"coexist_ji_yes": 0, "coexist_ji_no": 0, "extinct": 0, "critical": 0}
    for combo in itertools.product(*(axes[n] for n in names)):
        point = p.with_(**dict(zip(names, combo)))
        rep = threshold_report(point, tol, eps_critical)
        row = dict(zip(names, (float(c) for c in combo)))
        row.update(rep.as_dict())
        rows.append(row)
        if rep.regime is Regime.COEXISTENCE:
            counts["coexist_ji_yes" if rep.ji == "yes" else "coexist_ji_no"] += 1
        elif rep.regime is Regime.CRITICAL:
            counts["critical"] += 1
        else:
            counts["extinct"] += 1
    return rows, counts
