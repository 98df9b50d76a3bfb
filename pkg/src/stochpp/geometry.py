"""Degenerate-case (shared noise) geometric analysis.

Three ingredients:

* the control-system functions g(u, z) and h(u, z) in the sheared coordinate
  z = v - (beta/alpha) u, whose sign structure determines the invariant
  control set;
* the critical offset c*: the smallest root of z -> sup_u h(u, z), so that
  the half-plane {v - (beta/alpha) u <= c*} is invariant (full plane when
  0 < beta < alpha);
* Lie brackets of the drift A and the constant diffusion direction B = (alpha,
  beta), with rank checks at grid points.  Every component of A and of its
  iterated brackets is a rational function N(e^u, e^v) / D^k with
  D = m1 + m2 e^u + m3 e^v, so brackets are assembled exactly by polynomial
  arithmetic on the numerators.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    BracketFailureError,
    DepthExceededError,
    OverflowGuardError,
    ScanInconclusiveError,
)
from .model import LOG_OVERFLOW_GUARD, ModelParams
from .simulate import Trajectory

MAX_BRACKET_DEPTH = 4
SUP_H_START_HALF_WIDTH = 30.0
SUP_H_CAP = 200.0
RANK_SV_THRESHOLD = 1e-10


# ---------------------------------------------------------------------------
# control-system functions g, h and the constant c*
# ---------------------------------------------------------------------------

def _guarded_exp(arg):
    arg = np.asarray(arg, dtype=float)
    if np.any(arg > LOG_OVERFLOW_GUARD):
        raise OverflowGuardError(f"exp argument above {LOG_OVERFLOW_GUARD}")
    return np.exp(arg)


def g_h(p: ModelParams, u, z):
    """(g, h) of the sheared control system at (u, z), z = v - (beta/alpha) u."""
    r = p.beta / p.alpha
    eu = _guarded_exp(u)
    ezru = _guarded_exp(np.asarray(z, dtype=float) + r * np.asarray(u, dtype=float))
    den = p.m1 + p.m2 * eu + p.m3 * ezru
    g = p.a1 - 0.5 * p.alpha**2 - p.b1 * eu - p.c1 * ezru / den
    h = (
        -(p.a2 + 0.5 * p.beta**2 + r * (p.a1 - 0.5 * p.alpha**2))
        - p.b2 * ezru
        + r * p.b1 * eu
        + (p.c2 * eu + r * p.c1 * ezru) / den
    )
    return g, h


def _h_safe(p: ModelParams, u: float, z: float) -> float:
    # -inf stands in for "exponentially below anything representable"
    try:
        return float(g_h(p, u, z)[1])
    except OverflowGuardError:
        return -math.inf


@dataclass(frozen=True)
class SupH:
    value: float
    argmax: Optional[float]
    diverged: bool = False


def sup_h(p: ModelParams, z: float) -> SupH:
    """Supremum of u -> h(u, z), by bracket expansion plus bounded refinement.

    The bracket starts at [-30, 30] and doubles on any side whose endpoint is
    not at least 1 below the interior maximum, capped at |u| = 200.  If an
    endpoint is still competitive at the cap the supremum is flagged as
    divergent (value reported is a lower bound); if the landscape cannot be
    bracketed at all, BracketFailureError is raised.
    """
    if not (p.beta < 0 or p.beta >= p.alpha):
        raise ValueError("sup_h applies to the half-plane cases (beta < 0 or beta >= alpha)")
    lo, hi = -SUP_H_START_HALF_WIDTH, SUP_H_START_HALF_WIDTH
    while True:
        grid = np.linspace(lo, hi, 241)
        vals = np.array([_h_safe(p, float(u), z) for u in grid])
        best_i = int(np.argmax(vals))
        best = vals[best_i]
        if not math.isfinite(best):
            raise BracketFailureError(f"h(., z={z}) not finite anywhere on bracket")
        lo_bad = vals[0] > best - 1.0
        hi_bad = vals[-1] > best - 1.0
        if not lo_bad and not hi_bad:
            break
        at_cap = (lo <= -SUP_H_CAP or not lo_bad) and (hi >= SUP_H_CAP or not hi_bad)
        if at_cap:
            # endpoint stays competitive at the cap: h keeps growing outward
            end_val = max(vals[0] if lo_bad else -math.inf,
                          vals[-1] if hi_bad else -math.inf)
            if end_val >= best - 1e-12:
                return SupH(value=float(end_val), argmax=None, diverged=True)
            break  # endpoint high but below the interior max: refine interior
        if lo_bad:
            lo = max(2.0 * lo, -SUP_H_CAP) if lo < 0 else -SUP_H_CAP
        if hi_bad:
            hi = min(2.0 * hi, SUP_H_CAP) if hi > 0 else SUP_H_CAP
    a = grid[max(best_i - 1, 0)]
    b = grid[min(best_i + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda u: -_h_safe(p, u, z), bounds=(a, b), method="bounded",
        options={"xatol": 1e-10},
    )
    if -res.fun >= best:
        return SupH(value=float(-res.fun), argmax=float(res.x))
    return SupH(value=float(best), argmax=float(grid[best_i]))


def c_star(
    p: ModelParams,
    z_lo: float = -50.0,
    z_hi: float = 50.0,
    tol: float = 1e-6,
    scan_step: float = 0.5,
) -> float:
    """Smallest root of z -> sup_h(p, z) on [z_lo, z_hi]; +inf if positive
    throughout.

    Scans at scan_step, then bisects the first sign change down to width tol
    (returning the upper, non-positive end so h(., c*) <= 0 holds).  Raises
    ScanInconclusiveError when sup_h(z_lo) <= 0 already (with lambda > 0 the
    supremum must be positive for very negative z).
    """
    zs = np.arange(z_lo, z_hi + scan_step / 2, scan_step)
    signs = []
    first_nonpos = None
    for i, z in enumerate(zs):
        pos = sup_h(p, float(z)).value > 0.0
        signs.append(pos)
        if not pos and first_nonpos is None:
            first_nonpos = i
    if not signs[0]:
        raise ScanInconclusiveError(
            f"sup_h already non-positive at z = {z_lo}; check lambda > 0 or widen the scan"
        )
    if first_nonpos is None:
        return math.inf
    if any(signs[first_nonpos:]):
        warnings.warn(
            "sup_h changes sign more than once over the scan window; "
            "reporting the smallest root",
            stacklevel=2,
        )
    lo = float(zs[first_nonpos - 1])
    hi = float(zs[first_nonpos])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sup_h(p, mid).value > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class ControlSetDescriptor:
    """The unique invariant control set: the full plane when 0 < beta < alpha,
    else the half-plane {(u, v): v - slope * u <= c_star}."""

    kind: str  # "full-plane" | "half-plane"
    slope: Optional[float] = None
    c_star: Optional[float] = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "slope": self.slope, "c_star": self.c_star}


def invariant_control_set(p: ModelParams, tol: float = 1e-6) -> ControlSetDescriptor:
    if 0 < p.beta < p.alpha:
        return ControlSetDescriptor(kind="full-plane")
    return ControlSetDescriptor(
        kind="half-plane", slope=p.beta / p.alpha, c_star=c_star(p, tol=tol)
    )


def support_membership(
    traj: Trajectory,
    d: ControlSetDescriptor,
    margin: float = 0.05,
    burn_in: float = 0.0,
) -> float:
    """Fraction of recorded time spent outside the control set by more than
    `margin` (identically 0 for the full-plane case)."""
    if d.kind == "full-plane":
        return 0.0
    start = int(len(traj) * burn_in)
    z = traj.log_states[start:, 1] - d.slope * traj.log_states[start:, 0]
    if math.isinf(d.c_star):
        return 0.0
    return float(np.mean(z > d.c_star + margin))


# ---------------------------------------------------------------------------
# exact rational vector-field algebra for Lie brackets
# ---------------------------------------------------------------------------
# A polynomial in (P, Q) = (e^u, e^v) is a dict {(i, j): coeff}; a field
# component is poly / D^k with D = m1 + m2 P + m3 Q.

def _p_add(p1: dict, p2: dict) -> dict:
    out = dict(p1)
    for key, c in p2.items():
        c2 = out.get(key, 0.0) + c
        if c2 == 0.0:
            out.pop(key, None)
        else:
            out[key] = c2
    return out


def _p_scale(p1: dict, s: float) -> dict:
    if s == 0.0:
        return {}
    return {k: c * s for k, c in p1.items()}


def _p_mul(p1: dict, p2: dict) -> dict:
    out = {}
    for (i1, j1), c1 in p1.items():
        for (i2, j2), c2 in p2.items():
            key = (i1 + i2, j1 + j2)
            c = out.get(key, 0.0) + c1 * c2
            if c == 0.0:
                out.pop(key, None)
            else:
                out[key] = c
    return out


@dataclass(frozen=True)
class RatComponent:
    """poly(P, Q) / D(P, Q)^k."""

    poly: tuple  # sorted tuple of ((i, j), coeff)
    k: int

    @staticmethod
    def make(poly: dict, k: int) -> "RatComponent":
        return RatComponent(tuple(sorted(poly.items())), k)

    def as_dict(self) -> dict:
        return dict(self.poly)


def _denom_poly(p: ModelParams) -> dict:
    return {(0, 0): p.m1, (1, 0): p.m2, (0, 1): p.m3}


def _lift(comp: RatComponent, k: int, d_poly: dict) -> dict:
    """Numerator of comp rewritten over denominator D^k (k >= comp.k)."""
    out = comp.as_dict()
    for _ in range(k - comp.k):
        out = _p_mul(out, d_poly)
    return out


def _c_add(c1: RatComponent, c2: RatComponent, d_poly: dict) -> RatComponent:
    k = max(c1.k, c2.k)
    return RatComponent.make(_p_add(_lift(c1, k, d_poly), _lift(c2, k, d_poly)), k)


def _c_mul(c1: RatComponent, c2: RatComponent) -> RatComponent:
    return RatComponent.make(_p_mul(c1.as_dict(), c2.as_dict()), c1.k + c2.k)


def _c_diff(comp: RatComponent, var: int, d_poly: dict) -> RatComponent:
    """d/du (var=0) or d/dv (var=1).  d/du P^i Q^j = i P^i Q^j and
    d/du D = m2 P, so the quotient rule stays inside the rational class."""
    n = comp.as_dict()
    n_deriv = {key: c * key[var] for key, c in n.items() if key[var] != 0}
    num = _p_mul(n_deriv, d_poly)
    d_coeff = d_poly.get((1, 0) if var == 0 else (0, 1), 0.0)
    if comp.k and d_coeff:
        shift = (1, 0) if var == 0 else (0, 1)
        shifted = {(i + shift[0], j + shift[1]): c for (i, j), c in n.items()}
        num = _p_add(num, _p_scale(shifted, -comp.k * d_coeff))
    return RatComponent.make(num, comp.k + 1)


@dataclass(frozen=True)
class RatField:
    """A vector field on R^2 with rational components in (e^u, e^v)."""

    c1: RatComponent
    c2: RatComponent
    label: str = ""


def drift_field(p: ModelParams) -> RatField:
    d = _denom_poly(p)
    a1_poly = _p_add(
        _p_mul({(0, 0): p.a1 - 0.5 * p.alpha**2, (1, 0): -p.b1}, d), {(0, 1): -p.c1}
    )
    a2_poly = _p_add(
        _p_mul({(0, 0): -p.a2 - 0.5 * p.beta**2, (0, 1): -p.b2}, d), {(1, 0): p.c2}
    )
    return RatField(RatComponent.make(a1_poly, 1), RatComponent.make(a2_poly, 1), "A")


def noise_field(p: ModelParams) -> RatField:
    return RatField(
        RatComponent.make({(0, 0): p.alpha}, 0),
        RatComponent.make({(0, 0): p.beta}, 0),
        "B",
    )


def bracket_fields(p: ModelParams, x: RatField, y: RatField) -> RatField:
    """Exact Lie bracket [X, Y]_i = X . grad(Y_i) - Y . grad(X_i)."""
    d = _denom_poly(p)

    def component(i: int) -> RatComponent:
        yi = y.c1 if i == 0 else y.c2
        xi = x.c1 if i == 0 else x.c2
        terms = [
            _c_mul(x.c1, _c_diff(yi, 0, d)),
            _c_mul(RatComponent.make(_p_scale(y.c1.as_dict(), -1.0), y.c1.k),
                   _c_diff(xi, 0, d)),
            _c_mul(x.c2, _c_diff(yi, 1, d)),
            _c_mul(RatComponent.make(_p_scale(y.c2.as_dict(), -1.0), y.c2.k),
                   _c_diff(xi, 1, d)),
        ]
        out = terms[0]
        for t in terms[1:]:
            out = _c_add(out, t, d)
        return out

    label = f"[{x.label},{y.label}]"
    return RatField(component(0), component(1), label)


def _eval_component(p: ModelParams, comp: RatComponent, u: float, v: float) -> float:
    log_d = math.log(p.m1 + p.m2 * _guarded_exp(u) + p.m3 * _guarded_exp(v))
    total = 0.0
    for (i, j), c in comp.poly:
        arg = i * u + j * v - comp.k * log_d
        if arg > LOG_OVERFLOW_GUARD:
            raise OverflowGuardError("monomial evaluation overflows")
        total += c * math.exp(arg)
    return total


def evaluate_field(p: ModelParams, f: RatField, point) -> np.ndarray:
    u, v = float(point[0]), float(point[1])
    return np.array(
        [_eval_component(p, f.c1, u, v), _eval_component(p, f.c2, u, v)]
    )


FieldExpr = Union[str, tuple]


def _expr_leaves(expr: FieldExpr) -> int:
    if isinstance(expr, str):
        return 1
    return sum(_expr_leaves(e) for e in expr)


def field_from_expr(p: ModelParams, expr: FieldExpr) -> RatField:
    """Build a field from an expression: "A", "B", or a pair (X, Y) meaning
    the bracket [X, Y].  Depth (leaf count) is capped at 4."""
    if _expr_leaves(expr) > MAX_BRACKET_DEPTH:
        raise DepthExceededError(f"bracket depth of {expr!r} exceeds {MAX_BRACKET_DEPTH}")
    return _field_from_expr(p, _freeze(expr))


def _freeze(expr: FieldExpr):
    if isinstance(expr, str):
        if expr not in ("A", "B"):
            raise ValueError(f"unknown field name {expr!r}")
        return expr
    if len(expr) != 2:
        raise ValueError("a bracket expression is a pair (X, Y)")
    return (_freeze(expr[0]), _freeze(expr[1]))


@functools.lru_cache(maxsize=4096)
def _field_from_expr(p: ModelParams, expr) -> RatField:
    if expr == "A":
        return drift_field(p)
    if expr == "B":
        return noise_field(p)
    return bracket_fields(p, _field_from_expr(p, expr[0]), _field_from_expr(p, expr[1]))


def lie_bracket(p: ModelParams, expr_x: FieldExpr, expr_y: FieldExpr, point) -> np.ndarray:
    """Value of [X, Y] at a point, for X, Y drawn from {A, B, brackets}."""
    if _expr_leaves(expr_x) + _expr_leaves(expr_y) > MAX_BRACKET_DEPTH:
        raise DepthExceededError(
            f"bracket of {expr_x!r} and {expr_y!r} exceeds depth {MAX_BRACKET_DEPTH}"
        )
    f = bracket_fields(
        p, field_from_expr(p, expr_x), field_from_expr(p, expr_y)
    )
    return evaluate_field(p, f, point)


def spanning_exprs(depth: int, variant: str = "full"):
    """Bracket expressions spanning the Lie algebra (full variant) or the
    ideal generated by B, up to the given leaf-count depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > MAX_BRACKET_DEPTH:
        raise DepthExceededError(f"depth {depth} exceeds {MAX_BRACKET_DEPTH}")
    if variant not in ("full", "ideal"):
        raise ValueError(f"variant must be 'full' or 'ideal', got {variant!r}")
    exprs = [("A",), ("B",)] if variant == "full" else [("B",)]
    exprs = [e[0] for e in exprs]
    level = list(exprs)
    all_exprs = list(exprs)
    for _ in range(depth - 1):
        nxt = []
        for gen in ("A", "B"):
            for e in level:
                if _expr_leaves(e) + 1 <= depth:
                    candidate = (gen, e)
                    if candidate not in all_exprs:
                        nxt.append(candidate)
                        all_exprs.append(candidate)
        level = nxt
    return all_exprs


def lie_rank(p: ModelParams, point, depth: int = 3, variant: str = "full"):
    """(rank, witness matrix) of the spanning fields evaluated at the point.

    Rank by singular values with threshold 1e-10 * (largest singular value).
    """
    exprs = spanning_exprs(depth, variant)
    rows = [evaluate_field(p, field_from_expr(p, e), point) for e in exprs]
    m = np.vstack(rows)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0, m
    return int(np.sum(sv > RANK_SV_THRESHOLD * sv[0])), m


@dataclass(frozen=True)
class LieRankReport:
    """Per-point ranks on a grid.  A clean pass is evidence at the sampled
    points, not a global verification."""

    points: tuple
    ranks: tuple
    depth: int
    variant: str

    @property
    def deficient_points(self) -> list:
        return [pt for pt, r in zip(self.points, self.ranks) if r < 2]

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "variant": self.variant,
            "points": [list(pt) for pt in self.points],
            "ranks": list(self.ranks),
            "deficient_points": [list(pt) for pt in self.deficient_points],
            "note": "rank evidence at sampled points only",
        }


def verify_hormander(
    p: ModelParams, grid, depth: int = 3, variant: str = "full"
) -> LieRankReport:
    """Evaluate lie_rank at every grid point; grid is an iterable of (u, v)."""
    pts = [tuple(float(c) for c in pt) for pt in grid]
    ranks = [lie_rank(p, pt, depth, variant)[0] for pt in pts]
    return LieRankReport(points=tuple(pts), ranks=tuple(ranks), depth=depth,
                         variant=variant)


def square_grid(lo: float, hi: float, n: int):
    """n x n grid of (u, v) points over [lo, hi]^2, row-major."""
    axis = np.linspace(lo, hi, n)
    return [(float(u), float(v)) for u in axis for v in axis]
