"""Time-average functionals, Lyapunov slopes, occupation histograms, and the
total-variation proxy used to probe the ergodic claims numerically."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import threshold
from .errors import (
    GridMismatchError,
    HorizonTooShortError,
    UnknownFunctionalError,
)
from .model import ModelParams
from .simulate import Trajectory

MIN_LYAPUNOV_HORIZON = 100.0


def _functional(traj: Trajectory, f: Union[str, Callable]) -> np.ndarray:
    """Evaluate a functional identifier on the recorded populations.

    Built-ins: "x^p", "y^p", "response" (c2 x / (m1 + m2 x + m3 y)), and
    "box:x0,x1,y0,y1" (indicator).  A callable receives (x, y) arrays.
    """
    one_d = traj.log_states.shape[1] == 1
    x = np.exp(traj.log_states[:, 0])
    y = None if one_d else np.exp(traj.log_states[:, 1])

    if callable(f):
        return np.asarray(f(x, y), dtype=float)
    if not isinstance(f, str):
        raise UnknownFunctionalError(f"unsupported functional spec: {f!r}")

    name = f.strip()
    try:
        if name.startswith("x^"):
            return x ** float(name[2:])
        if name.startswith("y^"):
            if y is None:
                raise UnknownFunctionalError("y-functional on a 1-D trajectory")
            return y ** float(name[2:])
        if name == "response":
            p = traj.params
            yy = 0.0 if y is None else y
            return p.c2 * x / (p.m1 + p.m2 * x + p.m3 * yy)
        if name.startswith("box:"):
            x0, x1, y0, y1 = (float(s) for s in name[4:].split(","))
            inside = (x >= x0) & (x <= x1)
            if y is not None:
                inside &= (y >= y0) & (y <= y1)
            return inside.astype(float)
    except UnknownFunctionalError:
        raise
    except (ValueError, IndexError) as exc:
        raise UnknownFunctionalError(f"malformed functional {f!r}: {exc}") from exc
    raise UnknownFunctionalError(f"unknown functional {f!r}")


def time_average(traj: Trajectory, f, burn_in: float = 0.0) -> float:
    """Riemann time-average of f over the recorded path.

    Recorded points are equally spaced (dt * thinning), so the average is the
    plain mean after dropping the initial burn_in fraction of the horizon.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    vals = _functional(traj, f)
    start = int(len(vals) * burn_in)
    return float(np.mean(vals[start:]))


def lyapunov_exponent(
    traj: Trajectory,
    component: str = "v",
    min_horizon: float = MIN_LYAPUNOV_HORIZON,
    burn_in: float = 0.5,
) -> float:
    """Exponential growth rate of a log coordinate.

    Least-squares slope of the log-state against time over the final
    (1 - burn_in) fraction of the horizon; regression damps the O(t^{-1/2})
    martingale noise that an endpoint ratio would carry.
    """
    horizon = traj.times[-1] if len(traj) else 0.0
    if horizon < min_horizon:
        raise HorizonTooShortError(
            f"horizon {horizon} below floor {min_horizon}"
        )
    cols = {"u": 0, "v": traj.log_states.shape[1] - 1}
    if component not in cols:
        raise ValueError(f"component must be 'u' or 'v', got {component!r}")
    series = traj.log_states[:, cols[component]]
    start = int(len(series) * burn_in)
    slope, _ = np.polyfit(traj.times[start:], series[start:], 1)
    return float(slope)


@dataclass(frozen=True)
class OccupationHistogram:
    """Time-weighted normalized occupation of a fixed grid.

    1-D histograms carry x-edges only; 2-D carry (x_edges, y_edges).  Points
    beyond the outer edges are clipped into the boundary cells so the weights
    always sum to 1.
    """

    edges: tuple
    counts: np.ndarray
    total_time: float

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def merge(self, other: "OccupationHistogram") -> "OccupationHistogram":
        _check_grids(self, other)
        return OccupationHistogram(
            edges=self.edges,
            counts=self.counts + other.counts,
            total_time=self.total_time + other.total_time,
        )


def _clip_into(vals: np.ndarray, edges: np.ndarray) -> np.ndarray:
    lo, hi = edges[0], edges[-1]
    span = hi - lo
    return np.clip(vals, lo + 1e-12 * span, hi - 1e-12 * span)


def occupation_histogram(traj: Trajectory, edges) -> OccupationHistogram:
    """Histogram of recorded states; edges is an x-edge array (1-D) or an
    (x_edges, y_edges) pair (2-D)."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    step_time = traj.dt * traj.thinning
    x = np.exp(traj.log_states[:, 0])
    if isinstance(edges, (tuple, list)) and len(edges) == 2 and np.ndim(edges[0]) == 1:
        xe = np.asarray(edges[0], dtype=float)
        ye = np.asarray(edges[1], dtype=float)
        _check_edges(xe)
        _check_edges(ye)
        y = np.exp(traj.log_states[:, 1])
        counts, _, _ = np.histogram2d(
            _clip_into(x, xe), _clip_into(y, ye), bins=(xe, ye)
        )
        return OccupationHistogram((xe, ye), counts, len(traj) * step_time)
    xe = np.asarray(edges, dtype=float)
    _check_edges(xe)
    counts, _ = np.histogram(_clip_into(x, xe), bins=xe)
    return OccupationHistogram((xe,), counts.astype(float), len(traj) * step_time)


def _check_edges(e: np.ndarray) -> None:
    if e.ndim != 1 or len(e) < 2 or not np.all(np.diff(e) > 0):
        raise ValueError("edges must be a strictly increasing 1-D array")


def _check_grids(h1: OccupationHistogram, h2: OccupationHistogram) -> None:
    if len(h1.edges) != len(h2.edges) or any(
        e1.shape != e2.shape or not np.array_equal(e1, e2)
        for e1, e2 in zip(h1.edges, h2.edges)
    ):
        raise GridMismatchError("histograms live on different grids")


def tv_proxy(h1: OccupationHistogram, h2: OccupationHistogram) -> float:
    """Half L1 distance between normalized histograms on a common grid."""
    _check_grids(h1, h2)
    return float(0.5 * np.abs(h1.weights - h2.weights).sum())


def ks_statistic(values: np.ndarray, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of `values` and
    a reference CDF (used against the boundary Gamma law)."""
    s = np.sort(np.asarray(values, dtype=float))
    n = len(s)
    ref = cdf(s)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - ref), np.max(ref - lower)))


@dataclass(frozen=True)
class OccupationBoundCheck:
    """Empirical occupation fractions against their theoretical bounds.

    frac_y_ge_hbar should (asymptotically) exceed bound_y_ge_hbar; the two
    tail fractions should fall below their bounds.
    """

    hbar: float
    H: float
    frac_y_ge_hbar: float
    frac_y_ge_H: float
    frac_x_ge_H: float
    bound_y_ge_hbar: Optional[float] = None
    bound_y_ge_H: Optional[float] = None
    bound_x_ge_H: Optional[float] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def occupation_bound_check(
    traj: Trajectory,
    hbar: float,
    H: float,
    p: Optional[ModelParams] = None,
    burn_in: float = 0.0,
) -> OccupationBoundCheck:
    """Report avg 1{y>=hbar}, avg 1{y>=H}, avg 1{x>=H}; with params supplied,
    attach the theoretical bounds (m_bar - hbar)^2 / K_hat_2, K_hat_1 / H,
    K_1 / H."""
    if not 0 < hbar < H:
        raise ValueError(f"need 0 < hbar < H, got hbar={hbar}, H={H}")
    start = int(len(traj) * burn_in)
    x = np.exp(traj.log_states[start:, 0])
    y = np.exp(traj.log_states[start:, 1])
    res = {
        "frac_y_ge_hbar": float(np.mean(y >= hbar)),
        "frac_y_ge_H": float(np.mean(y >= H)),
        "frac_x_ge_H": float(np.mean(x >= H)),
    }
    bounds = {}
    if p is not None:
        k1 = threshold.prey_law(p).mean
        khat1 = threshold.y_moment_bound(p, 1.0)
        khat2 = threshold.y_moment_bound(p, 2.0)
        lam, _ = threshold.lambda_quadrature(p)
        if lam > 0 and khat2 > 0:
            mbar = threshold.permanence_floor(p, lam)
            if hbar < mbar:
                bounds["bound_y_ge_hbar"] = (mbar - hbar) ** 2 / khat2
        bounds["bound_y_ge_H"] = khat1 / H if khat1 > 0 else 0.0
        bounds["bound_x_ge_H"] = k1 / H
    return OccupationBoundCheck(hbar=hbar, H=H, **res, **bounds)
