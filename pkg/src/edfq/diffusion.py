"""Heavy-traffic diffusion toolkit: reflected Brownian motion on a strip.

In the heavy-traffic regime the reneging workload behaves like Brownian
motion with drift ``-gamma`` and variance ``sigma2`` doubly reflected on
``[0, h0]``: the lower barrier is the idle server, the upper barrier is
the deadline cap, and the upper regulator accumulates exactly the work
lost to reneging.  This module provides the reflection maps (incremental
and, as a slow oracle, the explicit sup-inf formula), exact stationary
quantities (boundary outflow rates and the truncated-exponential law),
Monte-Carlo estimators for them, and the lead-time profile linking the
workload to the deadline frontier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import _two_sided_path, _two_sided_tallies
from .primitives import LeadTimeSpec


class DiffusionError(ValueError):
    """Raised on invalid diffusion-toolkit inputs."""


@dataclass(frozen=True)
class PathGrid:
    """Uniform time grid on [0, t_end] with step dt."""

    t_end: float
    dt: float

    def __post_init__(self):
        if self.t_end <= 0 or self.dt <= 0 or self.dt > self.t_end:
            raise DiffusionError("need 0 < dt <= t_end")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.n_steps * self.dt, self.n_steps + 1)


def simulate_bm(grid: PathGrid, drift: float, sigma2: float,
                rng: np.random.Generator, x0: float = 0.0) -> np.ndarray:
    """One Brownian path with the given drift and variance on the grid."""
    if sigma2 <= 0:
        raise DiffusionError("sigma2 must be positive")
    inc = rng.normal(drift * grid.dt, math.sqrt(sigma2 * grid.dt),
                     grid.n_steps)
    out = np.empty(grid.n_steps + 1)
    out[0] = x0
    np.cumsum(inc, out=out[1:])
    out[1:] += x0
    return out


# -- reflection maps ------------------------------------------------------------


def reflect_one_sided(path: np.ndarray):
    """Reflection at zero: returns (reflected path, lower regulator)."""
    path = np.asarray(path, dtype=float)
    low = np.minimum.accumulate(np.minimum(path, 0.0))
    return path - low, -low


def reflect_two_sided(path: np.ndarray, h0: float):
    """Reflection on [0, h0]: returns (path, lower regulator, upper).

    The lower regulator grows only while the reflected path sits at 0 and
    the upper only at h0; the reflected path is path[0] (projected into
    the strip) plus the raw increments plus lower minus upper.
    """
    if h0 <= 0:
        raise DiffusionError("h0 must be positive")
    path = np.ascontiguousarray(path, dtype=float)
    if len(path) == 0:
        raise DiffusionError("empty path")
    z, up, dn = _two_sided_path(np.diff(path), path[0], h0)
    return z, up, dn


def reflect_two_sided_direct(path: np.ndarray, h0: float) -> np.ndarray:
    """Explicit sup-inf formula for the strip reflection (quadratic time).

    z(t) = p(t) - max( [p(0)-h0]+ ^ inf_{u<=t} p(u),
                       sup_{s<=t} [ (p(s)-h0) ^ inf_{s<=u<=t} p(u) ] )

    Kept as an independent oracle for the incremental scan.
    """
    if h0 <= 0:
        raise DiffusionError("h0 must be positive")
    p = np.asarray(path, dtype=float)
    n = len(p)
    head = max(p[0] - h0, 0.0)
    z = np.empty(n)
    for t in range(n):
        inf_u = p[t]
        best = (p[t] - h0) if (p[t] - h0) < inf_u else inf_u
        for s in range(t - 1, -1, -1):
            if p[s] < inf_u:
                inf_u = p[s]
            cand = (p[s] - h0) if (p[s] - h0) < inf_u else inf_u
            if cand > best:
                best = cand
        first = head if head < inf_u else inf_u
        z[t] = p[t] - (first if first > best else best)
    return z


# -- exact stationary quantities ------------------------------------------------


def renege_rate(gamma: float, sigma2: float, h0: float) -> float:
    """Long-run growth rate of the upper regulator (lost work per time).

    ``gamma`` is the rate at which the free motion drifts DOWN (positive
    under subcritical load); the rate decays like exp(-2*gamma*h0/sigma2)
    as the cap grows.
    """
    if sigma2 <= 0 or h0 <= 0:
        raise DiffusionError("sigma2 and h0 must be positive")
    if gamma == 0:
        return sigma2 / (2 * h0)
    return gamma / math.expm1(2 * gamma * h0 / sigma2)


def idle_rate(gamma: float, sigma2: float, h0: float) -> float:
    """Long-run growth rate of the lower regulator (idleness per time)."""
    return gamma + renege_rate(gamma, sigma2, h0)


@dataclass(frozen=True)
class StationaryLaw:
    """Stationary law of the strip-reflected motion: truncated exponential.

    Density proportional to exp(-2*gamma*x/sigma2) on [0, h0]; uniform
    when gamma == 0.
    """

    gamma: float
    sigma2: float
    h0: float

    @property
    def slope(self) -> float:
        return 2 * self.gamma / self.sigma2

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        th = self.slope
        if th == 0:
            val = np.full_like(x, 1.0 / self.h0)
        else:
            val = th * np.exp(-th * x) / (-math.expm1(-th * self.h0))
        return np.where((x >= 0) & (x <= self.h0), val, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        th = self.slope
        xx = np.clip(x, 0.0, self.h0)
        if th == 0:
            val = xx / self.h0
        else:
            val = np.expm1(-th * xx) / math.expm1(-th * self.h0)
        return np.where(x < 0, 0.0, np.where(x > self.h0, 1.0, val))

    @property
    def mean(self) -> float:
        th = self.slope
        if th == 0:
            return self.h0 / 2
        e = -math.expm1(-th * self.h0)
        return 1 / th - self.h0 * math.exp(-th * self.h0) / e


def stationary_density(gamma: float, sigma2: float, h0: float) -> StationaryLaw:
    if sigma2 <= 0 or h0 <= 0:
        raise DiffusionError("sigma2 and h0 must be positive")
    return StationaryLaw(gamma=gamma, sigma2=sigma2, h0=h0)


# -- Monte-Carlo estimators -----------------------------------------------------

# -zeta(1/2)/sqrt(2*pi).  Discrete reflection misses sub-step excursions,
# which acts like moving each barrier outward by this multiple of
# sigma*sqrt(dt); reflecting at barriers shifted inward by the same amount
# cancels the sqrt(dt) bias of the Euler scan.
_EULER_SHIFT = 0.5825971579390107


@dataclass
class BoundaryRatesMC:
    """Monte-Carlo boundary-rate estimates across independent paths."""

    upper_rates: np.ndarray
    lower_rates: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray
    window: float

    @property
    def upper_mean(self) -> float:
        return float(self.upper_rates.mean())

    @property
    def lower_mean(self) -> float:
        return float(self.lower_rates.mean())

    def upper_ci(self, z: float = 1.96):
        m = self.upper_rates.mean()
        hw = z * self.upper_rates.std(ddof=1) / math.sqrt(
            len(self.upper_rates))
        return float(m - hw), float(m + hw)

    def occupation_cdf(self) -> np.ndarray:
        c = np.cumsum(self.histogram)
        return c / c[-1]

    def ks_against(self, law: StationaryLaw) -> float:
        emp = self.occupation_cdf()
        theor = law.cdf(self.bin_edges[1:])
        return float(np.max(np.abs(emp - theor)))


def boundary_rates_mc(gamma: float, sigma2: float, h0: float,
                      grid: PathGrid, n_paths: int = 100, seed: int = 0,
                      warmup_frac: float = 0.05, nbins: int = 200,
                      shift_correction: bool = True) -> BoundaryRatesMC:
    """Estimate both boundary rates and the occupation law by Euler scans.

    Each path uses an independent generator; tallies skip the first
    ``warmup_frac`` of the steps.  By default the walk is reflected at
    barriers shifted inward by ``_EULER_SHIFT * sigma * sqrt(dt)``, which
    cancels the first-order discretization bias of discrete reflection;
    with ``shift_correction=False`` the raw scan biases both rates low at
    the sqrt(dt) scale.
    """
    if n_paths < 2:
        raise DiffusionError("need at least two paths")
    beta = _EULER_SHIFT * math.sqrt(sigma2 * grid.dt) if shift_correction \
        else 0.0
    if 2 * beta >= h0:
        raise DiffusionError("step size too coarse for the barrier gap")
    h_eff = h0 - 2 * beta
    n = grid.n_steps
    w0 = int(warmup_frac * n)
    window = (n - w0) * grid.dt
    ss = np.random.SeedSequence(seed)
    ups = np.empty(n_paths)
    dns = np.empty(n_paths)
    hist = np.zeros(nbins)
    for j, child in enumerate(ss.spawn(n_paths)):
        rng = np.random.Generator(np.random.PCG64(child))
        inc = rng.normal(-gamma * grid.dt, math.sqrt(sigma2 * grid.dt), n)
        _, ku, kd, h = _two_sided_tallies(inc, h0 / 2 - beta, h_eff, w0,
                                          nbins)
        ups[j] = kd / window
        dns[j] = ku / window
        hist += h
    edges = beta + np.linspace(0.0, h_eff, nbins + 1)
    return BoundaryRatesMC(upper_rates=ups, lower_rates=dns,
                           histogram=hist, bin_edges=edges, window=window)


# -- lead-time profile ----------------------------------------------------------


class LeadProfile:
    """Tail-integral profile of the lead-time law at a given arrival rate.

    value(y) = lam * integral_y^(y_hi) (1 - G(u)) du for y in the support,
    extended linearly (slope -lam) below it and zero above.  Under heavy
    traffic the workload tracks value(frontier), which makes the inverse
    the predicted frontier at a given workload.
    """

    def __init__(self, lead: LeadTimeSpec, lam: float):
        if lam <= 0:
            raise DiffusionError("arrival rate must be positive")
        self.lead = lead
        self.lam = lam
        self.y_lo = float(lead.y_lo)
        self.y_hi = float(lead.y_hi)

    def value(self, y):
        y = np.asarray(y, dtype=float)
        lam = self.lam
        d = self.lead.dist
        if d.family == "uniform":
            a, b = self.y_lo, self.y_hi
            core = lam * (b - y) ** 2 / (2 * (b - a))
            below = lam * (d.mean - y)
            out = np.where(y < a, below, core)
        elif d.family == "deterministic":
            out = lam * (self.y_hi - y)
        else:  # pragma: no cover - LeadTimeSpec admits only bounded laws
            from scipy.integrate import quad
            out = np.array([
                lam * quad(lambda u: 1 - d.cdf(u), yy, self.y_hi)[0]
                if yy >= self.y_lo else
                lam * (d.mean - yy)
                for yy in np.atleast_1d(y)])
        return np.maximum(np.where(y >= self.y_hi, 0.0, out), 0.0)

    def inverse(self, w):
        """Frontier level at which the profile equals the workload w."""
        w = np.asarray(w, dtype=float)
        lam = self.lam
        d = self.lead.dist
        w_lo = float(self.value(self.y_lo))
        if d.family == "uniform":
            a, b = self.y_lo, self.y_hi
            core = b - np.sqrt(np.maximum(2 * w * (b - a) / lam, 0.0))
            below = d.mean - w / lam
            out = np.where(w <= w_lo, core, below)
        elif d.family == "deterministic":
            out = self.y_hi - w / lam
        else:  # pragma: no cover
            from scipy.optimize import brentq
            def solve(ww):
                if ww <= 0:
                    return self.y_hi
                if ww >= w_lo:
                    return float(d.mean - ww / lam)
                return brentq(lambda y: float(self.value(y)) - ww,
                              self.y_lo, self.y_hi)
            out = np.array([solve(ww) for ww in np.atleast_1d(w)])
        return np.where(w <= 0, self.y_hi, out)


def frontier_from_workload(profile: LeadProfile, w):
    """Predicted deadline frontier for a workload level (or array)."""
    return profile.inverse(w)
