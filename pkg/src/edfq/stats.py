"""Steady-state inference and heavy-traffic relation checks.

Batch-means confidence intervals summarize the kernel tallies; the
relation checks quantify, on a finite trajectory, how closely the
workload, queue length, frontier and lead-time profile track the
diffusion-limit picture.  Each check returns a raw discrepancy that the
caller normalizes by the heavy-traffic scale, so convergence shows up as
the number shrinking along a sequence of systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as _sps

from .diffusion import LeadProfile
from .measures import AtomicMeasure
from .kernels import RunSummary


class StatsError(ValueError):
    """Raised on invalid statistics inputs."""


@dataclass(frozen=True)
class SteadyEstimate:
    """A batch-means point estimate with a symmetric t-interval."""

    mean: float
    half_width: float
    n_batches: int
    confidence: float

    @property
    def lo(self) -> float:
        return self.mean - self.half_width

    @property
    def hi(self) -> float:
        return self.mean + self.half_width

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def relative_error_to(self, value: float) -> float:
        if value == 0:
            raise StatsError("relative error needs a nonzero target")
        return abs(self.mean - value) / abs(value)


def batch_mean_ci(values, confidence: float = 0.95) -> SteadyEstimate:
    """Student-t interval over per-batch values (NaN batches dropped)."""
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) < 2:
        raise StatsError("need at least two batches")
    if not 0 < confidence < 1:
        raise StatsError("confidence must be in (0, 1)")
    m = float(x.mean())
    se = float(x.std(ddof=1)) / math.sqrt(len(x))
    t = float(_sps.t.ppf(0.5 + confidence / 2, len(x) - 1))
    return SteadyEstimate(mean=m, half_width=t * se, n_batches=len(x),
                          confidence=confidence)


def long_run_fractions(summary: RunSummary,
                       confidence: float = 0.95) -> dict:
    """Batch-means estimates for every fraction a kernel run tallies."""
    out = {}
    if summary.reneging:
        out["removed_work"] = batch_mean_ci(summary.ratio_removed_work(),
                                            confidence)
        out["removed_customers"] = batch_mean_ci(
            summary.ratio_removed_customers(), confidence)
    else:
        out["late_work"] = batch_mean_ci(summary.ratio_late_work(),
                                         confidence)
        out["late_finisher_work"] = batch_mean_ci(
            summary.ratio_late_finisher_work(), confidence)
        out["late_customers"] = batch_mean_ci(summary.ratio_late_customers(),
                                              confidence)
    return out


# -- diffusion-scale path views -------------------------------------------------


@dataclass(frozen=True)
class ScaledPath:
    """A path in diffusion coordinates: time / n, space / sqrt(n)."""

    times: np.ndarray
    values: np.ndarray
    n: float

    def at(self, t_hat: float) -> float:
        return float(np.interp(t_hat, self.times, self.values))


def scale_path(times, values, n: float) -> ScaledPath:
    if n <= 0:
        raise StatsError("scale index must be positive")
    return ScaledPath(times=np.asarray(times, dtype=float) / n,
                      values=np.asarray(values, dtype=float) / math.sqrt(n),
                      n=n)


# -- finite-system checks against the limit picture -----------------------------


def _samples(traj):
    if not traj.samples:
        raise StatsError("trajectory has no sample points; pass "
                         "sample_times= to simulate()")
    return traj.samples


def frontier_relation_check(traj, profile: LeadProfile,
                            busy_only: bool = True) -> float:
    """sup over samples of |profile(frontier) - workload|.

    Under heavy traffic the workload is glued to the profile evaluated at
    the deadline frontier; the supremum, divided by sqrt(n), vanishes
    along a diffusion-scaled sequence.  Idle instants are skipped by
    default (the relation concerns the busy system).
    """
    worst = 0.0
    for s in _samples(traj):
        w = float(s.work)
        if busy_only and w <= 0:
            continue
        h = float(profile.value(float(s.frontier)))
        worst = max(worst, abs(h - w))
    return worst


def lead_profile_check(traj, profile: LeadProfile,
                       y_grid: Optional[np.ndarray] = None) -> float:
    """Time-averaged L1 gap between the lead-mass tails and the profile.

    For each sampled instant, compares the workload mass with lead above y
    to profile(max(y, frontier)) over a grid of y values, averaging the
    absolute gap over the grid and then over time.
    """
    if y_grid is None:
        y_grid = np.linspace(0.0, float(profile.y_hi), 65)
    samples = _samples(traj)
    if any(s.atoms is None for s in samples):
        raise StatsError("samples carry no measures; rerun simulate() with "
                         "record_measures=True")
    acc = 0.0
    for s in samples:
        m = AtomicMeasure(s.atoms)
        total = m.total()
        f = float(s.frontier)
        gaps = [abs(float(total - m.mass_below(y))
                    - float(profile.value(max(y, f))))
                for y in y_grid]
        acc += float(np.mean(gaps))
    return acc / len(samples)


@dataclass(frozen=True)
class CollapseCheck:
    """Scaled state-space-collapse discrepancies of one trajectory."""

    frontier_median: float  # median |profile(frontier) - work|, scaled units
    profile_mean: float     # time-avg L1 gap of lead-mass tails, scaled units
    n_samples: int


def collapse_check(traj, base_profile: LeadProfile, scale: float,
                   y_grid: Optional[np.ndarray] = None) -> CollapseCheck:
    """Measure how tightly a scaled trajectory sits on the profile manifold.

    ``scale`` is the square root of the sequence index: workloads, masses,
    frontiers and atom locations are divided by it, then compared against
    ``base_profile`` (work units: rate = arrival rate * mean service, built
    from the unscaled lead distribution).  Both returned discrepancies
    shrink along a sequence of systems whose lead times grow like ``scale``
    while the traffic intensity approaches one.
    """
    if scale <= 0:
        raise StatsError("scale must be positive")
    if y_grid is None:
        y_grid = np.linspace(0.0, float(base_profile.y_hi), 33)
    samples = _samples(traj)
    if any(s.atoms is None for s in samples):
        raise StatsError("samples carry no measures; rerun simulate() with "
                         "record_measures=True")
    fr_gaps = []
    acc = 0.0
    used = 0
    for s in samples:
        w = float(s.work) / scale
        if w > 0:
            f = float(s.frontier) / scale
            fr_gaps.append(abs(float(base_profile.value(f)) - w))
        if not s.atoms:
            continue
        m = AtomicMeasure([(float(loc) / scale, float(mass) / scale)
                           for loc, mass in s.atoms])
        total = m.total()
        f = max(float(s.frontier) / scale, 0.0)
        gaps = [abs(float(total - m.mass_below(y))
                    - float(base_profile.value(max(y, f))))
                for y in y_grid]
        acc += float(np.mean(gaps))
        used += 1
    if not fr_gaps or not used:
        raise StatsError("trajectory is idle at every sample point")
    return CollapseCheck(frontier_median=float(np.median(fr_gaps)),
                         profile_mean=acc / used,
                         n_samples=len(samples))


def queue_work_proportionality(traj, mean_service: float) -> float:
    """Least-squares slope of queue length against workload, through zero.

    In the limit the queue is the workload divided by the mean service
    time; returns |slope * mean_service - 1| as the discrepancy.
    """
    if mean_service <= 0:
        raise StatsError("mean service must be positive")
    qs = np.array([float(s.queue) for s in _samples(traj)])
    ws = np.array([float(s.work) for s in _samples(traj)])
    denom = float(np.dot(ws, ws))
    if denom == 0:
        raise StatsError("trajectory never accumulates work")
    slope = float(np.dot(qs, ws)) / denom
    return abs(slope * mean_service - 1.0)


def removed_work_rate_check(traj, predicted_rate: float) -> float:
    """Relative gap between the removal rate on a trajectory and a theory.

    The trajectory's cumulative removed work over its final time is the
    empirical upper-boundary outflow; ``predicted_rate`` is typically
    arrival rate * mean service * predicted lost-work fraction.
    """
    tot = traj.totals()
    t = float(tot["final_time"])
    if t <= 0 or predicted_rate <= 0:
        raise StatsError("need positive horizon and predicted rate")
    return abs(float(tot["reneged_work"]) / t - predicted_rate) \
        / predicted_rate
