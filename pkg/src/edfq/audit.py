"""Structural audit battery: every pathwise relation on random corpora.

One audited stream runs the reneging and standard systems, builds the
reference system along both routes, and checks route agreement, every
cross-system inequality, the mass-balance accounts, and the removal
optimality of deadline order against the other service policies.  The
battery aggregates worst violations across a corpus; everything should
sit at rounding noise (identically zero in exact mode).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .primitives import CustomerStream, substreams
from .reference import (check_reference_account, check_reference_positivity,
                        check_standard_policy_free, check_work_account,
                        compare_reference_routes, compare_systems,
                        reference_from_standard, simulate_reference)
from .simulator import PolicyKind, SystemTrajectory, run_policy_suite, simulate


def tie_rich_stream(seed: int, count: int,
                    denominator: int = 1) -> CustomerStream:
    """An exact-arithmetic stream engineered to collide events.

    Gaps, services and leads are small integer multiples of
    ``1/denominator``, so arrivals, completions and deadline expiries
    frequently land on the same instant — the regime where tie-breaking
    rules matter and floating point would blur them.
    """
    gap_rng, svc_rng, lead_rng = substreams(seed, 3)
    den = Fraction(1, denominator)
    gaps = [int(g) * den for g in gap_rng.integers(1, 4, size=count)]
    svcs = [int(v) * den for v in svc_rng.integers(1, 5, size=count)]
    leads = [int(y) * den for y in lead_rng.integers(1, 8, size=count)]
    return CustomerStream(gaps, svcs, leads, exact=True)


def removal_curve(traj: SystemTrajectory):
    """Jump times and post-jump values of cumulative removed work."""
    times, vals = [], []
    last = 0
    for e in traj.events:
        if e.reneged_work != last:
            times.append(e.time)
            vals.append(e.reneged_work)
            last = e.reneged_work
    return times, vals


def _step_at(times, vals, t):
    i = bisect.bisect_right(times, t) - 1
    return vals[i] if i >= 0 else 0


def policy_optimality_check(stream: CustomerStream, horizon=None,
                            random_seed: int = 0) -> dict:
    """Worst pathwise excess of deadline-order removals over each policy.

    The deadline-ordered reneging system should never have removed more
    work than any other discipline at any time; returns, per policy, the
    largest value of (deadline-order removals - policy removals) over the
    union of jump epochs (nonpositive means the relation held).
    """
    suite = run_policy_suite(stream, horizon=horizon, random_seed=random_seed)
    edf_times, edf_vals = removal_curve(suite[PolicyKind.EDF_RENEGING])
    out = {}
    for kind, traj in suite.items():
        if kind == PolicyKind.EDF_RENEGING:
            continue
        times, vals = removal_curve(traj)
        worst = 0.0
        for t in sorted(set(edf_times) | set(times)):
            gap = _step_at(edf_times, edf_vals, t) - _step_at(times, vals, t)
            worst = max(worst, float(gap))
        out[kind.value] = worst
    return out


def audit_stream(stream: CustomerStream, horizon=None,
                 random_seed: int = 0,
                 include_policies: bool = True) -> dict:
    """Every structural check on one stream; returns worst-violation map."""
    std = simulate(stream, PolicyKind.EDF_STANDARD, horizon=horizon)
    ren = simulate(stream, PolicyKind.EDF_RENEGING, horizon=horizon)
    phi = reference_from_standard(std)
    direct = simulate_reference(stream, std)
    out = {}
    for k, v in compare_reference_routes(phi, direct).items():
        out[f"route_{k}"] = float(v)
    for k, v in compare_systems(ren, std, phi).violations.items():
        out[k] = float(v)
    for k, v in phi.cut.checks.items():
        out[f"cut_{k}"] = float(v)
    out["account_reneging"] = float(check_work_account(ren))
    out["account_standard"] = float(check_work_account(std))
    out["account_reference"] = float(check_reference_account(phi))
    out["reference_positive_leads"] = float(check_reference_positivity(phi))
    out["standard_policy_free"] = float(check_standard_policy_free(std))
    if include_policies:
        for name, v in policy_optimality_check(
                stream, horizon=horizon, random_seed=random_seed).items():
            out[f"removal_optimality_vs_{name}"] = v
    return out


@dataclass
class AuditReport:
    """Aggregated audit over a corpus of streams."""

    n_streams: int
    worst: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    tolerance: float = 1e-9

    def merge(self, checks: dict, label: str) -> None:
        for k, v in checks.items():
            if k not in self.worst or v > self.worst[k]:
                self.worst[k] = v
            if v > self.tolerance:
                self.failures.append((label, k, v))

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        width = max((len(k) for k in self.worst), default=10)
        out = [f"audited {self.n_streams} streams; "
               f"tolerance {self.tolerance:g}"]
        for k in sorted(self.worst):
            flag = "FAIL" if self.worst[k] > self.tolerance else "ok"
            out.append(f"  {k:<{width}}  {self.worst[k]:12.3e}  {flag}")
        return out


def run_audit_battery(streams, horizon_factor: Optional[float] = None,
                      random_seed: int = 0, tolerance: float = 1e-9,
                      include_policies: bool = True) -> AuditReport:
    """Audit a corpus of streams (any iterable of CustomerStream).

    ``horizon_factor`` shortens or stretches each run relative to the last
    arrival (None drains every stream fully).
    """
    streams = list(streams)
    report = AuditReport(n_streams=len(streams), tolerance=tolerance)
    for i, stream in enumerate(streams):
        horizon = None
        if horizon_factor is not None:
            last = stream.arrivals[len(stream) - 1]
            horizon = (last * Fraction(horizon_factor).limit_denominator(10**6)
                       if stream.exact else float(last) * horizon_factor)
        checks = audit_stream(stream, horizon=horizon,
                              random_seed=random_seed,
                              include_policies=include_policies)
        report.merge(checks, label=f"stream[{i}]")
    return report
