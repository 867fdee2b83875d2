"""The reference system: a deadline-respecting image of the standard queue.

The reference workload is obtained from the standard (non-reneging,
deadline-ordered) system by removing mass from the left of its workload
measure.  The removal level K follows a busy-cycle recursion: a cycle opens
at an arrival that finds the reference empty, K then equals the larger of
the pre-cycle workload and the running peak of the standard system's late
mass, and the cycle closes the first time K catches the total workload.
Between cycles K simply tracks the (decaying) standard workload.

Two independent constructions are provided:

* ``reference_from_standard`` computes K by the cycle scan and truncates the
  standard measure (the projection route);
* ``simulate_reference`` evolves the reference measure forward event by
  event with local rules, consulting the standard measure only when an
  arrival undercuts the left edge (the direct route).

Their agreement at every epoch is a structural test of the whole pathwise
theory, and the acceptance suite exercises it over large random corpora.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional

from .measures import AtomicMeasure
from .primitives import CustomerStream
from .simulator import PolicyKind, SimulationError, SystemTrajectory

_INF = float("inf")


class ReferenceError(ValueError):
    """Raised on invalid reference-construction inputs."""


def _require_standard(traj: SystemTrajectory) -> None:
    if traj.policy.kind != PolicyKind.EDF_STANDARD:
        raise ReferenceError("reference construction needs a standard-system "
                             f"trajectory, got {traj.policy.kind.value}")
    if traj.events and traj.events[0].atoms is None:
        raise ReferenceError("standard trajectory must record measures")


@dataclass
class CutDecomposition:
    """Piecewise description of the removal level K and its two parts.

    ``times[i]`` opens the i-th segment with right-continuous value
    ``k_post[i]``; on a ``busy`` segment K is constant, on an ``idle``
    segment it decays at unit rate and floors at zero.  ``k_up`` and
    ``k_down`` accumulate the increases (reference reneging) and the idle
    decay; K == k_up - k_down throughout.  ``cycle_starts`` and
    ``cycle_ends`` list the cycle-opening arrivals and the catch-up times.
    """

    times: list
    k_post: list
    mode: list
    k_up: list
    k_down: list
    busy_cum: list
    cycle_starts: list
    cycle_ends: list
    checks: dict

    def _seg(self, t) -> int:
        i = bisect.bisect_right(self.times, t) - 1
        return max(i, 0)

    def k_at(self, t):
        i = self._seg(t)
        if self.mode[i] == "busy":
            return self.k_post[i]
        dec = self.k_post[i] - (t - self.times[i])
        return dec if dec > 0 else 0

    def k_up_at(self, t):
        return self.k_up[self._seg(t)]

    def k_down_at(self, t):
        i = self._seg(t)
        if self.mode[i] == "busy":
            return self.k_down[i]
        return self.k_down[i] + (self.k_post[i] - self.k_at(t))

    def busy_time_at(self, t):
        """Cumulative time the reference system has been nonempty."""
        i = self._seg(t)
        extra = (t - self.times[i]) if self.mode[i] == "busy" else 0
        return self.busy_cum[i] + extra

    def reneged_at(self, t):
        """Cumulative reference reneged work (the increasing part of K)."""
        return self.k_up_at(t)


def cut_decomposition(traj: SystemTrajectory) -> CutDecomposition:
    """Scan a standard trajectory for the removal-level path."""
    _require_standard(traj)
    zero = 0
    times = [zero]
    k_post = [zero]
    mode = ["idle"]
    k_up = [zero]
    k_down = [zero]
    busy_cum = [zero]
    sigmas: list = []
    taus: list = []
    dev_tau = 0.0
    dev_sigma = 0.0
    dev_idle = 0.0
    busy = False
    m_level = zero      # current constant K on a busy segment
    w_prev = zero       # standard workload right after the last breakpoint

    def push(t, k, seg_mode, du=0):
        dt = t - times[-1]
        extra_busy = dt if mode[-1] == "busy" else 0
        extra_down = 0
        if mode[-1] == "idle":
            decayed = k_post[-1] - dt
            extra_down = k_post[-1] - (decayed if decayed > 0 else 0)
        times.append(t)
        k_post.append(k)
        mode.append(seg_mode)
        k_up.append(k_up[-1] + du)
        k_down.append(k_down[-1] + extra_down)
        busy_cum.append(busy_cum[-1] + extra_busy)

    for e in traj.events:
        t = e.time
        if busy:
            # does the workload sink to the cut level inside the gap?
            gap = t - times[-1]
            hit = w_prev - m_level
            if hit < gap:
                t_star = times[-1] + hit
                taus.append(t_star)
                push(t_star, m_level, "idle")
                busy = False
        if busy:
            late = e.late_mass
            new_level = m_level if m_level >= late else late
            k_now = new_level
            du = new_level - m_level
            m_level = new_level
            # close the cycle when K has caught the workload, never at an
            # arrival (fresh mass keeps the reference busy)
            if e.arrived is None and k_now >= e.work - (0 if traj.exact else 1e-9):
                taus.append(t)
                dev_tau = max(dev_tau, abs(float(k_now - e.work)))
                push(t, e.work if not traj.exact else k_now, "idle", du=du)
                busy = False
                m_level = k_post[-1]
            else:
                push(t, k_now, "busy", du=du)
        else:
            dt = t - times[-1]
            decayed = k_post[-1] - dt
            k_pre = decayed if decayed > 0 else 0
            dev_idle = max(dev_idle, abs(float(k_pre - e.pre_work)))
            if e.arrived is not None:
                # cycle opens; K is continuous across the opening
                sigmas.append(t)
                dev_sigma = max(dev_sigma, abs(float(k_pre - e.pre_work)))
                m_level = k_pre if k_pre >= e.late_mass else e.late_mass
                push(t, m_level, "busy")
                busy = True
            else:
                push(t, k_pre, "idle")
        w_prev = e.work

    # a cycle can close after the final event (drained runs)
    if busy:
        t_star = times[-1] + (w_prev - m_level)
        taus.append(t_star)
        push(t_star, m_level, "idle")

    dev_dec = 0.0
    for i in range(len(times)):
        dev_dec = max(dev_dec, abs(float(k_post[i] - (k_up[i] - k_down[i]))))
    checks = {"cycle_end_identity": dev_tau,
              "cycle_start_continuity": dev_sigma,
              "idle_tracks_workload": dev_idle,
              "decomposition": dev_dec}
    return CutDecomposition(times=times, k_post=k_post, mode=mode, k_up=k_up,
                            k_down=k_down, busy_cum=busy_cum,
                            cycle_starts=sigmas, cycle_ends=taus,
                            checks=checks)


class ReferenceTrajectory:
    """Reference system obtained by left-truncating the standard workload."""

    def __init__(self, std: SystemTrajectory, cut: CutDecomposition):
        self.std = std
        self.cut = cut

    @property
    def epochs(self) -> list:
        return self.std.event_times()

    def work_at(self, t):
        u = self.std.work_at(t) - self.cut.k_at(t)
        return u if u > 0 else 0

    def measure_at(self, t) -> AtomicMeasure:
        m = self.std.measure_at(t)
        k = self.cut.k_at(t)
        total = m.total()
        return m.remove_leftmost_mass(k if k < total else total)

    def left_edge_at(self, t):
        return self.measure_at(t).support_min()

    def reneged_at(self, t):
        return self.cut.reneged_at(t)


def reference_from_standard(traj: SystemTrajectory) -> ReferenceTrajectory:
    return ReferenceTrajectory(traj, cut_decomposition(traj))


# -- direct forward dynamics ---------------------------------------------------


@dataclass(slots=True)
class ReferenceEvent:
    time: object
    kind: str
    ejected: object
    pre_atoms: tuple
    atoms: tuple
    reneged: object


class DirectReference:
    """Reference system evolved forward by its own event rules."""

    def __init__(self, events: list[ReferenceEvent]):
        self.events = events
        self._times = [e.time for e in events]

    def _locate(self, t) -> int:
        return bisect.bisect_right(self._times, t) - 1

    def measure_at(self, t) -> AtomicMeasure:
        i = self._locate(t)
        if i < 0:
            return AtomicMeasure()
        e = self.events[i]
        dt = t - e.time
        pairs = []
        for j, (loc, mass) in enumerate(e.atoms):
            if j == 0 and dt > 0:
                mass = mass - dt   # the left edge is always in service
            pairs.append((loc - dt, mass))
        return AtomicMeasure(pairs)

    def work_at(self, t):
        return self.measure_at(t).total()

    def left_edge_at(self, t):
        return self.measure_at(t).support_min()

    def reneged_at(self, t):
        i = self._locate(t)
        return self.events[i].reneged if i >= 0 else 0

    def epoch_times(self) -> list:
        return list(self._times)


def simulate_reference(stream: CustomerStream, std: SystemTrajectory,
                       horizon=None) -> DirectReference:
    """Evolve the reference measure forward with local rules.

    Between events the left-edge atom drains at unit rate and every
    location drifts down; the left edge is ejected the instant it hits
    zero lead.  An arrival at or above the left edge is inserted as its
    own atom; an arrival below it (or into an empty reference) is
    reconciled by re-truncating the standard measure at the implied
    removal level.  The standard trajectory must cover every arrival.
    """
    _require_standard(std)
    if horizon is None:
        horizon = std.horizon  # may be None (drained run)
    horizon_t = _INF if horizon is None else horizon
    exact = stream.exact
    eps = 0 if exact else 1e-12
    arrivals = stream.arrivals
    arrival_records = {}
    for e in std.events:
        if e.arrived is not None:
            arrival_records[e.arrived] = e
    atoms: list[list] = []   # [stored location, mass], left edge first
    offset = 0
    t = 0
    reneged = 0
    i_next = 0
    n = len(stream)
    events: list[ReferenceEvent] = []

    def snapshot() -> tuple:
        return tuple((loc - offset, mass) for loc, mass in atoms)

    while True:
        t_arr = arrivals[i_next] if i_next < n else _INF
        if t_arr > horizon_t:
            t_arr = _INF
        if atoms:
            eff0 = atoms[0][0] - offset
            m0 = atoms[0][1]
            t_int = t + (eff0 if eff0 < m0 else m0)
            if t_int <= t:
                t_int = t
        else:
            t_int = _INF
        t_next = t_arr if t_arr < t_int else t_int
        if t_next == _INF or t_next > horizon_t:
            break
        dt = t_next - t
        offset = offset + dt
        if atoms:
            atoms[0][1] = atoms[0][1] - dt
        t = t_next
        pre = snapshot()
        u_pre = 0
        for _, mass in atoms:
            u_pre = u_pre + mass
        kinds = []
        ejected = 0
        if atoms:
            eff0 = atoms[0][0] - offset
            m0 = atoms[0][1]
            if m0 <= eps:
                atoms.pop(0)
                kinds.append("depletion")
            elif eff0 <= eps:
                ejected = m0
                reneged = reneged + m0
                atoms.pop(0)
                kinds.append("ejection")
        if t_arr == t_next:
            k = i_next
            i_next += 1
            lead = stream.leads[k]
            v = stream.services[k]
            edge = (atoms[0][0] - offset) if atoms else _INF
            if lead >= edge:
                loc = lead + offset
                j = bisect.bisect_left([a[0] for a in atoms], loc)
                if j < len(atoms) and atoms[j][0] == loc:
                    atoms[j][1] = atoms[j][1] + v
                else:
                    atoms.insert(j, [loc, v])
                kinds.append("arrival")
            else:
                rec = arrival_records.get(k)
                if rec is None:
                    raise ReferenceError(
                        "standard trajectory does not cover arrival "
                        f"{k} at t={t}")
                cut = (rec.pre_work - u_pre) + ejected
                m_std = AtomicMeasure(rec.atoms)
                total = m_std.total()
                if cut < 0:
                    cut = 0
                newm = m_std.remove_leftmost_mass(cut if cut < total else total)
                atoms = [[loc + offset, mass] for loc, mass in newm.atoms()]
                kinds.append("arrival")
        events.append(ReferenceEvent(
            time=t, kind="+".join(kinds) if kinds else "none",
            ejected=ejected, pre_atoms=pre, atoms=snapshot(),
            reneged=reneged))
    return DirectReference(events)


def _merged_epochs(a, b, time_tol) -> list:
    """Union of two epoch lists with near-duplicates collapsed upward.

    The two routes compute the same event instants through different
    arithmetic chains, so in float mode they can differ in the last bits;
    representing each cluster by its maximum evaluates both routes on the
    post-event side.
    """
    merged = sorted(set(a) | set(b))
    if time_tol <= 0 or not merged:
        return merged
    out = []
    top = merged[0]
    for t in merged[1:]:
        if t - top <= time_tol * max(1.0, abs(float(top))):
            top = t
        else:
            out.append(top)
            top = t
    out.append(top)
    return out


def compare_reference_routes(phi: ReferenceTrajectory, direct: DirectReference,
                             tol: float = 1e-9) -> dict:
    """Largest disagreement between the two constructions at every epoch."""
    time_tol = 0 if phi.std.exact else 1e-10
    times = _merged_epochs(phi.epochs, direct.epoch_times(), time_tol)
    worst = {"measure": 0.0, "work": 0.0, "reneged": 0.0, "left_edge": 0.0}
    for t in times:
        ma = phi.measure_at(t)
        mb = direct.measure_at(t)
        worst["measure"] = max(worst["measure"], ma.discrepancy(mb, tol))
        ua, ub = ma.total(), mb.total()
        worst["work"] = max(worst["work"], abs(float(ua - ub)))
        worst["reneged"] = max(worst["reneged"], abs(
            float(phi.reneged_at(t) - direct.reneged_at(t))))
        if ua > tol and ub > tol:
            worst["left_edge"] = max(worst["left_edge"], abs(
                float(ma.support_min() - mb.support_min())))
    return worst


# -- pathwise relations ---------------------------------------------------------


@dataclass
class ComparisonRow:
    time: object
    reneging_work: object
    reference_work: object
    standard_work: object
    cut_level: object
    left_edge: object
    frontier: object
    reneging_removed: object
    reference_removed: object
    removal_bound: object


@dataclass
class ComparisonReport:
    """Pathwise inequality audit between the three coupled systems.

    ``violations`` holds, per named relation, the largest amount by which
    it failed (zero when it held everywhere).
    """

    rows: list[ComparisonRow]
    violations: dict

    def ok(self, tol: float = 1e-9) -> bool:
        return all(v <= tol for v in self.violations.values())

    def to_csv(self, path) -> None:
        import csv as _csv
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["time", "reneging_work", "reference_work",
                        "standard_work", "cut_level", "left_edge", "frontier",
                        "reneging_removed", "reference_removed",
                        "removal_bound"])
            for r in self.rows:
                w.writerow([f"{float(x):.17g}" for x in (
                    r.time, r.reneging_work, r.reference_work,
                    r.standard_work, r.cut_level, r.left_edge, r.frontier,
                    r.reneging_removed, r.reference_removed,
                    r.removal_bound)])


def _as_float(x):
    return float(x) if x != _INF else _INF


def compare_systems(ren: SystemTrajectory, std: SystemTrajectory,
                    ref: Optional[ReferenceTrajectory] = None,
                    keep_rows: bool = False,
                    tol: float = 1e-9) -> ComparisonReport:
    """Audit every pathwise relation between the coupled systems.

    `ren` and `std` must be runs of the reneging and standard policies over
    the same stream.  Checked, with the largest violation reported for
    each: the reneging workload never exceeds the reference workload; the
    reference never reneges more than the reneging system (globally and
    restarted at every cycle opening); the reference left edge stays at or
    below the reneging frontier while the reference is busy; the
    work-difference bound driven by below-frontier arrivals; frontier
    monotonicity (never falls faster than unit rate) and the current-lead
    bound.
    """
    if ren.policy.kind != PolicyKind.EDF_RENEGING:
        raise ReferenceError("comparison needs the deadline-ordered "
                             "reneging trajectory")
    if ref is None:
        ref = reference_from_standard(std)
    stream = ren.stream
    ren_times = ren.event_times()
    times = sorted(set(ren_times) | set(std.event_times()))
    viol = {"reneging_below_reference": 0.0,
            "reference_removes_less": 0.0,
            "reference_removes_less_per_cycle": 0.0,
            "reference_below_standard": 0.0,
            "left_edge_below_frontier": 0.0,
            "work_difference_bound": 0.0,
            "frontier_unit_drift": 0.0,
            "lead_in_service_below_frontier": 0.0}

    # removal-difference floor over cycle openings (left limits)
    cyc_floor = []
    floor = 0.0
    starts = ref.cut.cycle_starts
    si = 0
    # bound on (reference work - reneging work) built from arrivals below
    # the frontier at their arrival instant
    d_times = []
    d_vals = []
    d_cum = 0
    leads = stream.leads
    services = stream.services
    arr = stream.arrivals
    for k in range(len(stream)):
        fk = ren.frontier_at_arrival.get(k)
        if fk is None:
            break
        if leads[k] < fk:
            i = bisect.bisect_right(ren_times, arr[k]) - 1
            pre = ren.measure_pre(i) if i >= 0 else AtomicMeasure()
            inside = pre.mass_in(0, fk, include_lo=False, include_hi=False)
            gap = inside + services[k] - leads[k]
            if gap < 0:
                gap = 0
            term = services[k] if services[k] < gap else gap
            d_cum = d_cum + term
            d_times.append(arr[k])
            d_vals.append(d_cum)

    def d_at(t):
        i = bisect.bisect_right(d_times, t) - 1
        return d_vals[i] if i >= 0 else 0

    def ren_removed_pre(t):
        i = bisect.bisect_right(ren_times, t) - 1
        if i < 0:
            return 0
        e = ren.events[i]
        if e.time == t:
            return ren.events[i - 1].reneged_work if i > 0 else 0
        return e.reneged_work

    rows = []
    prev_front_base = None
    for t in times:
        w = ren.work_at(t)
        u = ref.work_at(t)
        ws = std.work_at(t)
        k_level = ref.cut.k_at(t)
        r_w = ren.reneged_work_at(t)
        r_u = ref.reneged_at(t)
        f = ren.frontier_at(t)
        e_edge = ref.left_edge_at(t) if u > tol else _INF
        viol["reneging_below_reference"] = max(
            viol["reneging_below_reference"], float(w - u))
        viol["reference_below_standard"] = max(
            viol["reference_below_standard"], float(u - ws))
        viol["reference_removes_less"] = max(
            viol["reference_removes_less"], float(r_u - r_w))
        while si < len(starts) and starts[si] <= t:
            s = starts[si]
            floor = min(floor, float(ref.cut.k_up_at(s) - ren_removed_pre(s)))
            si += 1
        viol["reference_removes_less_per_cycle"] = max(
            viol["reference_removes_less_per_cycle"],
            float(r_u - r_w) - floor)
        if u > tol and e_edge != _INF:
            viol["left_edge_below_frontier"] = max(
                viol["left_edge_below_frontier"], float(e_edge - f))
        viol["work_difference_bound"] = max(
            viol["work_difference_bound"], float((u - w) - d_at(t)))
        if keep_rows:
            rows.append(ComparisonRow(
                time=t, reneging_work=w, reference_work=u, standard_work=ws,
                cut_level=k_level, left_edge=_as_float(e_edge), frontier=f,
                reneging_removed=r_w, reference_removed=r_u,
                removal_bound=d_at(t)))
    for e in ren.events:
        base = e.frontier + e.time
        if prev_front_base is not None:
            viol["frontier_unit_drift"] = max(
                viol["frontier_unit_drift"], float(prev_front_base - base))
        prev_front_base = base
        viol["lead_in_service_below_frontier"] = max(
            viol["lead_in_service_below_frontier"],
            float(e.current_lead - e.frontier))
    return ComparisonReport(rows=rows, violations=viol)


def check_work_account(traj: SystemTrajectory) -> float:
    """Largest drift in: work = arrived work - service given - removed."""
    worst = 0.0
    for e in traj.events:
        bal = e.arrived_work - e.busy - e.reneged_work
        worst = max(worst, abs(float(e.work - bal)))
    return worst


def check_reference_account(ref: ReferenceTrajectory) -> float:
    """Largest drift in the reference mass balance at standard epochs."""
    worst = 0.0
    for e in ref.std.events:
        t = e.time
        u = ref.work_at(t)
        bal = e.arrived_work - ref.cut.busy_time_at(t) - ref.reneged_at(t)
        worst = max(worst, abs(float(u - bal)))
    return worst


def check_reference_positivity(ref: ReferenceTrajectory,
                               tol: float = 1e-9) -> float:
    """Largest reference mass found at or below lead zero (should be none)."""
    worst = 0.0
    for t in ref.epochs:
        worst = max(worst, float(ref.measure_at(t).mass_below(0)))
    return worst


def check_standard_policy_free(std: SystemTrajectory,
                               n_points: int = 64) -> float:
    """Standard workload against the arrivals-only first-principles value."""
    from .simulator import netput_workload
    times = std.event_times()
    if not times:
        return 0.0
    step = max(1, len(times) // n_points)
    sel = times[::step]
    vals = netput_workload(std.stream, sel)
    worst = 0.0
    for t, v in zip(sel, vals):
        worst = max(worst, abs(float(std.work_at(t) - v)))
    return worst
