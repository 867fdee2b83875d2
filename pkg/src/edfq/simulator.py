"""Pathwise simulation of a single-server queue with deadlines.

Customers arrive with a service requirement and an initial lead time; the
lead time decreases at unit rate.  Under a *reneging* policy a customer is
removed the instant its lead time reaches zero, taking its unserved work
with it; under the *standard* policy late customers stay until served.  The
server preempts and resumes without overhead.

Events at one epoch are processed in a fixed order: completions, then
deadline expiries (reneging removals or lateness crossings), then the
arrival, then the service selection for the next interval.  A completion
that coincides with the customer's own deadline counts as a completion.

All state advances are exact for exact-valued streams (ints / Fractions),
which the golden-trajectory tests rely on.
"""

from __future__ import annotations

import bisect
import csv
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .measures import AtomicMeasure
from .primitives import CustomerStream

_INF = float("inf")


class SimulationError(ValueError):
    """Raised on invalid simulation inputs."""


class PolicyKind(str, Enum):
    EDF_RENEGING = "edf_reneging"
    EDF_STANDARD = "edf_standard"
    FIFO_RENEGING = "fifo_reneging"
    LIFO_RENEGING = "lifo_reneging"
    RANDOM_RENEGING = "random_reneging"
    HYBRID_RENEGING = "hybrid_reneging"


RENEGING_KINDS = (PolicyKind.EDF_RENEGING, PolicyKind.FIFO_RENEGING,
                  PolicyKind.LIFO_RENEGING, PolicyKind.RANDOM_RENEGING,
                  PolicyKind.HYBRID_RENEGING)


@dataclass(frozen=True)
class PolicySpec:
    """A service policy; `seed` feeds the random policy, `companion` is the
    deadline-ordered reneging trajectory the hybrid policy consults."""

    kind: PolicyKind
    seed: Optional[int] = None
    companion: Optional["SystemTrajectory"] = None

    def __post_init__(self):
        if self.kind == PolicyKind.RANDOM_RENEGING and self.seed is None:
            raise SimulationError("random policy requires a seed")
        if self.kind == PolicyKind.HYBRID_RENEGING:
            if self.companion is None:
                raise SimulationError("hybrid policy requires a companion "
                                      "reneging trajectory")
            if self.companion.policy.kind != PolicyKind.EDF_RENEGING:
                raise SimulationError("hybrid companion must be a "
                                      "deadline-ordered reneging trajectory")

    @property
    def reneging(self) -> bool:
        return self.kind != PolicyKind.EDF_STANDARD


@dataclass(slots=True)
class EventRecord:
    """State snapshot around one event epoch (all discrete changes at one
    time are merged into a single record)."""

    time: object
    kind: str
    arrived: Optional[int]
    completed: Optional[int]
    expired: tuple
    crossed: tuple
    # left limits
    pre_work: object
    pre_late_mass: object
    pre_queue: int
    pre_atoms: Optional[tuple]
    # right-continuous state
    work: object
    queue: int
    late_mass: object
    frontier: object
    current_lead: object
    serving: Optional[int]
    serving_deadline: object
    atoms: Optional[tuple]
    # cumulative counters
    arrived_count: int
    arrived_work: object
    busy: object
    idle: object
    late_time: object
    reneged_work: object
    reneged_count: int
    late_work: object
    late_count: int
    completed_work: object
    completed_count: int


@dataclass(slots=True)
class SamplePoint:
    time: object
    work: object
    queue: int
    frontier: object
    reneged_work: object
    atoms: Optional[tuple]


class SystemTrajectory:
    """Event-by-event record of one simulation run."""

    def __init__(self, stream: CustomerStream, policy: PolicySpec, horizon,
                 events: list[EventRecord], samples: list[SamplePoint],
                 departure: dict, frontier_at_arrival: dict,
                 reneged: set, completed: set, exact: bool,
                 final_counters: Optional[dict] = None):
        self.stream = stream
        self.policy = policy
        self.horizon = horizon
        self.events = events
        self.samples = samples
        self.departure = departure
        self.frontier_at_arrival = frontier_at_arrival
        self.reneged = reneged
        self.completed = completed
        self.exact = exact
        self._final_counters = final_counters
        self._times = [e.time for e in events]

    # -- terminal counters -------------------------------------------------

    @property
    def last(self) -> Optional[EventRecord]:
        return self.events[-1] if self.events else None

    def totals(self) -> dict:
        if self._final_counters is not None:
            return dict(self._final_counters)
        e = self.last
        if e is None:
            return {k: 0 for k in ("arrived_count", "arrived_work", "busy",
                                   "idle", "late_time", "reneged_work",
                                   "reneged_count", "late_work", "late_count",
                                   "completed_work", "completed_count",
                                   "final_time", "work")}
        return {
            "arrived_count": e.arrived_count, "arrived_work": e.arrived_work,
            "busy": e.busy, "idle": e.idle, "late_time": e.late_time,
            "reneged_work": e.reneged_work, "reneged_count": e.reneged_count,
            "late_work": e.late_work, "late_count": e.late_count,
            "completed_work": e.completed_work,
            "completed_count": e.completed_count,
            "final_time": e.time, "work": e.work,
        }

    # -- pointwise reconstruction ------------------------------------------

    def _locate(self, t) -> int:
        """Index of the last event with time <= t (-1 before the first)."""
        return bisect.bisect_right(self._times, t) - 1

    def record_at(self, t) -> Optional[EventRecord]:
        i = self._locate(t)
        return self.events[i] if i >= 0 else None

    def work_at(self, t):
        e = self.record_at(t)
        if e is None:
            return 0
        if e.serving is None:
            return e.work
        return e.work - (t - e.time)

    def late_mass_at(self, t):
        e = self.record_at(t)
        if e is None:
            return 0
        if e.serving is not None and e.serving_deadline <= e.time:
            return e.late_mass - (t - e.time)
        return e.late_mass

    def queue_at(self, t) -> int:
        e = self.record_at(t)
        return e.queue if e is not None else 0

    def frontier_at(self, t):
        e = self.record_at(t)
        base = (e.frontier + e.time) if e is not None else self.stream.y_hi
        return base - t

    def reneged_work_at(self, t):
        e = self.record_at(t)
        return e.reneged_work if e is not None else 0

    def measure_at(self, t) -> AtomicMeasure:
        """Workload measure at time t (atoms at lead times, drifted/served)."""
        e = self.record_at(t)
        if e is None:
            return AtomicMeasure()
        if e.atoms is None:
            raise SimulationError("trajectory recorded without measures")
        dt = t - e.time
        serving_loc = (e.serving_deadline - e.time
                       if e.serving is not None else None)
        pairs = []
        for loc, mass in e.atoms:
            if serving_loc is not None and loc == serving_loc and dt > 0:
                mass = mass - dt
            pairs.append((loc - dt, mass))
        return AtomicMeasure(pairs)

    def measure_pre(self, i: int) -> AtomicMeasure:
        """Left limit of the workload measure at event index i."""
        e = self.events[i]
        if e.pre_atoms is None:
            raise SimulationError("trajectory recorded without measures")
        return AtomicMeasure(e.pre_atoms)

    def measure_post(self, i: int) -> AtomicMeasure:
        e = self.events[i]
        if e.atoms is None:
            raise SimulationError("trajectory recorded without measures")
        return AtomicMeasure(e.atoms)

    def event_times(self) -> list:
        return list(self._times)

    # -- derived curves ------------------------------------------------------

    def reneged_work_curve(self) -> list[tuple]:
        """Right-continuous step curve of cumulative reneged work."""
        out = [(0, 0)]
        for e in self.events:
            if e.reneged_work != out[-1][1]:
                out.append((e.time, e.reneged_work))
        return out

    def frontier_track(self) -> list[tuple]:
        """(time, frontier) at event epochs; deadline-ordered reneging only."""
        if self.policy.kind != PolicyKind.EDF_RENEGING:
            raise SimulationError(
                "frontier track is defined for the deadline-ordered "
                f"reneging policy, not {self.policy.kind.value}")
        return [(e.time, e.frontier) for e in self.events]

    def to_csv(self, path, include_measures: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["time", "event", "customer", "total_work",
                      "total_queue", "late_mass", "frontier", "current_lead",
                      "arrived_count", "arrived_work", "busy", "idle",
                      "reneged_work", "reneged_count", "late_work",
                      "late_count", "completed_work", "completed_count"]
            if include_measures:
                header.append("atoms")
            w.writerow(header)
            for e in self.events:
                cust = e.arrived if e.arrived is not None else (
                    e.completed if e.completed is not None else (
                        e.expired[0] if e.expired else (
                            e.crossed[0] if e.crossed else "")))
                row = [f"{float(e.time):.17g}", e.kind, cust,
                       f"{float(e.work):.17g}", e.queue,
                       f"{float(e.late_mass):.17g}",
                       f"{float(e.frontier):.17g}",
                       f"{float(e.current_lead):.17g}",
                       e.arrived_count, f"{float(e.arrived_work):.17g}",
                       f"{float(e.busy):.17g}", f"{float(e.idle):.17g}",
                       f"{float(e.reneged_work):.17g}", e.reneged_count,
                       f"{float(e.late_work):.17g}", e.late_count,
                       f"{float(e.completed_work):.17g}", e.completed_count]
                if include_measures:
                    row.append(";".join(
                        f"{float(l):.17g}:{float(m):.17g}"
                        for l, m in (e.atoms or ())))
                w.writerow(row)


# -- policy selection -------------------------------------------------------


class _Selector:
    """Chooses the customer to serve after each event."""

    def __init__(self, engine: "_Engine", spec: PolicySpec):
        self.engine = engine
        self.spec = spec
        self.kind = spec.kind
        self.fifo_heap: list = []
        self.lifo_heap: list = []
        self.hp_heap: list = []
        self.rng = None
        if self.kind == PolicyKind.RANDOM_RENEGING:
            self.rng = np.random.Generator(np.random.PCG64(spec.seed))
        if self.kind == PolicyKind.HYBRID_RENEGING:
            comp = spec.companion
            stream = engine.stream
            leads = stream.leads
            self.high_priority = set()
            hp_arrivals = []
            hp_departures = []
            arr = stream.arrivals
            for k in range(len(stream)):
                fk = comp.frontier_at_arrival.get(k)
                if fk is not None and leads[k] < fk:
                    self.high_priority.add(k)
                    hp_arrivals.append(arr[k])
                    hp_departures.append(comp.departure.get(k, _INF))
            self.hp_arrivals = sorted(hp_arrivals)
            self.hp_departures = sorted(hp_departures)

    def on_arrival(self, k: int) -> None:
        if self.kind == PolicyKind.FIFO_RENEGING:
            heapq.heappush(self.fifo_heap, k)
        elif self.kind == PolicyKind.LIFO_RENEGING:
            heapq.heappush(self.lifo_heap, -k)
        elif self.kind == PolicyKind.HYBRID_RENEGING:
            if k in self.high_priority:
                heapq.heappush(self.hp_heap, k)

    def _peek(self, heap, transform=lambda x: x) -> Optional[int]:
        present = self.engine.present
        while heap:
            k = transform(heap[0])
            if k in present:
                return k
            heapq.heappop(heap)
        return None

    def select(self, t) -> Optional[int]:
        eng = self.engine
        if not eng.present:
            return None
        kind = self.kind
        if kind in (PolicyKind.EDF_RENEGING, PolicyKind.EDF_STANDARD):
            return eng.peek_edf()
        if kind == PolicyKind.FIFO_RENEGING:
            return self._peek(self.fifo_heap)
        if kind == PolicyKind.LIFO_RENEGING:
            return self._peek(self.lifo_heap, lambda x: -x)
        if kind == PolicyKind.RANDOM_RENEGING:
            order = sorted(eng.present)
            return order[int(self.rng.integers(len(order)))]
        # hybrid: priority class first-in-first-out, then idle while the
        # companion still holds priority customers, then deadline order
        hp = self._peek(self.hp_heap)
        if hp is not None:
            return hp
        if self._companion_priority_inflight(t):
            return None
        return eng.peek_edf()

    def _companion_priority_inflight(self, t) -> bool:
        arrived = bisect.bisect_right(self.hp_arrivals, t)
        departed = bisect.bisect_right(self.hp_departures, t)
        return arrived > departed

    def next_wakeup(self, t):
        if self.kind != PolicyKind.HYBRID_RENEGING:
            return _INF
        i = bisect.bisect_right(self.hp_departures, t)
        return self.hp_departures[i] if i < len(self.hp_departures) else _INF


# -- engine -------------------------------------------------------------------


class _Engine:
    def __init__(self, stream: CustomerStream, policy: PolicySpec, horizon,
                 record_measures: bool, sample_times, record_events: bool):
        self.stream = stream
        self.policy = policy
        self.reneging = policy.reneging
        self.exact = stream.exact
        self.eps = 0 if self.exact else 1e-12
        self.horizon = _INF if horizon is None else horizon
        if not self.horizon > 0:
            raise SimulationError("horizon must be > 0")
        self.record_measures = record_measures
        self.record_events = record_events
        self.sample_times = [] if sample_times is None else \
            sorted(sample_times)
        self.sample_atoms = record_measures
        zero = 0
        self.t = zero
        self.present: set[int] = set()
        self.crossed: set[int] = set()
        self.deadline: dict[int, object] = {}
        self.residual: dict[int, object] = {}
        self.edf_heap: list = []     # selection order, lazy deletion
        self.dl_heap: list = []      # pending deadline events, consumed once
        self.serving: Optional[int] = None
        self.work = zero
        self.late_mass = zero
        self.n_late = 0
        self.frontier_base = stream.y_hi
        self.arrived_count = 0
        self.arrived_work = zero
        self.busy = zero
        self.idle = zero
        self.late_time = zero
        self.reneged_work = zero
        self.reneged_count = 0
        self.late_work = zero
        self.late_count = 0
        self.completed_work = zero
        self.completed_count = 0
        self.events: list[EventRecord] = []
        self.samples: list[SamplePoint] = []
        self.departure: dict[int, object] = {}
        self.frontier_at_arrival: dict[int, object] = {}
        self.reneged_set: set[int] = set()
        self.completed_set: set[int] = set()
        self.selector = _Selector(self, policy)
        self._arrivals = stream.arrivals
        self._i_next = 0
        self._sample_i = 0

    # -- helpers -----------------------------------------------------------

    def peek_edf(self) -> Optional[int]:
        heap = self.edf_heap
        while heap:
            d, k = heap[0]
            if k in self.present:
                return k
            heapq.heappop(heap)
        return None

    def _peek_deadline(self):
        heap = self.dl_heap
        while heap:
            d, k = heap[0]
            if k in self.present:
                return d
            heapq.heappop(heap)
        return _INF

    def _atoms_snapshot(self) -> tuple:
        t = self.t
        pairs: dict = {}
        for k in self.present:
            loc = self.deadline[k] - t
            if loc in pairs:
                pairs[loc] += self.residual[k]
            else:
                pairs[loc] = self.residual[k]
        return tuple(sorted(pairs.items()))

    def _serving_is_late(self) -> bool:
        return (self.serving is not None
                and self.deadline[self.serving] <= self.t)

    # -- sampling ----------------------------------------------------------

    def _emit_samples_through(self, t_next, include_end: bool) -> None:
        times = self.sample_times
        while self._sample_i < len(times):
            s = times[self._sample_i]
            if s > t_next or (s == t_next and not include_end):
                break
            if s >= self.t:
                self._emit_sample(s)
            self._sample_i += 1

    def _emit_sample(self, s) -> None:
        dt = s - self.t
        serving = self.serving
        w = self.work - dt if serving is not None else self.work
        atoms = None
        if self.sample_atoms:
            pairs: dict = {}
            for k in self.present:
                loc = self.deadline[k] - s
                mass = self.residual[k]
                if k == serving:
                    mass = mass - dt
                if mass > self.eps:
                    pairs[loc] = pairs.get(loc, 0) + mass
            atoms = tuple(sorted(pairs.items()))
        self.samples.append(SamplePoint(
            time=s, work=w, queue=len(self.present),
            frontier=self.frontier_base - s,
            reneged_work=self.reneged_work, atoms=atoms))

    # -- main loop -----------------------------------------------------------

    def run(self) -> SystemTrajectory:
        horizon = self.horizon
        finite_horizon = horizon != _INF
        while True:
            t_arr = (self._arrivals[self._i_next]
                     if self._i_next < len(self.stream) else _INF)
            if t_arr > horizon:
                t_arr = _INF
            t_comp = (self.t + self.residual[self.serving]
                      if self.serving is not None else _INF)
            t_dl = self._peek_deadline()
            t_wake = _INF
            if self.serving is None and self.present:
                t_wake = self.selector.next_wakeup(self.t)
            t_next = min(t_arr, t_comp, t_dl, t_wake)
            at_horizon = False
            if finite_horizon and horizon <= t_next:
                t_next = horizon
                at_horizon = True
            if t_next == _INF:
                break
            self._step(t_next, t_arr, at_horizon)
            if at_horizon:
                break
        if self.horizon == _INF:
            # after a drain the system stays empty; flush remaining samples
            while self._sample_i < len(self.sample_times):
                s = self.sample_times[self._sample_i]
                if s >= self.t:
                    self._emit_sample(s)
                self._sample_i += 1
        final = {
            "arrived_count": self.arrived_count,
            "arrived_work": self.arrived_work,
            "busy": self.busy, "idle": self.idle,
            "late_time": self.late_time,
            "reneged_work": self.reneged_work,
            "reneged_count": self.reneged_count,
            "late_work": self.late_work, "late_count": self.late_count,
            "completed_work": self.completed_work,
            "completed_count": self.completed_count,
            "final_time": self.t, "work": self.work,
        }
        return SystemTrajectory(
            self.stream, self.policy, None if not finite_horizon else horizon,
            self.events, self.samples, self.departure,
            self.frontier_at_arrival, self.reneged_set, self.completed_set,
            self.exact, final_counters=final)

    def _advance(self, t_next) -> None:
        dt = t_next - self.t
        if dt == 0:
            return
        if self.sample_times:
            self._emit_samples_through(t_next, include_end=False)
        if self.serving is not None:
            self.residual[self.serving] -= dt
            self.work -= dt
            self.busy += dt
            if self._serving_is_late():
                self.late_mass -= dt
        else:
            self.idle += dt
        if self.n_late > 0:
            self.late_time += dt
        self.t = t_next

    def _step(self, t_next, t_arr, at_horizon: bool) -> None:
        eps = self.eps
        self._advance(t_next)
        t = self.t
        # left limits
        pre_work = self.work
        pre_late = self.late_mass
        pre_queue = len(self.present)
        pre_atoms = self._atoms_snapshot() if self.record_measures else None
        labels = []
        completed = None
        expired = []
        crossed_now = []
        arrived = None
        # 1) completion (wins a tie with the customer's own deadline); the
        # second clause finishes a residual too small to advance the clock
        if self.serving is not None and (
                self.residual[self.serving] <= eps
                or t + self.residual[self.serving] <= t):
            k = self.serving
            completed = k
            self._depart(k)
            self.completed_set.add(k)
            self.completed_work += self.stream.services[k]
            self.completed_count += 1
            labels.append("completion")
        # 2) deadline expiries / lateness crossings
        while True:
            heap = self.dl_heap
            top = None
            while heap:
                d, k = heap[0]
                if k in self.present:
                    top = (d, k)
                    break
                heapq.heappop(heap)
            if top is None or top[0] > t + eps:
                break
            d, k = heapq.heappop(heap)
            if self.reneging:
                res = self.residual[k]
                self.reneged_work += res
                self.reneged_count += 1
                self.work -= res
                self._depart(k)
                self.reneged_set.add(k)
                expired.append(k)
            else:
                self.crossed.add(k)
                res = self.residual[k]
                self.n_late += 1
                self.late_mass += res
                self.late_work += res
                self.late_count += 1
                crossed_now.append(k)
        if expired:
            labels.append("renege")
        if crossed_now:
            labels.append("crossing")
        # 3) arrival
        if t_arr == t_next and self._i_next < len(self.stream):
            k = self._i_next
            self._i_next += 1
            v = self.stream.services[k]
            self.present.add(k)
            self.deadline[k] = d = self.stream.deadlines[k]
            self.residual[k] = v
            heapq.heappush(self.edf_heap, (d, k))
            heapq.heappush(self.dl_heap, (d, k))
            self.selector.on_arrival(k)
            self.work += v
            self.arrived_work += v
            self.arrived_count += 1
            arrived = k
            labels.append("arrival")
        # 4) service selection
        sel = self.selector.select(t)
        if sel is not None:
            self.frontier_base = max(self.frontier_base, self.deadline[sel])
        self.serving = sel
        if arrived is not None:
            self.frontier_at_arrival[arrived] = self.frontier_base - t
        if at_horizon:
            labels.append("horizon")
        if not labels:
            labels.append("wake")
        if self.record_events:
            frontier = self.frontier_base - t
            current = (self.deadline[sel] - t) if sel is not None else frontier
            self.events.append(EventRecord(
                time=t, kind="+".join(labels), arrived=arrived,
                completed=completed, expired=tuple(expired),
                crossed=tuple(crossed_now),
                pre_work=pre_work, pre_late_mass=pre_late,
                pre_queue=pre_queue, pre_atoms=pre_atoms,
                work=self.work, queue=len(self.present),
                late_mass=self.late_mass, frontier=frontier,
                current_lead=current, serving=sel,
                serving_deadline=self.deadline[sel] if sel is not None else _INF,
                atoms=self._atoms_snapshot() if self.record_measures else None,
                arrived_count=self.arrived_count,
                arrived_work=self.arrived_work,
                busy=self.busy, idle=self.idle, late_time=self.late_time,
                reneged_work=self.reneged_work,
                reneged_count=self.reneged_count,
                late_work=self.late_work, late_count=self.late_count,
                completed_work=self.completed_work,
                completed_count=self.completed_count))
        if self.sample_times:
            self._emit_samples_through(t, include_end=True)

    def _depart(self, k: int) -> None:
        self.present.discard(k)
        if k in self.crossed:
            self.crossed.discard(k)
            self.n_late -= 1
            self.late_mass -= self.residual[k]
        self.departure[k] = self.t
        if self.serving == k:
            self.serving = None


def simulate(stream: CustomerStream, policy: PolicySpec, horizon=None,
             record_measures: bool = True, sample_times=None,
             record_events: bool = True) -> SystemTrajectory:
    """Run one policy over one stream.

    `horizon=None` runs until the system drains after the last arrival;
    a finite horizon stops exactly there and emits a final record.
    """
    if isinstance(policy, str):
        policy = PolicyKind(policy)
    if isinstance(policy, PolicyKind):
        policy = PolicySpec(policy)
    engine = _Engine(stream, policy, horizon, record_measures, sample_times,
                     record_events)
    return engine.run()


def run_policy_suite(stream: CustomerStream, horizon=None,
                     kinds: Sequence[PolicyKind] = RENEGING_KINDS,
                     random_seed: int = 0,
                     record_measures: bool = False) -> dict:
    """Run the reneging policy family over one stream.

    The deadline-ordered trajectory is always produced (it is the hybrid
    policy's companion) and returned under its own key.
    """
    for kind in kinds:
        if kind == PolicyKind.EDF_STANDARD:
            raise SimulationError("policy suite compares reneging policies")
    out: dict[PolicyKind, SystemTrajectory] = {}
    edf = simulate(stream, PolicySpec(PolicyKind.EDF_RENEGING),
                   horizon=horizon, record_measures=record_measures)
    out[PolicyKind.EDF_RENEGING] = edf
    for kind in kinds:
        if kind == PolicyKind.EDF_RENEGING:
            continue
        spec = PolicySpec(kind,
                          seed=random_seed if kind == PolicyKind.RANDOM_RENEGING else None,
                          companion=edf if kind == PolicyKind.HYBRID_RENEGING else None)
        out[kind] = simulate(stream, spec, horizon=horizon,
                             record_measures=record_measures)
    return out


def netput_workload(stream: CustomerStream, times) -> list:
    """Standard-system workload from first principles, for cross-checks.

    W(t) = (arrived work) - t + max running shortfall, evaluated at the
    given times; independent of any simulation run.
    """
    out = []
    events = list(zip(stream.arrivals, stream.services))
    for t in times:
        running = 0
        low = 0
        prev = 0
        for s, v in events:
            if s > t:
                break
            # netput drops at unit rate between arrivals
            running -= (s - prev)
            low = min(low, running)
            running += v
            prev = s
        running -= (t - prev)
        low = min(low, running)
        out.append(running - low)
    return out
