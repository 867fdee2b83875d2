"""Compiled counting kernels for long steady-state runs.

The event-by-event engine in :mod:`edfq.simulator` keeps full trajectories
and is the correctness reference; these kernels keep only batch tallies so
that runs with tens of millions of arrivals finish in seconds.  They
implement the same event rules (completion wins a tie with the customer's
own deadline, expiries process before a simultaneous arrival, deadline ties
break toward the earlier arrival) and are differentially tested against the
engine.

Under the deadline-ordered reneging policy the customer in service always
has the minimum deadline among those present, so the next expiry can only
hit the server: one deadline-ordered heap drives everything.  The standard
(no-removal) system serves in the same order but keeps late customers, so
lateness is tallied from a second, lazily cleaned heap of deadlines.

Batches are formed over arrival indices after a warmup prefix, and every
tally is attributed to the batch of the customer it belongs to, no matter
when the event fires; runs drain fully after the last arrival so no batch
is truncated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*jit_args, **jit_kwargs):
        def wrap(fn):
            return fn

        return wrap


_INF = np.inf


@njit(cache=True)
def _heap_push(keys, idxs, size, key, idx):
    i = size
    keys[i] = key
    idxs[i] = idx
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] > keys[i] or (keys[p] == keys[i] and idxs[p] > idxs[i]):
            keys[p], keys[i] = keys[i], keys[p]
            idxs[p], idxs[i] = idxs[i], idxs[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(keys, idxs, size):
    top_key = keys[0]
    top_idx = idxs[0]
    size -= 1
    keys[0] = keys[size]
    idxs[0] = idxs[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        r = l + 1
        c = l
        if r < size and (keys[r] < keys[l]
                         or (keys[r] == keys[l] and idxs[r] < idxs[l])):
            c = r
        if keys[c] < keys[i] or (keys[c] == keys[i] and idxs[c] < idxs[i]):
            keys[c], keys[i] = keys[i], keys[c]
            idxs[c], idxs[i] = idxs[i], idxs[c]
            i = c
        else:
            break
    return top_key, top_idx, size


@njit(cache=True)
def _reneging_counters(arrivals, services, deadlines, w0, n_batches):
    """Deadline-ordered service with removal at expiry; batch tallies.

    Returns a (n_batches, 4) table with columns (arrived work, removed
    work, arrived count, removed count) and a totals vector (arrived work,
    removed work, completed work, arrived, removed, completed, final time).
    """
    n = arrivals.shape[0]
    span = n - w0
    bsize = span // n_batches if span >= n_batches else 1
    tal = np.zeros((n_batches, 4), np.float64)
    hk = np.empty(n, np.float64)
    hi = np.empty(n, np.int64)
    m = 0
    residual = services.copy()
    serving = -1
    serving_dl = _INF
    t = 0.0
    i = 0
    tot_aw = 0.0
    tot_rw = 0.0
    tot_cw = 0.0
    tot_r = 0
    tot_c = 0
    while True:
        t_arr = arrivals[i] if i < n else _INF
        if serving == -1:
            if m > 0:
                serving_dl, serving, m = _heap_pop(hk, hi, m)
            elif t_arr == _INF:
                break
            else:
                t = t_arr
                serving = i
                serving_dl = deadlines[i]
                tot_aw += services[i]
                if i >= w0:
                    b = (i - w0) // bsize
                    if b >= n_batches:
                        b = n_batches - 1
                    tal[b, 0] += services[i]
                    tal[b, 2] += 1.0
                i += 1
            continue
        t_comp = t + residual[serving]
        if t_comp <= serving_dl and t_comp <= t_arr:
            t = t_comp
            tot_cw += services[serving]
            tot_c += 1
            serving = -1
        elif serving_dl <= t_arr:
            r = residual[serving] - (serving_dl - t)
            t = serving_dl
            tot_rw += r
            tot_r += 1
            if serving >= w0:
                b = (serving - w0) // bsize
                if b >= n_batches:
                    b = n_batches - 1
                tal[b, 1] += r
                tal[b, 3] += 1.0
            serving = -1
        else:
            residual[serving] -= t_arr - t
            t = t_arr
            k = i
            i += 1
            tot_aw += services[k]
            if k >= w0:
                b = (k - w0) // bsize
                if b >= n_batches:
                    b = n_batches - 1
                tal[b, 0] += services[k]
                tal[b, 2] += 1.0
            if deadlines[k] < serving_dl:
                m = _heap_push(hk, hi, m, serving_dl, serving)
                serving = k
                serving_dl = deadlines[k]
            else:
                m = _heap_push(hk, hi, m, deadlines[k], k)
    totals = np.empty(7, np.float64)
    totals[0] = tot_aw
    totals[1] = tot_rw
    totals[2] = tot_cw
    totals[3] = n
    totals[4] = tot_r
    totals[5] = tot_c
    totals[6] = t
    return tal, totals


@njit(cache=True)
def _standard_counters(arrivals, services, deadlines, w0, n_batches):
    """Deadline-ordered service without removal; lateness batch tallies.

    Returns a (n_batches, 5) table with columns (arrived work, work served
    past the deadline, arrived count, late-customer count, work of
    customers finishing late) and a totals vector (arrived work, late work,
    late-finisher work, arrived, late count, completed, final time).
    """
    n = arrivals.shape[0]
    span = n - w0
    bsize = span // n_batches if span >= n_batches else 1
    tal = np.zeros((n_batches, 5), np.float64)
    hk = np.empty(n, np.float64)
    hi = np.empty(n, np.int64)
    m = 0
    ck = np.empty(n, np.float64)
    ci = np.empty(n, np.int64)
    cm = 0
    done = np.zeros(n, np.uint8)
    residual = services.copy()
    serving = -1
    serving_dl = _INF
    t = 0.0
    i = 0
    tot_aw = 0.0
    tot_lw = 0.0
    tot_lcw = 0.0
    tot_l = 0
    tot_c = 0
    while True:
        t_arr = arrivals[i] if i < n else _INF
        if serving == -1:
            if m > 0:
                serving_dl, serving, m = _heap_pop(hk, hi, m)
            elif t_arr == _INF:
                break
            else:
                t = t_arr
                serving = i
                serving_dl = deadlines[i]
                cm = _heap_push(ck, ci, cm, deadlines[i], i)
                tot_aw += services[i]
                if i >= w0:
                    b = (i - w0) // bsize
                    if b >= n_batches:
                        b = n_batches - 1
                    tal[b, 0] += services[i]
                    tal[b, 2] += 1.0
                i += 1
            continue
        t_comp = t + residual[serving]
        t_next = t_comp if t_comp <= t_arr else t_arr
        # crossings strictly before the next state change; ties resolve at
        # the event itself (a completion masks its own simultaneous
        # crossing, an arrival defers the tally by one round with the same
        # residual value)
        while cm > 0 and ck[0] < t_next:
            d, k, cm = _heap_pop(ck, ci, cm)
            if done[k] == 1:
                continue
            if k == serving:
                late = residual[serving] - (d - t)
            else:
                late = residual[k]
            tot_lw += late
            tot_l += 1
            if k >= w0:
                b = (k - w0) // bsize
                if b >= n_batches:
                    b = n_batches - 1
                tal[b, 1] += late
                tal[b, 3] += 1.0
        if t_comp <= t_arr:
            t = t_comp
            done[serving] = 1
            tot_c += 1
            if t_comp > deadlines[serving]:
                tot_lcw += services[serving]
                if serving >= w0:
                    b = (serving - w0) // bsize
                    if b >= n_batches:
                        b = n_batches - 1
                    tal[b, 4] += services[serving]
            serving = -1
        else:
            residual[serving] -= t_arr - t
            t = t_arr
            k = i
            i += 1
            cm = _heap_push(ck, ci, cm, deadlines[k], k)
            tot_aw += services[k]
            if k >= w0:
                b = (k - w0) // bsize
                if b >= n_batches:
                    b = n_batches - 1
                tal[b, 0] += services[k]
                tal[b, 2] += 1.0
            if deadlines[k] < serving_dl:
                m = _heap_push(hk, hi, m, serving_dl, serving)
                serving = k
                serving_dl = deadlines[k]
            else:
                m = _heap_push(hk, hi, m, deadlines[k], k)
    # flush any pending crossings left in a drained system
    while cm > 0:
        d, k, cm = _heap_pop(ck, ci, cm)
        if done[k] == 1:
            continue
        tot_lw += residual[k]
        tot_l += 1
        if k >= w0:
            b = (k - w0) // bsize
            if b >= n_batches:
                b = n_batches - 1
            tal[b, 1] += residual[k]
            tal[b, 3] += 1.0
    totals = np.empty(7, np.float64)
    totals[0] = tot_aw
    totals[1] = tot_lw
    totals[2] = tot_lcw
    totals[3] = n
    totals[4] = tot_l
    totals[5] = tot_c
    totals[6] = t
    return tal, totals


@dataclass
class RunSummary:
    """Batch tallies from one long run of a counting kernel.

    ``batch`` columns depend on the system: for the reneging system
    (arrived work, removed work, arrived count, removed count); for the
    standard system (arrived work, late-served work, arrived count, late
    count, late-finisher work).  ``ratio_*`` methods return per-batch
    fraction arrays suitable for batch-means confidence intervals.
    """

    reneging: bool
    n_customers: int
    warmup_count: int
    batch: np.ndarray
    totals: dict

    def _ratio(self, num_col: int, den_col: int) -> np.ndarray:
        num = self.batch[:, num_col]
        den = self.batch[:, den_col]
        out = np.full(len(num), np.nan)
        ok = den > 0
        out[ok] = num[ok] / den[ok]
        return out

    def ratio_removed_work(self) -> np.ndarray:
        if not self.reneging:
            raise ValueError("removed work is a reneging-system tally")
        return self._ratio(1, 0)

    def ratio_removed_customers(self) -> np.ndarray:
        if not self.reneging:
            raise ValueError("removed customers is a reneging-system tally")
        return self._ratio(3, 2)

    def ratio_late_work(self) -> np.ndarray:
        if self.reneging:
            raise ValueError("late work is a standard-system tally")
        return self._ratio(1, 0)

    def ratio_late_finisher_work(self) -> np.ndarray:
        if self.reneging:
            raise ValueError("late finishers are a standard-system tally")
        return self._ratio(4, 0)

    def ratio_late_customers(self) -> np.ndarray:
        if self.reneging:
            raise ValueError("late count is a standard-system tally")
        return self._ratio(3, 2)

    def overall(self, which: str) -> float:
        """Post-warmup overall fraction (ratio of batch-summed tallies)."""
        cols = {"removed_work": (1, 0), "removed_customers": (3, 2),
                "late_work": (1, 0), "late_finisher_work": (4, 0),
                "late_customers": (3, 2)}
        if which not in cols:
            raise ValueError(f"unknown tally {which!r}")
        num, den = cols[which]
        d = self.batch[:, den].sum()
        return float(self.batch[:, num].sum() / d) if d > 0 else float("nan")


def run_counters(stream, reneging: bool = True, warmup_frac: float = 0.05,
                 n_batches: int = 32) -> RunSummary:
    """Run a counting kernel over a customer stream.

    `warmup_frac` of the arrivals (by index) are excluded from the batch
    table; tallies during warmup still happen (the queue state is exact)
    but are only visible in ``totals``.
    """
    if not 0 <= warmup_frac < 1:
        raise ValueError("warmup_frac must be in [0, 1)")
    if n_batches < 2:
        raise ValueError("need at least two batches")
    arrivals = np.ascontiguousarray(stream.arrivals, dtype=np.float64)
    services = np.ascontiguousarray(stream.services, dtype=np.float64)
    deadlines = np.ascontiguousarray(stream.deadlines, dtype=np.float64)
    n = len(arrivals)
    w0 = int(warmup_frac * n)
    if n - w0 < n_batches:
        raise ValueError("stream too short for the requested batching")
    if reneging:
        tal, tot = _reneging_counters(arrivals, services, deadlines,
                                      w0, n_batches)
        totals = {"arrived_work": tot[0], "removed_work": tot[1],
                  "completed_work": tot[2], "arrived_count": int(tot[3]),
                  "removed_count": int(tot[4]),
                  "completed_count": int(tot[5]), "final_time": tot[6]}
    else:
        tal, tot = _standard_counters(arrivals, services, deadlines,
                                      w0, n_batches)
        totals = {"arrived_work": tot[0], "late_work": tot[1],
                  "late_finisher_work": tot[2], "arrived_count": int(tot[3]),
                  "late_count": int(tot[4]), "completed_count": int(tot[5]),
                  "final_time": tot[6]}
    return RunSummary(reneging=reneging, n_customers=n, warmup_count=w0,
                      batch=tal, totals=totals)


# -- reflection scans -----------------------------------------------------------


@njit(cache=True)
def _two_sided_path(increments, x0, h0):
    """Doubly reflected path from increments, with both regulators."""
    n = increments.shape[0]
    z = np.empty(n + 1, np.float64)
    up = np.empty(n + 1, np.float64)
    dn = np.empty(n + 1, np.float64)
    x = x0
    if x < 0.0:
        x = 0.0
    elif x > h0:
        x = h0
    z[0] = x
    up[0] = 0.0
    dn[0] = 0.0
    ku = 0.0
    kd = 0.0
    for i in range(n):
        x += increments[i]
        if x < 0.0:
            ku += -x
            x = 0.0
        elif x > h0:
            kd += x - h0
            x = h0
        z[i + 1] = x
        up[i + 1] = ku
        dn[i + 1] = kd
    return z, up, dn


@njit(cache=True)
def _two_sided_tallies(increments, x0, h0, warmup_steps, nbins):
    """One pass over increments: boundary outflows and occupation counts.

    Only steps at or beyond ``warmup_steps`` contribute.  The histogram
    counts post-step positions in ``nbins`` equal bins over [0, h0].
    """
    n = increments.shape[0]
    x = x0
    if x < 0.0:
        x = 0.0
    elif x > h0:
        x = h0
    ku = 0.0
    kd = 0.0
    hist = np.zeros(nbins, np.float64)
    scale = nbins / h0
    for i in range(n):
        x += increments[i]
        if x < 0.0:
            if i >= warmup_steps:
                ku += -x
            x = 0.0
        elif x > h0:
            if i >= warmup_steps:
                kd += x - h0
            x = h0
        if i >= warmup_steps:
            b = int(x * scale)
            if b >= nbins:
                b = nbins - 1
            hist[b] += 1.0
    return x, ku, kd, hist


def warm_up() -> None:
    """Force compilation of every kernel on tiny inputs."""
    a = np.array([0.5, 1.0, 1.5])
    v = np.array([0.4, 0.4, 0.4])
    d = np.array([1.0, 2.0, 2.5])
    _reneging_counters(a, v, d, 0, 2)
    _standard_counters(a, v, d, 0, 2)
    inc = np.array([0.3, -0.8, 0.6])
    _two_sided_path(inc, 0.2, 1.0)
    _two_sided_tallies(inc, 0.2, 1.0, 0, 4)
