"""Input primitives: distributions, customer streams, traffic parameters.

Streams are generated from three mutually independent substreams (one each
for interarrival gaps, service requirements, and initial lead times) spawned
from a single root seed, so any run is reproducible from that one integer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

_INF = float("inf")


class PrimitivesError(ValueError):
    """Raised on invalid distribution or stream parameters."""


@dataclass(frozen=True)
class DistributionSpec:
    """One of the supported nonnegative distributions.

    Families: ``exponential`` (rate), ``deterministic`` (value),
    ``uniform`` (lo, hi).
    """

    family: str
    rate: float = 0.0
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.family == "exponential":
            if not self.rate > 0:
                raise PrimitivesError("exponential rate must be > 0")
        elif self.family == "deterministic":
            if not self.value > 0:
                raise PrimitivesError("deterministic value must be > 0")
        elif self.family == "uniform":
            if not (0 <= self.lo <= self.hi) or self.hi <= 0:
                raise PrimitivesError("uniform needs 0 <= lo <= hi, hi > 0")
        else:
            raise PrimitivesError(f"unknown distribution family {self.family!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls("exponential", rate=rate)

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls("deterministic", value=value)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DistributionSpec":
        return cls("uniform", lo=lo, hi=hi)

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse e.g. ``exponential rate=0.5`` or ``uniform lo=5 hi=200``."""
        parts = text.split()
        if not parts:
            raise PrimitivesError("empty distribution spec")
        family, kv = parts[0], {}
        for tok in parts[1:]:
            if "=" not in tok:
                raise PrimitivesError(f"bad distribution token {tok!r}")
            k, v = tok.split("=", 1)
            try:
                kv[k] = float(v)
            except ValueError as e:
                raise PrimitivesError(f"bad numeric value in {tok!r}") from e
        try:
            if family == "exponential":
                return cls.exponential(kv.pop("rate"))
            if family == "deterministic":
                return cls.deterministic(kv.pop("value"))
            if family == "uniform":
                return cls.uniform(kv.pop("lo"), kv.pop("hi"))
        except KeyError as e:
            raise PrimitivesError(f"missing parameter {e} for {family}") from e
        raise PrimitivesError(f"unknown distribution family {family!r}")

    def unparse(self) -> str:
        if self.family == "exponential":
            return f"exponential rate={self.rate!r}"
        if self.family == "deterministic":
            return f"deterministic value={self.value!r}"
        return f"uniform lo={self.lo!r} hi={self.hi!r}"

    # -- moments -----------------------------------------------------------

    @property
    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "deterministic":
            return self.value
        return 0.5 * (self.lo + self.hi)

    @property
    def std(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "deterministic":
            return 0.0
        return (self.hi - self.lo) / math.sqrt(12.0)

    @property
    def second_moment(self) -> float:
        return self.std ** 2 + self.mean ** 2

    @property
    def support_lo(self) -> float:
        if self.family == "exponential":
            return 0.0
        if self.family == "deterministic":
            return self.value
        return self.lo

    @property
    def support_hi(self) -> float:
        if self.family == "exponential":
            return _INF
        if self.family == "deterministic":
            return self.value
        return self.hi

    def cdf(self, y: float) -> float:
        if self.family == "exponential":
            return 0.0 if y < 0 else 1.0 - math.exp(-self.rate * y)
        if self.family == "deterministic":
            return 1.0 if y >= self.value else 0.0
        if y <= self.lo:
            return 0.0
        if y >= self.hi:
            return 1.0
        return (y - self.lo) / (self.hi - self.lo)

    def mgf(self, theta: float) -> float:
        """E[exp(theta X)]; errors when the transform diverges."""
        if self.family == "exponential":
            if theta >= self.rate:
                raise PrimitivesError(
                    f"mgf diverges: theta={theta} >= rate={self.rate}")
            return self.rate / (self.rate - theta)
        if self.family == "deterministic":
            return math.exp(theta * self.value)
        if theta == 0.0:
            return 1.0
        return (math.exp(theta * self.hi) - math.exp(theta * self.lo)) / (
            theta * (self.hi - self.lo))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(1.0 / self.rate, size)
        if self.family == "deterministic":
            return np.full(size, self.value)
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class LeadTimeSpec:
    """Initial-lead-time distribution; support must be positive and bounded."""

    dist: DistributionSpec

    def __post_init__(self):
        if not self.dist.support_lo > 0:
            raise PrimitivesError(
                "lead-time support must be strictly positive "
                f"(lower endpoint {self.dist.support_lo})")
        if not self.dist.support_hi < _INF:
            raise PrimitivesError("lead-time support must be bounded above")

    @property
    def y_lo(self) -> float:
        return self.dist.support_lo

    @property
    def y_hi(self) -> float:
        return self.dist.support_hi

    @property
    def mean(self) -> float:
        return self.dist.mean

    def cdf(self, y: float) -> float:
        return self.dist.cdf(y)

    @classmethod
    def parse(cls, text: str) -> "LeadTimeSpec":
        return cls(DistributionSpec.parse(text))


@dataclass(frozen=True)
class CustomerRecord:
    """One customer: gap, service requirement, initial lead, derived times."""

    index: int
    gap: object       # interarrival gap ahead of this customer
    service: object   # service requirement (work)
    lead: object      # initial lead time
    arrival: object   # absolute arrival time
    deadline: object  # arrival + lead


class CustomerStream:
    """A finite arrival stream.

    Holds the gap/service/lead sequences; arrival times and deadlines are
    derived lazily.  Float streams use numpy arrays; exact streams (ints or
    ``fractions.Fraction``) use plain tuples and support exact arithmetic
    end to end.
    """

    def __init__(self, gaps, services, leads, y_hi=None, exact: bool = False):
        if exact:
            self.gaps = tuple(gaps)
            self.services = tuple(services)
            self.leads = tuple(leads)
        else:
            self.gaps = np.asarray(gaps, dtype=np.float64)
            self.services = np.asarray(services, dtype=np.float64)
            self.leads = np.asarray(leads, dtype=np.float64)
        n = len(self.gaps)
        if len(self.services) != n or len(self.leads) != n:
            raise PrimitivesError("gap/service/lead sequences differ in length")
        for name, seq in (("gap", self.gaps), ("service", self.services),
                          ("lead", self.leads)):
            ok = all(x > 0 for x in seq) if exact else bool(np.all(seq > 0))
            if not ok:
                raise PrimitivesError(f"every {name} must be > 0")
        self.exact = exact
        if y_hi is None:
            y_hi = max(self.leads) if n else 0
        self.y_hi = y_hi
        self._arrivals = None
        self._deadlines = None

    def __len__(self) -> int:
        return len(self.gaps)

    @property
    def arrivals(self):
        if self._arrivals is None:
            if self.exact:
                self._arrivals = tuple(itertools.accumulate(self.gaps))
            else:
                self._arrivals = np.cumsum(self.gaps)
        return self._arrivals

    @property
    def deadlines(self):
        if self._deadlines is None:
            if self.exact:
                self._deadlines = tuple(
                    s + l for s, l in zip(self.arrivals, self.leads))
            else:
                self._deadlines = self.arrivals + self.leads
        return self._deadlines

    def total_work(self):
        if self.exact:
            return sum(self.services)
        return float(np.sum(self.services))

    def records(self) -> Iterator[CustomerRecord]:
        arr, dl = self.arrivals, self.deadlines
        for i in range(len(self)):
            yield CustomerRecord(i, self.gaps[i], self.services[i],
                                 self.leads[i], arr[i], dl[i])

    def truncate_to_horizon(self, horizon) -> "CustomerStream":
        """Drop customers arriving strictly after the horizon."""
        arr = self.arrivals
        if self.exact:
            n = sum(1 for s in arr if s <= horizon)
        else:
            n = int(np.searchsorted(arr, horizon, side="right"))
        return CustomerStream(self.gaps[:n], self.services[:n], self.leads[:n],
                              y_hi=self.y_hi, exact=self.exact)


def rationalize(stream: CustomerStream) -> CustomerStream:
    """Exact-arithmetic copy of a stream.

    Float inputs map to their exact binary fractions, so the copy runs the
    same sample path with rational arithmetic end to end.
    """
    if stream.exact:
        return stream

    def conv(xs):
        return [Fraction(float(x)) for x in xs]

    return CustomerStream(conv(stream.gaps), conv(stream.services),
                          conv(stream.leads),
                          y_hi=Fraction(float(stream.y_hi)), exact=True)


def substreams(seed: int, n: int) -> list[np.random.Generator]:
    """Spawn n mutually independent generators from one root seed."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(n)]


def generate_stream(seed: int,
                    interarrival: DistributionSpec,
                    service: DistributionSpec,
                    lead: LeadTimeSpec,
                    count: Optional[int] = None,
                    horizon: Optional[float] = None) -> CustomerStream:
    """Sample a stream of customers from a root seed.

    Exactly one of ``count`` and ``horizon`` must be given.  With ``horizon``
    the stream covers every arrival at or before that time.
    """
    if (count is None) == (horizon is None):
        raise PrimitivesError("specify exactly one of count or horizon")
    gap_rng, svc_rng, lead_rng = substreams(seed, 3)
    if count is not None:
        if count < 0:
            raise PrimitivesError("count must be >= 0")
        gaps = interarrival.sample(gap_rng, count)
    else:
        if horizon <= 0:
            raise PrimitivesError("horizon must be > 0")
        chunks = []
        total = 0.0
        est = max(1024, int(horizon / interarrival.mean * 1.05) + 64)
        while total <= horizon:
            chunk = interarrival.sample(gap_rng, est)
            chunks.append(chunk)
            total += float(np.sum(chunk))
            est = 1024
        gaps = np.concatenate(chunks)
        stop = int(np.searchsorted(np.cumsum(gaps), horizon, side="right"))
        gaps = gaps[:stop]
        count = len(gaps)
    services = service.sample(svc_rng, count)
    leads = lead.dist.sample(lead_rng, count)
    return CustomerStream(gaps, services, leads, y_hi=lead.y_hi)


@dataclass(frozen=True)
class TrafficParams:
    """First/second-order traffic descriptors of an arrival/service pair."""

    lam: float     # arrival rate
    mu: float      # service rate
    rho: float     # traffic intensity lam/mu
    alpha: float   # interarrival standard deviation
    beta: float    # service standard deviation
    sigma2: float  # diffusion variance lam * (alpha^2 + beta^2)
    theta: float   # exponential tilt 2 (1 - rho) / sigma2


def traffic_params(interarrival: DistributionSpec,
                   service: DistributionSpec) -> TrafficParams:
    lam = 1.0 / interarrival.mean
    mu = 1.0 / service.mean
    rho = lam / mu
    alpha = interarrival.std
    beta = service.std
    sigma2 = lam * (alpha ** 2 + beta ** 2)
    if sigma2 <= 0:
        raise PrimitivesError("degenerate traffic: sigma2 must be > 0")
    theta = 2.0 * (1.0 - rho) / sigma2
    return TrafficParams(lam=lam, mu=mu, rho=rho, alpha=alpha, beta=beta,
                         sigma2=sigma2, theta=theta)
