"""Tests for distributions, customer streams, and traffic parameters."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from edfq import (CustomerStream, DistributionSpec, LeadTimeSpec,
                  PrimitivesError, TrafficParams, generate_stream,
                  traffic_params)


class TestDistributionSpec:
    def test_exponential_moments(self):
        d = DistributionSpec.exponential(rate=0.5)
        assert d.mean == pytest.approx(2.0)
        assert d.second_moment == pytest.approx(8.0)
        assert d.std == pytest.approx(2.0)
        assert d.cdf(0) == 0
        assert d.cdf(2.0) == pytest.approx(1 - math.exp(-1))

    def test_deterministic_moments(self):
        d = DistributionSpec.deterministic(value=1.96)
        assert d.mean == 1.96
        assert d.second_moment == pytest.approx(1.96**2)
        assert d.std == 0
        assert d.cdf(1.95) == 0
        assert d.cdf(1.96) == 1

    def test_uniform_moments(self):
        d = DistributionSpec.uniform(lo=5, hi=20)
        assert d.mean == pytest.approx(12.5)
        assert d.std == pytest.approx(15 / math.sqrt(12))
        assert d.cdf(5) == 0
        assert d.cdf(20) == 1
        assert d.cdf(12.5) == pytest.approx(0.5)

    def test_mgf(self):
        d = DistributionSpec.exponential(rate=1.0)
        assert d.mgf(0.5) == pytest.approx(2.0)
        with pytest.raises(PrimitivesError):
            d.mgf(1.0)    # divergent at the rate
        u = DistributionSpec.uniform(lo=1, hi=2)
        th = 0.3
        assert u.mgf(th) == pytest.approx(
            (math.exp(2 * th) - math.exp(th)) / th)
        assert u.mgf(0.0) == 1.0
        det = DistributionSpec.deterministic(value=2.0)
        assert det.mgf(0.25) == pytest.approx(math.exp(0.5))

    def test_parse_unparse_round_trip(self):
        for text in ["exponential rate=0.5", "deterministic value=1.96",
                     "uniform lo=5 hi=20"]:
            d = DistributionSpec.parse(text)
            assert DistributionSpec.parse(d.unparse()) == d

    def test_parse_rejects_bad_input(self):
        with pytest.raises(PrimitivesError):
            DistributionSpec.parse("normal mu=0 sigma=1")
        with pytest.raises(PrimitivesError):
            DistributionSpec.parse("uniform lo=3 hi=2")
        with pytest.raises(PrimitivesError):
            DistributionSpec.parse("exponential rate=-1")

    def test_sampling_matches_mean(self):
        rng = np.random.default_rng(42)
        for d in [DistributionSpec.exponential(rate=0.8),
                  DistributionSpec.uniform(lo=1, hi=3),
                  DistributionSpec.deterministic(value=2.5)]:
            x = d.sample(rng, 200_000)
            assert x.min() >= 0
            assert x.mean() == pytest.approx(d.mean, rel=0.02)


class TestLeadTimeSpec:
    def test_requires_bounded_positive_support(self):
        LeadTimeSpec(DistributionSpec.uniform(lo=5, hi=20))
        LeadTimeSpec(DistributionSpec.deterministic(value=3))
        with pytest.raises(PrimitivesError):
            LeadTimeSpec(DistributionSpec.exponential(rate=1.0))
        with pytest.raises(PrimitivesError):
            LeadTimeSpec(DistributionSpec.uniform(lo=0, hi=5))

    def test_bounds(self):
        lt = LeadTimeSpec(DistributionSpec.uniform(lo=5, hi=20))
        assert lt.y_lo == 5
        assert lt.y_hi == 20
        assert lt.mean == pytest.approx(12.5)


class TestCustomerStream:
    def test_arrivals_and_deadlines(self, five_customer_stream):
        s = five_customer_stream
        assert list(s.arrivals) == [1, 2, 5, 7, 9]
        assert list(s.deadlines) == [4, 7, 6, 11, 10]
        assert s.total_work() == 12
        assert len(s) == 5

    def test_records(self, five_customer_stream):
        recs = list(five_customer_stream.records())
        assert recs[2].arrival == 5
        assert recs[2].deadline == 6
        assert recs[2].service == 2

    def test_validation(self):
        with pytest.raises(PrimitivesError):
            CustomerStream([1, -1], [1, 1], [1, 1])
        with pytest.raises(PrimitivesError):
            CustomerStream([1], [1, 2], [1])
        with pytest.raises(PrimitivesError):
            CustomerStream([1], [0], [1])

    def test_truncate_to_horizon(self, five_customer_stream):
        s = five_customer_stream.truncate_to_horizon(F(6))
        assert len(s) == 3
        assert list(s.arrivals) == [1, 2, 5]

    def test_generate_by_count_is_reproducible(self):
        kw = dict(interarrival=DistributionSpec.exponential(rate=0.5),
                  service=DistributionSpec.exponential(rate=1.0),
                  lead=LeadTimeSpec(DistributionSpec.uniform(lo=5, hi=20)))
        a = generate_stream(seed=7, count=500, **kw)
        b = generate_stream(seed=7, count=500, **kw)
        c = generate_stream(seed=8, count=500, **kw)
        assert np.array_equal(a.gaps, b.gaps)
        assert np.array_equal(a.services, b.services)
        assert np.array_equal(a.leads, b.leads)
        assert not np.array_equal(a.gaps, c.gaps)

    def test_generate_by_horizon(self):
        s = generate_stream(
            seed=3, horizon=1000.0,
            interarrival=DistributionSpec.exponential(rate=0.5),
            service=DistributionSpec.exponential(rate=1.0),
            lead=LeadTimeSpec(DistributionSpec.uniform(lo=5, hi=20)))
        assert s.arrivals[-1] <= 1000.0 < s.arrivals[-1] + 60
        assert len(s) > 300

    def test_generate_requires_exactly_one_extent(self):
        kw = dict(interarrival=DistributionSpec.exponential(rate=1),
                  service=DistributionSpec.exponential(rate=2),
                  lead=LeadTimeSpec(DistributionSpec.uniform(lo=1, hi=2)))
        with pytest.raises(PrimitivesError):
            generate_stream(seed=1, **kw)
        with pytest.raises(PrimitivesError):
            generate_stream(seed=1, count=10, horizon=10.0, **kw)

    def test_lead_bounds_respected(self):
        s = generate_stream(
            seed=11, count=20_000,
            interarrival=DistributionSpec.exponential(rate=1.0),
            service=DistributionSpec.exponential(rate=2.0),
            lead=LeadTimeSpec(DistributionSpec.uniform(lo=5, hi=20)))
        assert s.leads.min() >= 5
        assert s.leads.max() <= 20
        assert s.y_hi == 20


class TestTrafficParams:
    def test_mm1_case(self):
        p = traffic_params(DistributionSpec.exponential(rate=0.5),
                           DistributionSpec.exponential(rate=1 / 1.96))
        assert p.lam == pytest.approx(0.5)
        assert p.rho == pytest.approx(0.98)
        # squared coefficient scaling: lam * (var_U + var_V)
        assert p.sigma2 == pytest.approx(0.5 * (4 + 1.96**2))
        assert p.theta == pytest.approx(2 * (1 - 0.98) / p.sigma2)

    def test_md1_case(self):
        p = traffic_params(DistributionSpec.exponential(rate=0.5),
                           DistributionSpec.deterministic(value=1.96))
        assert p.rho == pytest.approx(0.98)
        assert p.sigma2 == pytest.approx(2.0)
        assert p.theta == pytest.approx(0.02)

    def test_critical_load_has_zero_theta(self):
        p = traffic_params(DistributionSpec.exponential(rate=1.0),
                           DistributionSpec.deterministic(value=1.0))
        assert p.rho == pytest.approx(1.0)
        assert p.theta == pytest.approx(0.0)
