"""Audit battery plumbing and the structural checks it aggregates."""

from fractions import Fraction

import pytest

from edfq.audit import (AuditReport, audit_stream, policy_optimality_check,
                        removal_curve, run_audit_battery, tie_rich_stream)
from edfq.primitives import (DistributionSpec, LeadTimeSpec, generate_stream)
from edfq.simulator import PolicyKind, simulate

ROUTE_KEYS = {"route_measure", "route_work", "route_reneged",
              "route_left_edge"}
RELATION_KEYS = {"reneging_below_reference", "reference_removes_less",
                 "reference_removes_less_per_cycle",
                 "reference_below_standard", "left_edge_below_frontier",
                 "work_difference_bound", "frontier_unit_drift",
                 "lead_in_service_below_frontier"}
ACCOUNT_KEYS = {"account_reneging", "account_standard", "account_reference",
                "reference_positive_leads", "standard_policy_free"}
CUT_KEYS = {"cut_cycle_end_identity", "cut_cycle_start_continuity",
            "cut_idle_tracks_workload", "cut_decomposition"}
POLICY_KEYS = {"removal_optimality_vs_fifo_reneging",
               "removal_optimality_vs_lifo_reneging",
               "removal_optimality_vs_random_reneging",
               "removal_optimality_vs_hybrid_reneging"}


def small_stream(seed=0, count=120):
    return generate_stream(
        seed, DistributionSpec.parse("exponential rate=0.85"),
        DistributionSpec.parse("exponential rate=1.0"),
        LeadTimeSpec.parse("uniform lo=0.4 hi=5"), count=count)


class TestTieRichStream:
    def test_exact_and_reproducible(self):
        s = tie_rich_stream(3, 50)
        t = tie_rich_stream(3, 50)
        assert s.exact and len(s) == 50
        assert all(isinstance(g, Fraction) for g in s.gaps)
        assert s.gaps == t.gaps and s.leads == t.leads

    def test_produces_simultaneous_events(self):
        s = tie_rich_stream(3, 80)
        arrivals = set(s.arrivals)
        deadlines = set(s.deadlines)
        assert arrivals & deadlines  # collisions by construction

    def test_denominator(self):
        s = tie_rich_stream(1, 30, denominator=4)
        assert all(g.denominator in (1, 2, 4) for g in s.gaps)


class TestRemovalCurve:
    def test_five_customer_fixture(self, five_customer_reneging):
        times, vals = removal_curve(five_customer_reneging)
        assert [float(t) for t in times] == [4.0, 6.0, 7.0]
        assert [float(v) for v in vals] == [1.0, 2.0, 4.0]


class TestPolicyOptimality:
    def test_deadline_order_never_removes_more(self):
        out = policy_optimality_check(small_stream(7), random_seed=1)
        assert set(out) == {"fifo_reneging", "lifo_reneging",
                            "random_reneging", "hybrid_reneging"}
        assert all(v == 0.0 for v in out.values())

    def test_fixture_values(self, five_customer_stream):
        out = policy_optimality_check(five_customer_stream)
        assert all(v == 0.0 for v in out.values())


class TestAuditStream:
    def test_full_key_set(self):
        checks = audit_stream(small_stream(11))
        assert set(checks) == (ROUTE_KEYS | RELATION_KEYS | ACCOUNT_KEYS
                               | CUT_KEYS | POLICY_KEYS)
        assert all(v <= 1e-9 for v in checks.values())

    def test_policies_optional(self):
        checks = audit_stream(small_stream(11), include_policies=False)
        assert not (set(checks) & POLICY_KEYS)

    def test_exact_stream_identically_zero(self):
        checks = audit_stream(tie_rich_stream(5, 60))
        assert all(v == 0.0 for v in checks.values())


class TestAuditReport:
    def test_merge_and_failures(self):
        rep = AuditReport(n_streams=2, tolerance=1e-9)
        rep.merge({"a": 0.0, "b": 5e-10}, label="s0")
        rep.merge({"a": 2e-9, "b": 1e-10}, label="s1")
        assert rep.worst == {"a": 2e-9, "b": 5e-10}
        assert not rep.ok
        assert rep.failures == [("s1", "a", 2e-9)]
        lines = rep.lines()
        assert any("FAIL" in ln for ln in lines)
        assert any(" ok" in ln for ln in lines)

    def test_zero_only_keys_reported(self):
        rep = AuditReport(n_streams=1)
        rep.merge({"zero_check": 0.0}, label="s0")
        assert "zero_check" in rep.worst
        assert rep.ok


class TestBattery:
    def test_mixed_corpus(self):
        streams = [small_stream(i, 80) for i in range(2)]
        streams.append(tie_rich_stream(9, 40))
        rep = run_audit_battery(streams, random_seed=2)
        assert rep.ok
        assert rep.n_streams == 3
        assert set(rep.worst) == (ROUTE_KEYS | RELATION_KEYS | ACCOUNT_KEYS
                                  | CUT_KEYS | POLICY_KEYS)

    def test_horizon_factor(self):
        streams = [small_stream(3, 60), tie_rich_stream(4, 40)]
        rep = run_audit_battery(streams, horizon_factor=0.5,
                                include_policies=False)
        assert rep.ok
