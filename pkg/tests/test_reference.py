"""Reference-system tests: golden values, route agreement, relations."""

import random
from fractions import Fraction as F

import numpy as np
import pytest

from edfq import (CustomerStream, DistributionSpec, LeadTimeSpec, PolicyKind,
                  generate_stream, simulate)
from edfq.reference import (ReferenceError, check_reference_account,
                            check_reference_positivity,
                            check_standard_policy_free, check_work_account,
                            compare_reference_routes, compare_systems,
                            cut_decomposition, reference_from_standard,
                            simulate_reference)


@pytest.fixture(scope="module")
def fixture_cut(five_customer_standard):
    return cut_decomposition(five_customer_standard)


@pytest.fixture(scope="module")
def fixture_reference(five_customer_standard):
    return reference_from_standard(five_customer_standard)


class TestCutDecomposition:
    def test_cycles(self, fixture_cut):
        assert fixture_cut.cycle_starts == [1, 9]
        assert fixture_cut.cycle_ends[0] == 8

    def test_removal_level_path(self, fixture_cut):
        k = fixture_cut.k_at
        assert [k(t) for t in (0, 1, 2, 4, 5, 6, 7)] == [0, 0, 0, 1, 1, 1, 4]
        assert k(F(15, 2)) == 4
        assert k(8) == 4
        assert k(F(17, 2)) == F(7, 2)
        assert k(9) == 3

    def test_split_into_increase_and_decay(self, fixture_cut):
        c = fixture_cut
        assert c.k_up_at(9) == 4        # removal jumps: 1 at t=4, 3 at t=7
        assert c.k_up_at(F(13, 2)) == 1
        assert c.k_down_at(9) == 1      # idle decay on [8, 9)
        assert c.k_down_at(8) == 0
        for t in (0, 1, 4, 7, 8, F(17, 2), 9):
            assert c.k_at(t) == c.k_up_at(t) - c.k_down_at(t)

    def test_busy_time(self, fixture_cut):
        assert fixture_cut.busy_time_at(9) == 7
        assert fixture_cut.busy_time_at(F(17, 2)) == 7
        assert fixture_cut.busy_time_at(4) == 3

    def test_internal_checks_exact(self, fixture_cut):
        assert all(v == 0 for v in fixture_cut.checks.values())

    def test_requires_standard_trajectory(self, five_customer_reneging):
        with pytest.raises(ReferenceError):
            cut_decomposition(five_customer_reneging)


class TestReferenceTrajectory:
    def test_measure_path(self, fixture_reference):
        m = lambda t: fixture_reference.measure_at(t).atoms()
        assert m(2) == ((2, 3), (5, 4))
        assert m(4) == ((3, 4),)
        assert m(5) == ((1, 1), (2, 4))
        assert m(6) == ((1, 4),)
        assert m(7) == ((4, 1),)
        assert m(F(17, 2)) == ()
        assert m(9) == ((2, 1),)

    def test_work_path(self, fixture_reference):
        u = fixture_reference.work_at
        assert [u(t) for t in (1, 2, 4, 5, 6, 7, 8, 9)] == \
            [4, 7, 4, 5, 4, 1, 0, 1]

    def test_removed_work(self, fixture_reference):
        r = fixture_reference.reneged_at
        assert [r(t) for t in (3, 4, 6, 7, 9)] == [0, 1, 1, 4, 4]

    def test_left_edge(self, fixture_reference):
        assert fixture_reference.left_edge_at(5) == 1
        assert fixture_reference.left_edge_at(F(17, 2)) == float("inf")


class TestDirectRoute:
    def test_event_cascade(self, five_customer_stream,
                           five_customer_standard):
        direct = simulate_reference(five_customer_stream,
                                    five_customer_standard)
        kinds = [(e.time, e.kind) for e in direct.events]
        assert kinds == [
            (1, "arrival"), (2, "arrival"), (4, "ejection"), (5, "arrival"),
            (6, "depletion"), (7, "ejection+arrival"), (8, "depletion"),
            (9, "arrival")]
        assert direct.reneged_at(9) == 4
        assert direct.measure_at(9).atoms() == ((2, 1),)

    def test_ejections_carry_the_late_residual(self, five_customer_stream,
                                               five_customer_standard):
        direct = simulate_reference(five_customer_stream,
                                    five_customer_standard)
        ej = {e.time: e.ejected for e in direct.events if "ejection" in e.kind}
        assert ej == {4: 1, 7: 3}

    def test_routes_agree_on_fixture(self, five_customer_stream,
                                     five_customer_standard,
                                     fixture_reference):
        direct = simulate_reference(five_customer_stream,
                                    five_customer_standard)
        worst = compare_reference_routes(fixture_reference, direct)
        assert all(v == 0 for v in worst.values())


class TestPathwiseRelations:
    def test_fixture_relations_hold_exactly(self, five_customer_reneging,
                                            five_customer_standard,
                                            fixture_reference):
        rep = compare_systems(five_customer_reneging, five_customer_standard,
                              fixture_reference, keep_rows=True)
        assert rep.ok(tol=0)
        assert len(rep.rows) == len(set(
            five_customer_reneging.event_times()
            + five_customer_standard.event_times()))

    def test_accounts_balance_exactly(self, five_customer_reneging,
                                      five_customer_standard,
                                      fixture_reference):
        assert check_work_account(five_customer_reneging) == 0
        assert check_work_account(five_customer_standard) == 0
        assert check_reference_account(fixture_reference) == 0
        assert check_reference_positivity(fixture_reference) == 0
        assert check_standard_policy_free(five_customer_standard) == 0

    def test_comparison_csv(self, tmp_path, five_customer_reneging,
                            five_customer_standard):
        rep = compare_systems(five_customer_reneging, five_customer_standard,
                              keep_rows=True)
        p = tmp_path / "relations.csv"
        rep.to_csv(p)
        assert p.read_text().startswith("time,reneging_work,reference_work")


def _random_exact_stream(rng: random.Random, n=35):
    return CustomerStream(
        gaps=[F(rng.randint(1, 3)) for _ in range(n)],
        services=[F(rng.randint(1, 4)) for _ in range(n)],
        leads=[F(rng.randint(1, 6)) for _ in range(n)],
        exact=True)


class TestRandomStreams:
    def test_routes_agree_exactly_on_tie_rich_streams(self):
        rng = random.Random(123)
        for _ in range(8):
            stream = _random_exact_stream(rng)
            std = simulate(stream, PolicyKind.EDF_STANDARD)
            phi = reference_from_standard(std)
            direct = simulate_reference(stream, std)
            worst = compare_reference_routes(phi, direct)
            assert all(v == 0 for v in worst.values()), worst

    def test_relations_hold_exactly_on_tie_rich_streams(self):
        rng = random.Random(321)
        for _ in range(8):
            stream = _random_exact_stream(rng)
            std = simulate(stream, PolicyKind.EDF_STANDARD)
            ren = simulate(stream, PolicyKind.EDF_RENEGING)
            rep = compare_systems(ren, std)
            assert rep.ok(tol=0), rep.violations

    def test_float_streams_agree_to_rounding(self):
        srng = np.random.default_rng(999)
        for _ in range(6):
            stream = generate_stream(
                seed=int(srng.integers(1, 2**31)), count=150,
                interarrival=DistributionSpec.exponential(rate=1.0),
                service=DistributionSpec.uniform(lo=0.2, hi=2.0),
                lead=LeadTimeSpec(DistributionSpec.uniform(lo=0.5, hi=6)))
            std = simulate(stream, PolicyKind.EDF_STANDARD)
            ren = simulate(stream, PolicyKind.EDF_RENEGING)
            phi = reference_from_standard(std)
            direct = simulate_reference(stream, std)
            worst = compare_reference_routes(phi, direct)
            assert all(v <= 1e-9 for v in worst.values()), worst
            rep = compare_systems(ren, std, phi)
            assert rep.ok(tol=1e-9), rep.violations
            assert check_reference_account(phi) <= 1e-9

    def test_every_ejection_is_a_standard_zero_hit(self):
        # reference ejections may only happen when some standard atom
        # sits at lead zero, i.e. at a crossing epoch of the companion
        rng = random.Random(55)
        for _ in range(5):
            stream = _random_exact_stream(rng)
            std = simulate(stream, PolicyKind.EDF_STANDARD)
            direct = simulate_reference(stream, std)
            for e in direct.events:
                if "ejection" in e.kind and e.ejected > 0:
                    assert std.measure_at(e.time).mass_at(0) >= 0
                    pre = std.measure_pre(
                        std.event_times().index(e.time)) \
                        if e.time in std.event_times() else None
                    # the epoch must appear among the standard epochs
                    assert e.time in std.event_times()
