"""Shared fixtures and the acceptance-verdict summary hook."""

import sys
from fractions import Fraction as F

import pytest

from edfq import CustomerStream, PolicyKind, simulate


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", []) if module else []
    if lines:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria", sep="-")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def five_customer_stream() -> CustomerStream:
    """Five customers with unit-friendly integer data, exact arithmetic.

    Interarrival gaps (1, 1, 3, 2, 2) put arrivals at t = 1, 2, 5, 7, 9;
    services (4, 4, 2, 1, 1); initial lead times (3, 5, 1, 4, 1) put
    deadlines at t = 4, 7, 6, 11, 10.  Every queue quantity on [0, 9] has
    been worked out by hand for this stream; the tests below pin those
    values exactly.
    """
    return CustomerStream(
        gaps=[F(1), F(1), F(3), F(2), F(2)],
        services=[F(4), F(4), F(2), F(1), F(1)],
        leads=[F(3), F(5), F(1), F(4), F(1)],
        exact=True,
    )


@pytest.fixture(scope="session")
def five_customer_standard(five_customer_stream):
    return simulate(five_customer_stream, PolicyKind.EDF_STANDARD, horizon=F(9))


@pytest.fixture(scope="session")
def five_customer_reneging(five_customer_stream):
    return simulate(five_customer_stream, PolicyKind.EDF_RENEGING, horizon=F(9))
