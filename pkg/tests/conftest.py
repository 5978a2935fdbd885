from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from chamon.lattice import build_lattice
from chamon.pauli import logical_basis

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# pass/fail lines collected by the acceptance suite, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def lattices():
    return {d: build_lattice(d) for d in (4, 6, 8)}


@pytest.fixture(scope="session")
def bases(lattices, tmp_path_factory):
    cache = tmp_path_factory.mktemp("logicals")
    return {d: logical_basis(lat, cache_dir=cache) for d, lat in lattices.items()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
