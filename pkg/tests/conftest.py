import os

import pytest
from hypothesis import HealthCheck, settings

from grid_ev_cosim.grid_core import (Bus, FuelType, Generator, GridCase, StaticLoadSeries,
                                     TransmissionLine)

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def flat(v):
    return (float(v),) * 24


def one_bus_case(gens, load_mw=0.0, label="t"):
    """Single-bus case; ``gens`` is a list of (fuel, p_max, [(bp, cost), ...])."""
    g = tuple(Generator(i + 1, 1, fuel, 0.0, pmax, tuple(curve)) for i, (fuel, pmax, curve)
              in enumerate(gens))
    loads = (StaticLoadSeries(1, load_mw if isinstance(load_mw, tuple) else flat(load_mw)),)
    return GridCase((Bus(1, "b1", 30.0, -97.0),), (), g, (), loads, 100.0, label)


@pytest.fixture
def two_bus_case():
    buses = (Bus(1, "A", 30.0, -97.0), Bus(2, "B", 30.1, -97.0))
    lines = (TransmissionLine(1, 1, 2, 10.0, 40.0),)
    gens = (Generator(1, 1, FuelType.COAL, 0.0, 100.0, ((100.0, 10.0),)),
            Generator(2, 2, FuelType.NATURAL_GAS, 0.0, 100.0, ((100.0, 50.0),)))
    loads = (StaticLoadSeries(2, flat(60.0)),)
    return GridCase(buses, lines, gens, (), loads, 100.0, "two-bus")
