from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from gridfold.grid import Bus, GeoCoord, Generator, Load, Network, load_network
from gridfold.scenarios import HOURS, ScenarioDay

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FLAT = tuple([1.0] * HOURS)

# acceptance results, filled by test_acceptance and printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture
def four_bus():
    return load_network(DATA / "four_bus.yaml")


def single_bus(cap=20.0, cost=10.0, load=10.0, key=""):
    return Network(
        buses=(Bus("1", GeoCoord(0.0, 0.0)),),
        generators=(Generator("g", "1", "NG", cap, cost, availability_key=key),),
        loads=(Load("l", "1", "p", load),),
        name="one-bus",
    )


def flat_day(day_id="d", p=1.0, avail=None, hydro=None):
    return ScenarioDay(day_id, p, dict(avail or {}), {"p": FLAT}, dict(hydro or {}))


def desk_instance(seed, n_buses=6, n_days=1, **knobs):
    """Small synthetic instance sized for the brute-force oracle."""
    from gridfold.scenarios import SynthKnobs, synth_instance
    knobs.setdefault("max_reinforcible", 1)
    return synth_instance(seed, n_buses, n_days, SynthKnobs(**knobs))
