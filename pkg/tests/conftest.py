import numpy as np
import pytest

from daiscope.design import BoundContext, sweep
from daiscope.geometry import Scenario
from daiscope.signal_model import SystemConfig, default_gains

ALICE = (3.0, 0.0)
EVE = (10.0, 5.0)
SCATTERERS = ((8.87, -6.05), (7.44, 8.53))


def reference_scenario(cfg: SystemConfig, scatterers=SCATTERERS) -> Scenario:
    gains = default_gains(ALICE, EVE, scatterers, cfg)
    return Scenario(ALICE, EVE, scatterers, gains)


def random_scenario(rng: np.random.Generator, cfg: SystemConfig, n_scatterers: int = 2) -> Scenario:
    """Alice near the origin, Eve and scatterers in the right half-plane."""
    alice = rng.uniform(-1.0, 1.0, size=2)
    eve = alice + np.array([rng.uniform(5.0, 15.0), rng.uniform(-6.0, 6.0)])
    scatterers = [alice + np.array([rng.uniform(2.0, 12.0), rng.uniform(-10.0, 10.0)])
                  for _ in range(n_scatterers)]
    gains = default_gains(alice, eve, scatterers, cfg, seed=int(rng.integers(2**32)))
    return Scenario(alice, eve, tuple(scatterers), gains)


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def scenario(cfg):
    return reference_scenario(cfg)


@pytest.fixture(scope="session")
def ctx(scenario, cfg):
    return BoundContext.build(scenario, cfg)


@pytest.fixture(scope="session")
def full_grid(scenario, cfg, ctx):
    return sweep(scenario, cfg, ctx=ctx)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
