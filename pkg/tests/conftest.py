import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from velosense.fleet_sim import initial_bike_counts
from velosense.network import build_network
from velosense.synth import SynthConfig, generate
from velosense.trips import clean_trips


@pytest.fixture
def line_net():
    """Three nodes in a row joined by two 100 m segments."""
    nodes = [(0, 40.0, -74.0), (1, 40.0, -73.999), (2, 40.0, -73.998)]
    edges = [(0, 1, 100.0), (1, 2, 100.0)]
    return build_network(nodes, edges)


@pytest.fixture
def square_chord_net():
    """A 4-cycle of 100 m sides plus a 350 m chord across one diagonal."""
    nodes = [(i, 40.0 + 0.001 * i, -74.0) for i in range(4)]
    edges = [(0, 1, 100.0), (1, 2, 100.0), (2, 3, 100.0), (3, 0, 100.0), (0, 2, 350.0)]
    return build_network(nodes, edges)


def make_scenario(grid=8, stands=8, trips=400, seed=11, block_m=300.0):
    cfg = SynthConfig(
        grid_w=grid, grid_h=grid, block_m=block_m, stand_count=stands, trips=trips, seed=seed
    )
    net, raw = generate(cfg)
    log = clean_trips(raw, net)
    return net, log


@pytest.fixture(scope="session")
def small_scenario():
    """8x8 grid, 8 stands, 400 trips: fast enough for unit tests."""
    return make_scenario()


@pytest.fixture(scope="session")
def small_fleet(small_scenario):
    _net, log = small_scenario
    return initial_bike_counts(log)


@pytest.fixture(scope="session")
def reference_scenario():
    """The 20x20 grid fixture with ~20k trips used by the acceptance gates."""
    cfg = SynthConfig(
        grid_w=20, grid_h=20, block_m=200.0, stand_count=50, trips=20_000, seed=4242
    )
    net, raw = generate(cfg)
    log = clean_trips(raw, net)
    return net, log


@pytest.fixture(scope="session")
def reference_fleet(reference_scenario):
    _net, log = reference_scenario
    return initial_bike_counts(log)
