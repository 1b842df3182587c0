"""Fleet sizing and trip replay.

Two pieces: derive the minimal per-stand initial bike counts that keep every
stand's balance non-negative over the horizon, then replay the trip log
minute by minute assigning physical bikes to trips. Replay optionally biases
bike selection toward sensor-equipped bikes (guided selection accepted with
probability beta).

RNG stream discipline, per trip in log order: one uniform draw for the
guidance-acceptance test, then one bounded draw indexing into the chosen
idle pool. Both draws happen for every trip regardless of branch, so a
beta=0 run consumes the same stream as an unguided run and reproduces it
bit for bit under the same seed. Generator: numpy PCG64.
"""

from __future__ import annotations

import json
from bisect import insort
from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePlanError, MalformedInputError
from .trips import TripLog, traversal_times

TRAJ_FORMAT = "velosense-traj-v1"
GENERATOR_NAME = "numpy-pcg64"


@dataclass
class FleetPlan:
    """Initial bike count and bike ids per stand. Bike ids are dense and global."""

    b: list[int]
    bikes: list[list[int]]

    @property
    def num_bikes(self) -> int:
        return sum(self.b)

    def home_stands(self) -> np.ndarray:
        """home_stands()[bike] is the stand the bike starts the day at."""
        homes = np.empty(self.num_bikes, dtype=np.int64)
        for stand, ids in enumerate(self.bikes):
            for bike in ids:
                homes[bike] = stand
        return homes


@dataclass
class BikeTrajectory:
    bike: int
    home: int
    served: list[str]  # trip ids in service order
    events: list[tuple[int, int]]  # (segment, enter minute)


@dataclass(frozen=True)
class SimConfig:
    seed: int
    beta: float = 0.0
    equipped: frozenset[int] = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


def initial_bike_counts(log: TripLog) -> FleetPlan:
    """Minimal initial bikes per stand so replay never drives a stand negative.

    Replays the net flow at each stand starting from zero; the deployment is
    the depth of the worst deficit. Within a minute arrivals count before
    departures, so a bike returned at t can leave again at t.
    """
    t0, t_end = log.horizon
    width = t_end - t0 + 1
    flow = np.zeros((log.num_stands, width), dtype=np.int64)
    for trip in log.trips:
        flow[trip.origin, trip.start_min - t0] -= 1
        if trip.end_min <= t_end:  # returns after the horizon never help
            flow[trip.dest, trip.end_min - t0] += 1
    balance = np.cumsum(flow, axis=1)
    b = np.maximum(0, -balance.min(axis=1)) if width > 0 else np.zeros(log.num_stands, int)

    bikes: list[list[int]] = []
    next_id = 0
    for count in b:
        bikes.append(list(range(next_id, next_id + int(count))))
        next_id += int(count)
    return FleetPlan([int(x) for x in b], bikes)


def simulate(log: TripLog, plan: FleetPlan, cfg: SimConfig) -> list[BikeTrajectory]:
    """Replay the log minute by minute, returning one trajectory per bike.

    Each minute releases finished bikes first, then serves that minute's
    trips in log order. A trip is served by a uniformly chosen idle bike at
    its origin stand, preferring an idle equipped bike when the guidance
    draw falls below cfg.beta and one is available. With beta=0 or no
    equipped bikes this is plain unguided replay.
    """
    if len(plan.b) != log.num_stands:
        raise MalformedInputError(
            f"plan covers {len(plan.b)} stands, log has {log.num_stands}"
        )
    t0, t_end = log.horizon
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    equipped = frozenset(cfg.equipped)

    idle: list[list[int]] = [sorted(ids) for ids in plan.bikes]
    returns: dict[int, list[tuple[int, int]]] = {}
    trips_at: dict[int, list] = {}
    for trip in log.trips:
        trips_at.setdefault(trip.start_min, []).append(trip)

    served: dict[int, list] = {}
    for minute in range(t0, t_end + 1):
        for bike, stand in returns.pop(minute, ()):
            insort(idle[stand], bike)
        for trip in trips_at.get(minute, ()):
            u = rng.random()
            pool = idle[trip.origin]
            if not pool:
                raise InfeasiblePlanError(
                    f"no idle bike at stand {trip.origin} at minute {minute} "
                    f"for trip {trip.id}"
                )
            if u < cfg.beta:
                equipped_pool = [b for b in pool if b in equipped]
                chosen_pool = equipped_pool if equipped_pool else pool
            else:
                chosen_pool = pool
            bike = chosen_pool[int(rng.integers(0, len(chosen_pool)))]
            pool.remove(bike)
            served.setdefault(bike, []).append(trip)
            returns.setdefault(trip.end_min, []).append((bike, trip.dest))

    homes = plan.home_stands()
    trajectories = []
    for bike in range(plan.num_bikes):
        events: list[tuple[int, int]] = []
        ids: list[str] = []
        for trip in served.get(bike, ()):
            ids.append(trip.id)
            events.extend(traversal_times(trip, log.speed_m_per_min))
        trajectories.append(BikeTrajectory(bike, int(homes[bike]), ids, events))
    return trajectories


def equipped_set(plan: FleetPlan, sensors_per_stand) -> frozenset[int]:
    """Equip the first n_s bikes of each stand, given an allocation vector."""
    out = []
    for stand, n in enumerate(sensors_per_stand):
        if n > len(plan.bikes[stand]):
            raise MalformedInputError(
                f"stand {stand}: {n} sensors exceed {len(plan.bikes[stand])} bikes"
            )
        out.extend(plan.bikes[stand][: int(n)])
    return frozenset(out)


FLEET_FORMAT = "velosense-fleet-v1"


def save_fleet(plan: FleetPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"format": FLEET_FORMAT, "b": plan.b}, fh)


def load_fleet(path) -> FleetPlan:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FLEET_FORMAT:
        raise MalformedInputError(f"expected {FLEET_FORMAT}, got {doc.get('format')!r}")
    b = [int(x) for x in doc["b"]]
    bikes, next_id = [], 0
    for count in b:
        bikes.append(list(range(next_id, next_id + count)))
        next_id += count
    return FleetPlan(b, bikes)


def save_trajectories(trajectories: list[BikeTrajectory], cfg: SimConfig, path) -> None:
    doc = {
        "format": TRAJ_FORMAT,
        "metadata": {
            "seed": cfg.seed,
            "beta": cfg.beta,
            "generator": GENERATOR_NAME,
            "equipped": sorted(cfg.equipped),
        },
        "bikes": [
            {
                "bike": t.bike,
                "home": t.home,
                "served": t.served,
                "events": [[seg, minute] for seg, minute in t.events],
            }
            for t in trajectories
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_trajectories(path) -> tuple[list[BikeTrajectory], dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != TRAJ_FORMAT:
        raise MalformedInputError(f"expected {TRAJ_FORMAT}, got {doc.get('format')!r}")
    trajectories = [
        BikeTrajectory(
            t["bike"], t["home"], list(t["served"]), [(e[0], e[1]) for e in t["events"]]
        )
        for t in doc["bikes"]
    ]
    return trajectories, doc["metadata"]
