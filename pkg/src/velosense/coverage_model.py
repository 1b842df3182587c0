"""Visit-probability estimation by Monte Carlo over unguided replays.

Coverage of a segment by the bikes homed at one stand behaves like a
binomial count, so the mean coverage over repeated replays divided by the
stand's bike count estimates the per-bike visit expectation p[stand, segment].
A bike can cross the same segment several times in a day, so values above 1
are legal; downstream optimization consumes them as expectations.

Every traversal event is attributed to the bike's home stand (where it was
deployed at the start of the horizon), the only label that stays stable once
bikes migrate between stands.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .errors import MalformedInputError
from .fleet_sim import FleetPlan, SimConfig, simulate
from .network import RoadNetwork, single_source_distances
from .trips import TripLog

COVERAGE_FORMAT = "velosense-coverage-v1"

DEFAULT_RUNS = 20


@dataclass
class CoverageSample:
    """Mean traversal counts per (home stand, segment) over replicated runs."""

    n_bar: dict[tuple[int, int], float]
    runs: int
    seed: int
    horizon: tuple[int, int]
    stand_nodes: list[int]


@dataclass
class CoverageMatrix:
    """Per-bike visit expectations p[(stand, segment)]; absent entries are 0."""

    p: dict[tuple[int, int], float]
    runs: int
    seed: int
    horizon: tuple[int, int]
    stand_nodes: list[int]


def mean_coverage(
    log: TripLog, plan: FleetPlan, runs: int = DEFAULT_RUNS, seed: int = 0
) -> CoverageSample:
    """Average per-(home stand, segment) traversal counts over `runs` unguided
    replays seeded seed+1 .. seed+runs."""
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    totals: dict[tuple[int, int], int] = {}
    for tau in range(1, runs + 1):
        trajectories = simulate(log, plan, SimConfig(seed=seed + tau))
        for traj in trajectories:
            home = traj.home
            for seg, _minute in traj.events:
                key = (home, seg)
                totals[key] = totals.get(key, 0) + 1
    n_bar = {key: count / runs for key, count in sorted(totals.items())}
    return CoverageSample(n_bar, runs, seed, log.horizon, [s.node for s in log.stands])


def estimate_probabilities(sample: CoverageSample, plan: FleetPlan) -> CoverageMatrix:
    """Binomial-mean slope: p = mean coverage / bikes deployed at the stand."""
    p: dict[tuple[int, int], float] = {}
    for (stand, seg), value in sample.n_bar.items():
        b = plan.b[stand]
        if b <= 0:
            raise ValueError(f"stand {stand} has coverage but no bikes")
        p[(stand, seg)] = value / b
    return CoverageMatrix(p, sample.runs, sample.seed, sample.horizon, list(sample.stand_nodes))


def probability_decay_report(
    matrix: CoverageMatrix, net: RoadNetwork, stand: int
) -> list[tuple[int, float, float]]:
    """(segment, road distance from the stand, p) rows, nearest first.

    Distance is the shortest-path distance from the stand's node to the
    segment's nearer endpoint. Only segments the stand actually covers
    appear; a stand with no coverage yields an empty report.
    """
    if not 0 <= stand < len(matrix.stand_nodes):
        raise MalformedInputError(f"unknown stand {stand}")
    entries = [(seg, p) for (s, seg), p in matrix.p.items() if s == stand and p > 0]
    if not entries:
        return []
    dist = single_source_distances(net, matrix.stand_nodes[stand])
    rows = []
    for seg, p in entries:
        u, v = net.endpoints(seg)
        rows.append((seg, float(min(dist[u], dist[v])), p))
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows


def linearity_probe(
    log: TripLog,
    plan: FleetPlan,
    stands: list[int],
    runs: int = DEFAULT_RUNS,
    seed: int = 0,
    min_mean: float = 5.0,
) -> list[tuple[int, int, float, float, int]]:
    """Refit mean coverage against the number of tracked bikes per stand.

    For each probed stand, tracked subsets are the first n bikes of the
    stand's fleet for n = 1..b_s; the per-subset mean coverage of a segment
    over the replicated runs is regressed through the origin against n.
    Returns (stand, segment, slope, r_squared, points) for every pair whose
    full-fleet mean coverage reaches `min_mean`. Checks that coverage grows
    linearly with deployment, the premise the allocation model rests on.
    """
    probe = set(stands)
    bike_rank = {}
    for stand in probe:
        for rank, bike in enumerate(plan.bikes[stand]):
            bike_rank[bike] = (stand, rank)

    # totals[(stand, rank, seg)] accumulated over runs
    totals: dict[tuple[int, int, int], int] = {}
    for tau in range(1, runs + 1):
        trajectories = simulate(log, plan, SimConfig(seed=seed + tau))
        for traj in trajectories:
            loc = bike_rank.get(traj.bike)
            if loc is None:
                continue
            stand, rank = loc
            for seg, _minute in traj.events:
                key = (stand, rank, seg)
                totals[key] = totals.get(key, 0) + 1

    results = []
    for stand in sorted(probe):
        b = plan.b[stand]
        if b < 2:
            continue
        segs = sorted({seg for (s, _r, seg) in totals if s == stand})
        for seg in segs:
            per_rank = [totals.get((stand, r, seg), 0) / runs for r in range(b)]
            ys = []
            acc = 0.0
            for r in range(b):
                acc += per_rank[r]
                ys.append(acc)  # mean coverage of the first r+1 tracked bikes
            if ys[-1] < min_mean:
                continue
            xs = list(range(1, b + 1))
            sxx = sum(x * x for x in xs)
            sxy = sum(x * y for x, y in zip(xs, ys))
            slope = sxy / sxx
            ss_res = sum((y - slope * x) ** 2 for x, y in zip(xs, ys))
            ss_tot = sum(y * y for y in ys)
            r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
            results.append((stand, seg, slope, r2, b))
    return results


def save_matrix(matrix: CoverageMatrix, csv_path, meta_path) -> None:
    """Delimited probabilities plus a JSON sidecar with the estimation protocol."""
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stand_id", "segment_id", "p"])
        for (stand, seg), p in sorted(matrix.p.items()):
            writer.writerow([stand, seg, repr(p)])
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "format": COVERAGE_FORMAT,
                "runs": matrix.runs,
                "seed": matrix.seed,
                "horizon": list(matrix.horizon),
                "stand_nodes": matrix.stand_nodes,
            },
            fh,
        )


def load_matrix(csv_path, meta_path) -> CoverageMatrix:
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != COVERAGE_FORMAT:
        raise MalformedInputError(f"expected {COVERAGE_FORMAT}, got {meta.get('format')!r}")
    p: dict[tuple[int, int], float] = {}
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["stand_id", "segment_id", "p"]:
            raise MalformedInputError("coverage file must have header stand_id,segment_id,p")
        for row in reader:
            p[(int(row["stand_id"]), int(row["segment_id"]))] = float(row["p"])
    return CoverageMatrix(
        p, meta["runs"], meta["seed"], tuple(meta["horizon"]), list(meta["stand_nodes"])
    )
