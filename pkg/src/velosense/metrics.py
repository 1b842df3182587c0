"""Spatio-temporal sensing score and coverage diagnostics.

The horizon splits into equal intervals; a (segment, interval) cell is
covered when at least one equipped bike enters the segment during the
interval. The sensing score is the length-weighted share of covered cells,
as a percentage. A cell's membership uses the segment entry minute, matching
the traversal timestamps produced by the trip router.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, UndefinedScoreError
from .fleet_sim import BikeTrajectory
from .trips import TripLog


@dataclass(frozen=True)
class IntervalGrid:
    t0: int
    T: int
    delta_h: float

    def __post_init__(self):
        if self.T <= self.t0:
            raise ValueError(f"empty horizon ({self.t0}, {self.T})")
        delta_min = self.delta_min
        if abs(60.0 * self.delta_h - delta_min) > 1e-9 or delta_min < 1:
            raise ValueError(f"delta_h={self.delta_h} is not a whole number of minutes")
        if (self.T - self.t0) % delta_min != 0:
            raise ValueError(
                f"interval of {delta_min} min does not divide horizon {self.T - self.t0} min"
            )

    @property
    def delta_min(self) -> int:
        return int(round(60.0 * self.delta_h))

    @property
    def n_intervals(self) -> int:
        return (self.T - self.t0) // self.delta_min

    def interval_of(self, minute: int) -> int:
        """Index of the interval containing `minute`; the horizon end maps to
        the last interval."""
        if minute < self.t0 or minute > self.T:
            raise HorizonError(f"minute {minute} outside horizon [{self.t0}, {self.T}]")
        if minute == self.T:
            return self.n_intervals - 1
        return (minute - self.t0) // self.delta_min


@dataclass
class SensingReport:
    counts: np.ndarray  # segments x intervals
    phi_pct: float
    grid: IntervalGrid
    equipped_count: int


def coverage_counts(
    trajectories: list[BikeTrajectory],
    equipped: frozenset[int] | set[int],
    grid: IntervalGrid,
    num_segments: int,
) -> np.ndarray:
    """Count equipped-bike entries per (segment, interval).

    Every event of an equipped bike must fall inside the horizon; an event
    outside it is a contract violation, not data to be clipped silently.
    """
    counts = np.zeros((num_segments, grid.n_intervals), dtype=np.int64)
    for traj in trajectories:
        if traj.bike not in equipped:
            continue
        for seg, minute in traj.events:
            counts[seg, grid.interval_of(minute)] += 1
    return counts


def sensing_score(counts: np.ndarray, lengths: np.ndarray, grid: IntervalGrid) -> float:
    """Length-weighted percentage of covered (segment, interval) cells."""
    lengths = np.asarray(lengths, dtype=np.float64)
    if counts.shape != (len(lengths), grid.n_intervals):
        raise ValueError(
            f"counts shape {counts.shape} does not match "
            f"{len(lengths)} segments x {grid.n_intervals} intervals"
        )
    total = float(lengths.sum())
    if len(lengths) == 0 or total <= 0.0:
        raise UndefinedScoreError("sensing score is undefined on an empty network")
    covered_cells = (counts >= 1).sum(axis=1)
    return 100.0 * float(lengths @ covered_cells) / (grid.n_intervals * total)


@dataclass
class HourRow:
    hour: int
    trips_started: int
    coverage_events: int
    per_segment: dict[int, int]


@dataclass
class HourlyDiagnostics:
    rows: list[HourRow]
    trip_event_correlation: float | None  # Pearson; absent without equipped coverage


def hourly_diagnostics(
    trajectories: list[BikeTrajectory],
    equipped: frozenset[int] | set[int],
    log: TripLog,
) -> HourlyDiagnostics:
    """Per-hour trip starts and equipped coverage counts, for external plotting.

    Minutes at the horizon end count toward the final hour; events outside
    the horizon (a trip can end after it) are ignored.
    """
    t0, t_end = log.horizon
    if t0 % 60 or t_end % 60:
        raise ValueError(f"horizon ({t0}, {t_end}) is not hour-aligned")
    first_hour = t0 // 60
    hours = list(range(first_hour, t_end // 60))

    def hour_of(minute: int) -> int:
        return min(minute, t_end - 1) // 60

    trips_started = {h: 0 for h in hours}
    for trip in log.trips:
        trips_started[hour_of(trip.start_min)] += 1
    events = {h: 0 for h in hours}
    per_segment: dict[int, dict[int, int]] = {h: {} for h in hours}
    for traj in trajectories:
        if traj.bike not in equipped:
            continue
        for seg, minute in traj.events:
            if minute < t0 or minute > t_end:
                continue
            h = hour_of(minute)
            events[h] += 1
            per_segment[h][seg] = per_segment[h].get(seg, 0) + 1

    rows = [HourRow(h, trips_started[h], events[h], per_segment[h]) for h in hours]
    xs = np.array([r.trips_started for r in rows], dtype=float)
    ys = np.array([r.coverage_events for r in rows], dtype=float)
    correlation = None
    if len(rows) >= 2 and xs.std() > 0 and ys.std() > 0:
        correlation = float(np.corrcoef(xs, ys)[0, 1])
    return HourlyDiagnostics(rows, correlation)


def write_hourly(diag: HourlyDiagnostics, rows_path, segments_path) -> None:
    """Hourly aggregates for external plotting: one summary row per hour plus
    the per-segment counts behind it."""
    with open(rows_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "trips_started", "coverage_events", "trip_event_correlation"])
        corr = "" if diag.trip_event_correlation is None else repr(diag.trip_event_correlation)
        for row in diag.rows:
            writer.writerow([row.hour, row.trips_started, row.coverage_events, corr])
    with open(segments_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "segment_id", "count"])
        for row in diag.rows:
            for seg, count in sorted(row.per_segment.items()):
                writer.writerow([row.hour, seg, count])


def write_report(report: SensingReport, counts_path, summary_path) -> None:
    """Nonzero cells as delimited text plus a JSON summary."""
    with open(counts_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "interval", "count"])
        for seg, interval in zip(*np.nonzero(report.counts)):
            writer.writerow([int(seg), int(interval), int(report.counts[seg, interval])])
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "phi_pct": report.phi_pct,
                "t0": report.grid.t0,
                "T": report.grid.T,
                "delta_h": report.grid.delta_h,
                "n_intervals": report.grid.n_intervals,
                "num_segments": int(report.counts.shape[0]),
                "equipped_count": report.equipped_count,
            },
            fh,
        )
