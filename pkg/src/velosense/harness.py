"""End-to-end experiment runner.

Composes the pipeline (ingest or synthesize, clean, size the fleet, estimate
visit probabilities, allocate sensors, replay, score) over sweeps of sensor
budget, sensing interval, and guidance acceptance, with replications.

Two compute savings fall out of the model structure and are exploited here:
unguided replays do not depend on which bikes carry sensors, so one beta=0
replay per replication serves every method and budget; and the sensing
interval enters only at scoring time, so each replay is scored once per
interval instead of re-simulated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .allocation import MilpInstance, build_instance, random_allocation, solve_greedy
from .coverage_model import estimate_probabilities, mean_coverage
from .errors import ConfigInfeasibleError, MalformedInputError
from .fleet_sim import BikeTrajectory, FleetPlan, SimConfig, equipped_set, initial_bike_counts, simulate
from .metrics import IntervalGrid, coverage_counts, sensing_score
from .network import RoadNetwork, load_network
from .synth import SynthConfig, generate
from .trips import TripLog, clean_trips, parse_raw_trips

METHOD_RANDOM = "random-noactive"
METHOD_OPTIMIZED = "optimized-noactive"
METHOD_ACTIVE = "optimized-active"
ALL_METHODS = (METHOD_RANDOM, METHOD_OPTIMIZED, METHOD_ACTIVE)

RESULT_HEADER = ["method", "budget", "delta_h", "beta", "rep", "phi_pct"]
SUMMARY_HEADER = ["method", "budget", "delta_h", "beta", "mean_phi_pct", "std_phi_pct", "reps"]

_SIM_SEED_OFFSET = 100_000
_RAND_ALLOC_SEED_OFFSET = 200_000


@dataclass(frozen=True)
class FileSource:
    nodes: str
    edges: str
    trips: str


@dataclass
class ExperimentSpec:
    source: FileSource | SynthConfig
    budgets: list[int]
    deltas: list[float]
    betas: list[float] = field(default_factory=lambda: [1.0])
    methods: tuple[str, ...] = ALL_METHODS
    replications: int = 20
    seed: int = 0
    coverage_runs: int = 20

    def __post_init__(self):
        if not self.budgets or not self.deltas or not self.betas:
            raise ValueError("budgets, deltas, and betas must be non-empty")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {ALL_METHODS}")


@dataclass(frozen=True)
class ResultRow:
    method: str
    budget: int
    delta_h: float
    beta: float
    rep: int
    phi_pct: float


@dataclass(frozen=True)
class SummaryRow:
    method: str
    budget: int
    delta_h: float
    beta: float
    mean_phi_pct: float
    std_phi_pct: float
    reps: int


@dataclass
class PreparedData:
    net: RoadNetwork
    log: TripLog
    fleet: FleetPlan


def prepare(spec: ExperimentSpec) -> PreparedData:
    if isinstance(spec.source, SynthConfig):
        net, raw = generate(spec.source)
    else:
        with open(spec.source.nodes, encoding="utf-8", newline="") as nf, open(
            spec.source.edges, encoding="utf-8", newline=""
        ) as ef:
            net = load_network(nf, ef)
        with open(spec.source.trips, encoding="utf-8", newline="") as tf:
            raw, _report = parse_raw_trips(tf)
    log = clean_trips(raw, net)
    if not log.trips:
        raise ConfigInfeasibleError("no trips survive cleaning; nothing to simulate")
    return PreparedData(net, log, initial_bike_counts(log))


class Evaluator:
    """Caches replays and scores them at requested intervals.

    Unguided replays (beta == 0) ignore the equipped set, so one per
    replication is kept and shared across methods and budgets. Guided
    replays are only ever re-read while scoring the same sweep cell at
    several intervals, so a single slot suffices and keeps memory flat.
    """

    def __init__(self, data: PreparedData, seed: int):
        self.data = data
        self.seed = seed
        self._unguided: dict[int, list[BikeTrajectory]] = {}
        self._guided_key: tuple | None = None
        self._guided: list[BikeTrajectory] | None = None

    def trajectories(self, rep: int, beta: float, equipped: frozenset[int]) -> list[BikeTrajectory]:
        if beta == 0.0:
            trajs = self._unguided.get(rep)
            if trajs is None:
                cfg = SimConfig(seed=self.seed + _SIM_SEED_OFFSET + rep)
                trajs = self._unguided[rep] = simulate(self.data.log, self.data.fleet, cfg)
            return trajs
        key = (rep, beta, equipped)
        if key != self._guided_key:
            cfg = SimConfig(seed=self.seed + _SIM_SEED_OFFSET + rep, beta=beta, equipped=equipped)
            self._guided_key = key
            self._guided = simulate(self.data.log, self.data.fleet, cfg)
        return self._guided

    def phi(self, trajs: list[BikeTrajectory], equipped: frozenset[int], delta_h: float) -> float:
        t0, t_end = self.data.log.horizon
        grid = IntervalGrid(t0, t_end, delta_h)
        # trips starting near the horizon end finish after it; those late
        # events fall outside every interval and are not scored
        visible = [
            BikeTrajectory(
                t.bike, t.home, t.served, [(s, m) for s, m in t.events if t0 <= m <= t_end]
            )
            for t in trajs
            if t.bike in equipped
        ]
        counts = coverage_counts(visible, equipped, grid, self.data.net.num_segments)
        return sensing_score(counts, self.data.net.seg_length_m, grid)


def _allocation_for(
    method: str, inst: MilpInstance, greedy_plan, rep: int, seed: int
):
    if method == METHOD_RANDOM:
        return random_allocation(inst, seed + _RAND_ALLOC_SEED_OFFSET + rep)
    return greedy_plan


def _betas_for(method: str, spec: ExperimentSpec) -> list[float]:
    return list(spec.betas) if method == METHOD_ACTIVE else [0.0]


def run_pipeline(spec: ExperimentSpec) -> tuple[list[ResultRow], list[SummaryRow]]:
    """Execute the full pipeline over the spec's sweeps.

    Returns per-replication rows in deterministic order plus mean/stdev
    summaries per (method, budget, interval, beta) cell.
    """
    data = prepare(spec)
    sample = mean_coverage(data.log, data.fleet, runs=spec.coverage_runs, seed=spec.seed)
    matrix = estimate_probabilities(sample, data.fleet)
    ev = Evaluator(data, spec.seed)

    rows: list[ResultRow] = []
    for budget in spec.budgets:
        inst = build_instance(matrix, data.net, data.fleet, budget)
        greedy_plan = solve_greedy(inst) if (
            METHOD_OPTIMIZED in spec.methods or METHOD_ACTIVE in spec.methods
        ) else None
        for method in spec.methods:
            for beta in _betas_for(method, spec):
                for rep in range(spec.replications):
                    alloc = _allocation_for(method, inst, greedy_plan, rep, spec.seed)
                    equipped = equipped_set(data.fleet, alloc.n)
                    trajs = ev.trajectories(rep, beta, equipped)
                    for delta_h in spec.deltas:
                        rows.append(
                            ResultRow(
                                method,
                                budget,
                                delta_h,
                                beta,
                                rep,
                                ev.phi(trajs, equipped, delta_h),
                            )
                        )
    rows.sort(key=lambda r: (ALL_METHODS.index(r.method), r.budget, r.delta_h, r.beta, r.rep))
    return rows, summarize(rows)


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.method, r.budget, r.delta_h, r.beta), []).append(r.phi_pct)
    out = []
    for (method, budget, delta_h, beta), phis in sorted(
        groups.items(), key=lambda kv: (ALL_METHODS.index(kv[0][0]),) + kv[0][1:]
    ):
        arr = np.asarray(phis)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        out.append(SummaryRow(method, budget, delta_h, beta, float(arr.mean()), std, len(arr)))
    return out


@dataclass(frozen=True)
class BetaGain:
    budget: int
    delta_h: float
    beta_from: float
    beta_to: float
    gain_phi_pct: float


def beta_sweep(spec: ExperimentSpec) -> tuple[list[ResultRow], list[SummaryRow], list[BetaGain]]:
    """Sweep guidance acceptance with optimized allocation; report the mean
    score gain of each beta step."""
    sweep = ExperimentSpec(
        source=spec.source,
        budgets=spec.budgets,
        deltas=spec.deltas,
        betas=sorted(spec.betas),
        methods=(METHOD_ACTIVE,),
        replications=spec.replications,
        seed=spec.seed,
        coverage_runs=spec.coverage_runs,
    )
    rows, summary = run_pipeline(sweep)
    means = {(s.budget, s.delta_h, s.beta): s.mean_phi_pct for s in summary}
    gains = []
    betas = sorted(spec.betas)
    for budget in spec.budgets:
        for delta_h in spec.deltas:
            for lo, hi in zip(betas, betas[1:]):
                gains.append(
                    BetaGain(
                        budget,
                        delta_h,
                        lo,
                        hi,
                        means[(budget, delta_h, hi)] - means[(budget, delta_h, lo)],
                    )
                )
    return rows, summary, gains


@dataclass(frozen=True)
class RequirementRow:
    delta_h: float
    target_phi_pct: float
    budget: int | None  # None when the target is unattainable at full capacity
    achieved_phi_pct: float
    monotone_ok: bool


def sensor_requirement(spec: ExperimentSpec, target_phi_pct: float) -> list[RequirementRow]:
    """Smallest budget whose mean score reaches the target, per interval.

    Binary search over the budget using greedy allocation; assumes the mean
    score is non-decreasing in budget and reports whether the points actually
    evaluated were monotone. Uses the first beta in the spec for scheduling.
    """
    data = prepare(spec)
    sample = mean_coverage(data.log, data.fleet, runs=spec.coverage_runs, seed=spec.seed)
    matrix = estimate_probabilities(sample, data.fleet)
    ev = Evaluator(data, spec.seed)
    beta = spec.betas[0]
    max_budget = sum(data.fleet.b)

    out = []
    for delta_h in spec.deltas:
        memo: dict[int, float] = {}

        def mean_phi(budget: int) -> float:
            if budget in memo:
                return memo[budget]
            if budget == 0:
                memo[0] = 0.0
                return 0.0
            inst = build_instance(matrix, data.net, data.fleet, budget)
            plan = solve_greedy(inst)
            equipped = equipped_set(data.fleet, plan.n)
            phis = [
                ev.phi(ev.trajectories(rep, beta, equipped), equipped, delta_h)
                for rep in range(spec.replications)
            ]
            memo[budget] = float(np.mean(phis))
            return memo[budget]

        if target_phi_pct <= 0.0:
            out.append(RequirementRow(delta_h, target_phi_pct, 0, 0.0, True))
            continue
        top = mean_phi(max_budget)
        if top < target_phi_pct:
            out.append(RequirementRow(delta_h, target_phi_pct, None, top, True))
            continue
        lo, hi = 0, max_budget
        while lo < hi:
            mid = (lo + hi) // 2
            if mean_phi(mid) >= target_phi_pct:
                hi = mid
            else:
                lo = mid + 1
        evaluated = sorted(memo.items())
        monotone = all(a[1] <= b[1] + 1e-9 for a, b in zip(evaluated, evaluated[1:]))
        out.append(RequirementRow(delta_h, target_phi_pct, lo, memo[lo], monotone))
    return out


def write_results(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow([r.method, r.budget, r.delta_h, r.beta, r.rep, repr(r.phi_pct)])


def write_summary(summary: list[SummaryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for s in summary:
            writer.writerow(
                [s.method, s.budget, s.delta_h, s.beta, repr(s.mean_phi_pct), repr(s.std_phi_pct), s.reps]
            )


def load_spec(doc: dict) -> ExperimentSpec:
    """Build an ExperimentSpec from its JSON mirror."""
    if "source" not in doc:
        raise MalformedInputError("experiment config needs a 'source' entry")
    src = doc["source"]
    try:
        if "synth" in src:
            synth_args = dict(src["synth"])
            if "horizon" in synth_args:
                synth_args["horizon"] = tuple(synth_args["horizon"])
            source = SynthConfig(**synth_args)
        elif "files" in src:
            source = FileSource(**src["files"])
        else:
            raise MalformedInputError("source must contain either 'synth' or 'files'")
    except (TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad experiment source: {exc}") from exc
    try:
        return ExperimentSpec(
            source=source,
            budgets=[int(b) for b in doc["budgets"]],
            deltas=[float(d) for d in doc["deltas"]],
            betas=[float(b) for b in doc.get("betas", [1.0])],
            methods=tuple(doc.get("methods", ALL_METHODS)),
            replications=int(doc.get("replications", 20)),
            seed=int(doc.get("seed", 0)),
            coverage_runs=int(doc.get("coverage_runs", 20)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad experiment config: {exc}") from exc


def spec_summary(spec: ExperimentSpec) -> dict:
    src = (
        {"synth": spec.source.__dict__ | {"horizon": list(spec.source.horizon)}}
        if isinstance(spec.source, SynthConfig)
        else {"files": spec.source.__dict__}
    )
    return {
        "source": src,
        "budgets": spec.budgets,
        "deltas": spec.deltas,
        "betas": spec.betas,
        "methods": list(spec.methods),
        "replications": spec.replications,
        "seed": spec.seed,
        "coverage_runs": spec.coverage_runs,
    }
