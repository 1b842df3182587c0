"""Command-line interface.

Subcommands mirror the pipeline stages so intermediate artifacts can be
inspected and reused: ingest, synth, fleet, probs, allocate, simulate,
score, experiment, export-lp. Exit codes: 0 success, 2 malformed input,
3 infeasible configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import allocation, coverage_model, fleet_sim, harness, metrics, synth, trips
from .errors import ConfigInfeasibleError, InfeasiblePlanError, MalformedInputError
from .network import load_network

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_INFEASIBLE = 3


def _load_net(nodes_path, edges_path):
    with open(nodes_path, encoding="utf-8", newline="") as nf, open(
        edges_path, encoding="utf-8", newline=""
    ) as ef:
        return load_network(nf, ef)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    net = _load_net(args.nodes, args.edges)
    with open(args.trips, encoding="utf-8", newline="") as fh:
        raw, report = trips.parse_raw_trips(fh)
    log = trips.clean_trips(
        raw,
        net,
        speed_kmh=args.speed_kmh,
        min_km=args.min_km,
        max_km=args.max_km,
        window=(args.window_start, args.window_end),
    )
    out = _out_dir(args)
    trips.save_triplog(log, out / "triplog.json")
    with open(out / "ingest_report.json", "w", encoding="utf-8") as fh:
        json.dump({"parse": report.as_dict(), "cleaning": log.drop_counts}, fh)
    print(
        f"ingested {len(log.trips)} trips across {log.num_stands} stands "
        f"(parsed {report.kept}/{report.rows_read} rows) -> {out / 'triplog.json'}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        grid_w=args.grid_w,
        grid_h=args.grid_h,
        block_m=args.block_m,
        stand_count=args.stands,
        trips=args.trips,
        horizon=(args.t0, args.t_end),
        gravity_gamma=args.gamma,
        seed=args.seed,
    )
    net, raw = synth.generate(cfg)
    out = _out_dir(args)
    synth.write_network_csv(net, out / "nodes.csv", out / "edges.csv")
    synth.write_trips_csv(raw, out / "trips.csv")
    print(
        f"synthesized {net.num_nodes} nodes, {net.num_segments} segments, "
        f"{len(raw)} trips -> {out}"
    )
    return EXIT_OK


def cmd_fleet(args) -> int:
    log = trips.load_triplog(args.triplog)
    plan = fleet_sim.initial_bike_counts(log)
    out = _out_dir(args)
    fleet_sim.save_fleet(plan, out / "fleet.json")
    print(f"fleet of {plan.num_bikes} bikes over {len(plan.b)} stands -> {out / 'fleet.json'}")
    return EXIT_OK


def cmd_probs(args) -> int:
    log = trips.load_triplog(args.triplog)
    plan = fleet_sim.initial_bike_counts(log)
    sample = coverage_model.mean_coverage(log, plan, runs=args.runs, seed=args.seed)
    matrix = coverage_model.estimate_probabilities(sample, plan)
    out = _out_dir(args)
    coverage_model.save_matrix(matrix, out / "probs.csv", out / "probs.meta.json")
    print(f"{len(matrix.p)} (stand, segment) probabilities -> {out / 'probs.csv'}")
    return EXIT_OK


def _build_instance_from_files(args):
    net = _load_net(args.nodes, args.edges)
    log = trips.load_triplog(args.triplog)
    plan = fleet_sim.initial_bike_counts(log)
    matrix = coverage_model.load_matrix(args.probs, args.probs_meta)
    inst = allocation.build_instance(matrix, net, plan, args.budget, K=args.k)
    return inst, net, log, plan


def cmd_allocate(args) -> int:
    inst, _net, _log, _plan = _build_instance_from_files(args)
    if args.method == "exact":
        plan = allocation.solve_exact(inst, time_limit_s=args.time_limit)
    elif args.method == "greedy":
        plan = allocation.solve_greedy(inst)
    else:
        plan = allocation.random_allocation(inst, args.seed)
    out = _out_dir(args)
    allocation.save_plan(plan, inst, out / "alloc.json")
    for warning in inst.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if plan.gap > 0:
        print(
            f"warning: time limit hit; best found may be up to {plan.gap:.1f} m "
            "below optimal (try --method greedy or a higher --time-limit)",
            file=sys.stderr,
        )
    print(
        f"{plan.total_sensors} sensors via {plan.solver}, "
        f"objective {plan.objective_m:.1f} m -> {out / 'alloc.json'}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    log = trips.load_triplog(args.triplog)
    plan = fleet_sim.initial_bike_counts(log)
    alloc = allocation.load_plan(args.alloc)
    equipped = fleet_sim.equipped_set(plan, alloc.n)
    cfg = fleet_sim.SimConfig(seed=args.seed, beta=args.beta, equipped=equipped)
    trajectories = fleet_sim.simulate(log, plan, cfg)
    out = _out_dir(args)
    fleet_sim.save_trajectories(trajectories, cfg, out / "traj.json")
    served = sum(len(t.served) for t in trajectories)
    print(f"replayed {served} trips on {len(trajectories)} bikes -> {out / 'traj.json'}")
    return EXIT_OK


def cmd_score(args) -> int:
    trajectories, meta = fleet_sim.load_trajectories(args.traj)
    log = trips.load_triplog(args.triplog)
    net = _load_net(args.nodes, args.edges)
    t0, t_end = log.horizon
    grid = metrics.IntervalGrid(t0, t_end, args.delta)
    equipped = frozenset(meta.get("equipped", []))
    visible = [
        fleet_sim.BikeTrajectory(
            t.bike, t.home, t.served, [(s, m) for s, m in t.events if t0 <= m <= t_end]
        )
        for t in trajectories
    ]
    counts = metrics.coverage_counts(visible, equipped, grid, net.num_segments)
    phi = metrics.sensing_score(counts, net.seg_length_m, grid)
    report = metrics.SensingReport(counts, phi, grid, len(equipped))
    out = _out_dir(args)
    metrics.write_report(report, out / "coverage_counts.csv", out / "score.json")
    hourly = metrics.hourly_diagnostics(trajectories, equipped, log)
    metrics.write_hourly(hourly, out / "hourly.csv", out / "hourly_segments.csv")
    print(f"phi = {phi:.3f}% at delta {args.delta} h -> {out / 'score.json'}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if not args.config:
        raise MalformedInputError("experiment requires --config <json>")
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = harness.load_spec(doc)
    if "seed" not in doc:
        spec.seed = args.seed
    out = _out_dir(args)
    if args.mode == "pipeline":
        rows, summary = harness.run_pipeline(spec)
        harness.write_results(rows, out / "results.csv")
        harness.write_summary(summary, out / "summary.csv")
        print(f"{len(rows)} result rows -> {out / 'results.csv'}")
    elif args.mode == "beta-sweep":
        rows, summary, gains = harness.beta_sweep(spec)
        harness.write_results(rows, out / "results.csv")
        harness.write_summary(summary, out / "summary.csv")
        with open(out / "beta_gains.csv", "w", encoding="utf-8") as fh:
            fh.write("budget,delta_h,beta_from,beta_to,gain_phi_pct\n")
            for g in gains:
                fh.write(
                    f"{g.budget},{g.delta_h},{g.beta_from},{g.beta_to},{g.gain_phi_pct!r}\n"
                )
        print(f"{len(rows)} result rows, {len(gains)} beta steps -> {out}")
    else:  # sensor-requirement
        rows = harness.sensor_requirement(spec, args.target_phi)
        with open(out / "sensor_requirement.csv", "w", encoding="utf-8") as fh:
            fh.write("delta_h,target_phi_pct,budget,achieved_phi_pct,monotone_ok\n")
            for r in rows:
                budget = "" if r.budget is None else r.budget
                fh.write(
                    f"{r.delta_h},{r.target_phi_pct},{budget},"
                    f"{r.achieved_phi_pct!r},{r.monotone_ok}\n"
                )
        print(f"{len(rows)} interval rows -> {out / 'sensor_requirement.csv'}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    inst, _net, _log, _plan = _build_instance_from_files(args)
    with open(args.out, "wb") as fh:
        allocation.export_lp(inst, fh)
    print(
        f"LP model with {inst.num_stands} integer and {len(inst.candidates)} "
        f"binary variables -> {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every stochastic step")
    common.add_argument("--out-dir", default=".", help="directory for output artifacts")
    common.add_argument("--config", default=None, help="JSON experiment config")

    parser = argparse.ArgumentParser(
        prog="velosense",
        description="Drive-by sensing on bike-share fleets: replay, allocate, score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse, clean, and route raw trips")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--speed-kmh", type=float, default=trips.DEFAULT_SPEED_KMH)
    p.add_argument("--min-km", type=float, default=trips.DEFAULT_MIN_KM)
    p.add_argument("--max-km", type=float, default=trips.DEFAULT_MAX_KM)
    p.add_argument("--window-start", type=int, default=trips.DEFAULT_WINDOW[0])
    p.add_argument("--window-end", type=int, default=trips.DEFAULT_WINDOW[1])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic network and trips")
    p.add_argument("--grid-w", type=int, required=True)
    p.add_argument("--grid-h", type=int, required=True)
    p.add_argument("--block-m", type=float, default=200.0)
    p.add_argument("--stands", type=int, required=True)
    p.add_argument("--trips", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.5)
    p.add_argument("--t0", type=int, default=trips.DEFAULT_WINDOW[0])
    p.add_argument("--t-end", type=int, default=trips.DEFAULT_WINDOW[1])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fleet", parents=[common], help="derive minimal initial bike counts")
    p.add_argument("--triplog", required=True)
    p.set_defaults(func=cmd_fleet)

    p = sub.add_parser("probs", parents=[common], help="estimate visit probabilities")
    p.add_argument("--triplog", required=True)
    p.add_argument("--runs", type=int, default=coverage_model.DEFAULT_RUNS)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("allocate", parents=[common], help="allocate sensors to stands")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--triplog", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--probs-meta", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--method", choices=["exact", "greedy", "random"], default="greedy")
    p.add_argument("--time-limit", type=float, default=60.0)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", parents=[common], help="replay trips with equipped bikes")
    p.add_argument("--triplog", required=True)
    p.add_argument("--alloc", required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", parents=[common], help="score a trajectory dump")
    p.add_argument("--traj", required=True)
    p.add_argument("--triplog", required=True)
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--delta", type=float, required=True, help="sensing interval in hours")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("experiment", parents=[common], help="run a configured experiment")
    p.add_argument(
        "--mode",
        choices=["pipeline", "beta-sweep", "sensor-requirement"],
        default="pipeline",
    )
    p.add_argument("--target-phi", type=float, default=50.0)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-lp", parents=[common], help="write the allocation model as LP text")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--triplog", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--probs-meta", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MalformedInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (ConfigInfeasibleError, InfeasiblePlanError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
