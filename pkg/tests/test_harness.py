import csv

import numpy as np
import pytest

from velosense.errors import ConfigInfeasibleError, MalformedInputError
from velosense.harness import (
    ALL_METHODS,
    METHOD_ACTIVE,
    METHOD_OPTIMIZED,
    METHOD_RANDOM,
    ExperimentSpec,
    FileSource,
    beta_sweep,
    load_spec,
    run_pipeline,
    sensor_requirement,
    write_results,
    write_summary,
)
from velosense.synth import SynthConfig


def small_spec(**overrides):
    args = dict(
        source=SynthConfig(8, 8, 300.0, stand_count=8, trips=400, seed=11),
        budgets=[3],
        deltas=[16.0],
        betas=[1.0],
        replications=2,
        seed=5,
        coverage_runs=2,
    )
    args.update(overrides)
    return ExperimentSpec(**args)


class TestSpecValidation:
    def test_empty_sweeps_rejected(self):
        with pytest.raises(ValueError):
            small_spec(budgets=[])
        with pytest.raises(ValueError):
            small_spec(deltas=[])
        with pytest.raises(ValueError):
            small_spec(replications=0)
        with pytest.raises(ValueError):
            small_spec(methods=("nonsense",))

    def test_load_spec_round_trip(self):
        doc = {
            "source": {"synth": {"grid_w": 8, "grid_h": 8, "block_m": 300.0,
                                  "stand_count": 8, "trips": 400, "seed": 11}},
            "budgets": [3, 5],
            "deltas": [16.0, 4.0],
            "betas": [0.0, 1.0],
            "replications": 4,
            "seed": 9,
        }
        spec = load_spec(doc)
        assert isinstance(spec.source, SynthConfig)
        assert spec.budgets == [3, 5]
        assert spec.replications == 4

    def test_load_spec_files_source(self):
        doc = {
            "source": {"files": {"nodes": "n.csv", "edges": "e.csv", "trips": "t.csv"}},
            "budgets": [1],
            "deltas": [16.0],
        }
        spec = load_spec(doc)
        assert isinstance(spec.source, FileSource)

    def test_load_spec_errors(self):
        with pytest.raises(MalformedInputError):
            load_spec({"budgets": [1], "deltas": [1.0]})
        with pytest.raises(MalformedInputError):
            load_spec({"source": {"nothing": {}}, "budgets": [1], "deltas": [1.0]})
        with pytest.raises(MalformedInputError):
            load_spec({"source": {"synth": {"grid_w": 4}}, "budgets": [1], "deltas": [1.0]})


class TestRunPipeline:
    def test_single_cell_row(self):
        rows, summary = run_pipeline(small_spec(budgets=[1], methods=(METHOD_OPTIMIZED,), replications=1))
        assert len(rows) == 1
        row = rows[0]
        assert row.method == METHOD_OPTIMIZED
        assert row.budget == 1 and row.beta == 0.0 and row.rep == 0
        assert 0.0 <= row.phi_pct <= 100.0
        assert len(summary) == 1
        assert summary[0].mean_phi_pct == row.phi_pct

    def test_full_grid_of_rows(self):
        spec = small_spec(budgets=[2, 4], deltas=[16.0, 4.0], replications=2)
        rows, summary = run_pipeline(spec)
        # random & optimized run at beta 0 only; active runs once per beta
        assert len(rows) == 2 * 2 * 2 * 3
        assert len(summary) == 2 * 2 * 3
        for row in rows:
            assert 0.0 <= row.phi_pct <= 100.0
        methods = [r.method for r in rows]
        assert methods == sorted(methods, key=ALL_METHODS.index)

    def test_deterministic(self):
        spec = small_spec()
        assert run_pipeline(spec) == run_pipeline(small_spec())

    def test_noactive_methods_share_trajectories(self):
        # same equipped set => identical scores between the two cached paths
        spec = small_spec(budgets=[2], methods=(METHOD_OPTIMIZED, METHOD_ACTIVE), betas=[0.0])
        rows, _ = run_pipeline(spec)
        optimized = {(r.rep): r.phi_pct for r in rows if r.method == METHOD_OPTIMIZED}
        active0 = {(r.rep): r.phi_pct for r in rows if r.method == METHOD_ACTIVE}
        assert optimized == active0

    def test_infeasible_source_propagates(self):
        spec = small_spec(source=SynthConfig(2, 2, 100.0, stand_count=2, trips=3, seed=0))
        with pytest.raises(ConfigInfeasibleError):
            run_pipeline(spec)


class TestBetaSweep:
    def test_zero_beta_matches_optimized_noactive_bitwise(self):
        base = small_spec(methods=(METHOD_OPTIMIZED,))
        rows_opt, _ = run_pipeline(base)
        rows_sweep, _summary, gains = beta_sweep(small_spec(betas=[0.0, 1.0]))
        zero_rows = [r.phi_pct for r in rows_sweep if r.beta == 0.0]
        assert zero_rows == [r.phi_pct for r in rows_opt]
        assert len(gains) == 1
        assert gains[0].beta_from == 0.0 and gains[0].beta_to == 1.0

    def test_gains_computed_from_summary_means(self):
        rows, summary, gains = beta_sweep(small_spec(betas=[0.0, 0.5, 1.0]))
        means = {s.beta: s.mean_phi_pct for s in summary}
        by_step = {(g.beta_from, g.beta_to): g.gain_phi_pct for g in gains}
        assert by_step[(0.0, 0.5)] == pytest.approx(means[0.5] - means[0.0])
        assert by_step[(0.5, 1.0)] == pytest.approx(means[1.0] - means[0.5])


class TestSensorRequirement:
    def test_target_zero_needs_no_sensors(self):
        rows = sensor_requirement(small_spec(), target_phi_pct=0.0)
        assert rows[0].budget == 0
        assert rows[0].achieved_phi_pct == 0.0

    def test_unattainable_target_reported(self):
        rows = sensor_requirement(small_spec(), target_phi_pct=100.0)
        assert rows[0].budget is None
        assert rows[0].achieved_phi_pct < 100.0

    def test_matches_linear_scan(self):
        spec = small_spec(replications=2)
        target = 10.0
        rows = sensor_requirement(spec, target_phi_pct=target)
        found = rows[0].budget
        assert found is not None

        from velosense.allocation import build_instance, solve_greedy
        from velosense.coverage_model import estimate_probabilities, mean_coverage
        from velosense.fleet_sim import equipped_set
        from velosense.harness import Evaluator, prepare

        data = prepare(spec)
        matrix = estimate_probabilities(
            mean_coverage(data.log, data.fleet, runs=spec.coverage_runs, seed=spec.seed),
            data.fleet,
        )
        ev = Evaluator(data, spec.seed)

        def mean_phi(budget):
            if budget == 0:
                return 0.0
            plan = solve_greedy(build_instance(matrix, data.net, data.fleet, budget))
            equipped = equipped_set(data.fleet, plan.n)
            return float(
                np.mean(
                    [
                        ev.phi(ev.trajectories(rep, spec.betas[0], equipped), equipped, 16.0)
                        for rep in range(spec.replications)
                    ]
                )
            )

        linear = next(b for b in range(sum(data.fleet.b) + 1) if mean_phi(b) >= target)
        assert found == linear


class TestWriters:
    def test_results_header_contract(self, tmp_path):
        rows, summary = run_pipeline(small_spec(budgets=[1], methods=(METHOD_RANDOM,), replications=1))
        results = tmp_path / "results.csv"
        summary_path = tmp_path / "summary.csv"
        write_results(rows, results)
        write_summary(summary, summary_path)
        with open(results) as fh:
            reader = csv.reader(fh)
            assert next(reader) == ["method", "budget", "delta_h", "beta", "rep", "phi_pct"]
            data = list(reader)
        assert len(data) == 1
        assert data[0][0] == METHOD_RANDOM
        with open(summary_path) as fh:
            assert fh.readline().strip() == "method,budget,delta_h,beta,mean_phi_pct,std_phi_pct,reps"
