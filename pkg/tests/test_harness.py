import csv
import json

import numpy as np
import pytest

from sparseloc.harness import (
    SHRINK_REDUCTIONS,
    ScenarioConfig,
    TrialRecord,
    aggregate_records,
    build_network,
    monte_carlo_sweep,
    run_trial,
    scenario_at_point,
    shrink_for_noise,
    uav13_network,
)
from sparseloc.network import save_network
from sparseloc.rigidity import distance_rigidity_matrix, rigidity_report

# 6-agent rejection-sampled source keeps each trial around 50 ms
SMALL_NET = {"agents": 6, "dim": 2, "radius": 2.0, "box": 1.0, "seed": 3}


def small_scenario(**overrides):
    base = dict(
        network=SMALL_NET,
        fault_count=1,
        initial_slack=2.0,
        trials=4,
        base_seed=7,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def test_uav13_preset_shape():
    cfg, graph = uav13_network(0)
    assert cfg.num_agents == 13
    assert cfg.dim == 3
    assert graph.num_edges == 36
    report = rigidity_report(distance_rigidity_matrix(cfg, graph))
    assert report.rank == 33
    assert report.is_rigid


def test_uav13_preset_is_deterministic():
    cfg_a, graph_a = uav13_network(4)
    cfg_b, graph_b = uav13_network(4)
    np.testing.assert_array_equal(cfg_a.positions, cfg_b.positions)
    assert graph_a.edges == graph_b.edges


def test_run_trial_is_deterministic():
    scenario = small_scenario()
    a = run_trial(scenario, 2)
    b = run_trial(scenario, 2)
    # wall_time is excluded from comparison by design
    assert a == b
    assert a.derived_seed == b.derived_seed
    assert len(a.derived_seed) == 32


def test_trial_indices_draw_distinct_faults():
    scenario = small_scenario(trials=8)
    sets = {run_trial(scenario, i).true_set for i in range(8)}
    assert len(sets) > 1


def test_zero_faults_noise_free_is_exact():
    record = run_trial(small_scenario(fault_count=0), 0)
    assert record.true_set == ()
    assert record.identified_set == ()
    assert record.relative_error == 0.0
    assert record.status == "converged"
    assert record.iterations == 1
    assert record.identified


def test_zero_truth_with_forced_mass_marks_error_undefined():
    # triangle rows span the measurement space, so spherical noise is always
    # feasible; a zero support threshold then flags any leftover mass
    scenario = ScenarioConfig(
        network={"agents": 3, "dim": 2, "radius": 5.0, "box": 1.0, "seed": 1},
        fault_count=0,
        noise_radius=1.0,
        initial_slack=0.3,
        support_threshold=0.0,
        max_iterations=3,
        trials=1,
    )
    record = run_trial(scenario, 0)
    assert record.true_set == ()
    assert record.identified_set != ()
    assert np.isnan(record.relative_error)
    assert not record.identified


def test_run_trial_rejects_fault_count_at_network_size():
    scenario = small_scenario(fault_count=6)
    with pytest.raises(ValueError):
        run_trial(scenario, 0)


def test_identified_property_requires_exact_set_match():
    base = dict(derived_seed="0" * 32, relative_error=0.1, iterations=3,
                status="converged")
    hit = TrialRecord(index=0, true_set=(1, 4), identified_set=(1, 4), **base)
    subset = TrialRecord(index=1, true_set=(1, 4), identified_set=(1,), **base)
    superset = TrialRecord(
        index=2, true_set=(1, 4), identified_set=(1, 2, 4), **base
    )
    assert hit.identified
    assert not subset.identified
    assert not superset.identified


def test_scenario_json_round_trip(tmp_path):
    scenario = small_scenario(noise_radius=1.0, shrink=2.0)
    path = tmp_path / "scenario.json"
    scenario.to_file(path)
    loaded = ScenarioConfig.from_file(path)
    assert loaded == scenario
    assert loaded.shrink == 0.5


def test_scenario_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown scenario fields"):
        ScenarioConfig.from_json({"fault_count": 2, "fault_counts": 3})


def test_scenario_validation_errors():
    with pytest.raises(ValueError):
        small_scenario(kind="angle")
    with pytest.raises(ValueError):
        small_scenario(fault_mode="mixed")
    with pytest.raises(ValueError):
        small_scenario(fault_count=-1)
    with pytest.raises(ValueError):
        small_scenario(trials=0)
    with pytest.raises(ValueError):
        small_scenario(noise_radius=-0.5)


def test_shrink_for_noise_table():
    assert shrink_for_noise(0) == pytest.approx(1 / 3)
    assert shrink_for_noise(1) == pytest.approx(1 / 2)
    assert shrink_for_noise(2) == pytest.approx(1 / 1.5)
    assert shrink_for_noise(3) == pytest.approx(1 / 1.5)
    assert shrink_for_noise(4) == pytest.approx(1 / 1.3)
    assert shrink_for_noise(5.0) == pytest.approx(1 / 1.2)
    assert set(SHRINK_REDUCTIONS) == set(range(6))
    with pytest.raises(ValueError):
        shrink_for_noise(2.5)
    with pytest.raises(ValueError):
        shrink_for_noise(6)


def test_scenario_at_point_noise_axis():
    scenario = small_scenario(initial_slack=4.0)
    point = scenario_at_point(scenario, "noise_grid", (2, 0.3))
    assert point.noise_radius == 2.0
    assert point.estimate_perturbation == 0.3
    assert point.initial_slack == 6.0
    assert point.shrink == pytest.approx(1 / 1.5)
    # off-table radius keeps the base shrink
    off = scenario_at_point(scenario, "noise_grid", (0.25, 0.0))
    assert off.shrink == scenario.shrink


def test_scenario_at_point_other_axes():
    scenario = small_scenario()
    assert scenario_at_point(scenario, "fault_count", 3).fault_count == 3
    assert (
        scenario_at_point(scenario, "fault_mode", "fully_correlated").fault_mode
        == "fully_correlated"
    )
    assert scenario_at_point(scenario, "scp_iterations", 5).max_iterations == 5
    with pytest.raises(ValueError):
        scenario_at_point(scenario, "slack", 1.0)


def test_build_network_from_path(tmp_path):
    cfg, graph = build_network(SMALL_NET, "distance")
    path = tmp_path / "net.json"
    save_network(path, cfg, graph)
    cfg2, graph2 = build_network({"path": str(path)}, "distance")
    np.testing.assert_allclose(cfg2.positions, cfg.positions)
    assert graph2.edges == graph.edges


def test_build_network_rejects_unknown_preset():
    with pytest.raises(ValueError, match="preset"):
        build_network({"preset": "grid7"}, "distance")


def test_regenerated_networks_differ_per_trial():
    nets = [
        build_network(SMALL_NET, "distance", trial_index=i) for i in range(3)
    ]
    assert not np.allclose(nets[0][0].positions, nets[1][0].positions)
    assert not np.allclose(nets[1][0].positions, nets[2][0].positions)
    fixed_a = build_network(SMALL_NET, "distance")
    fixed_b = build_network(SMALL_NET, "distance")
    np.testing.assert_array_equal(fixed_a[0].positions, fixed_b[0].positions)


def test_aggregate_records_skips_undefined_errors():
    base = dict(derived_seed="0" * 32, status="converged")
    records = [
        TrialRecord(index=0, true_set=(1,), identified_set=(1,),
                    relative_error=0.2, iterations=4, **base),
        TrialRecord(index=1, true_set=(2,), identified_set=(2,),
                    relative_error=0.4, iterations=6, **base),
        TrialRecord(index=2, true_set=(), identified_set=(0,),
                    relative_error=float("nan"), iterations=2, **base),
    ]
    agg = aggregate_records(records)
    assert agg["trials"] == 3
    assert agg["identification_rate"] == pytest.approx(2 / 3)
    assert agg["mean_relative_error"] == pytest.approx(0.3)
    assert agg["median_relative_error"] == pytest.approx(0.3)
    assert agg["std_relative_error"] == pytest.approx(0.1)
    assert agg["mean_iterations"] == pytest.approx(4.0)
    assert agg["undefined_errors"] == 1


def test_aggregate_records_all_undefined_is_nan():
    record = TrialRecord(
        index=0, derived_seed="0" * 32, true_set=(), identified_set=(1,),
        relative_error=float("nan"), iterations=1, status="converged",
    )
    agg = aggregate_records([record])
    assert np.isnan(agg["mean_relative_error"])
    assert np.isnan(agg["median_relative_error"])
    assert agg["undefined_errors"] == 1


def test_sweep_csv_round_trip(tmp_path):
    scenario = small_scenario(trials=3)
    out = tmp_path / "sweep"
    result = monte_carlo_sweep(
        scenario, "fault_count", values=[1, 2], out_dir=out
    )
    trials_path = out / "trials.csv"
    agg_path = out / "aggregate.csv"

    header = trials_path.read_text().splitlines()[0]
    assert header == "# sparseloc-montecarlo schema=1 axis=fault_count"
    assert agg_path.read_text().splitlines()[0] == header

    with open(trials_path, encoding="utf-8") as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    # rebuild the records from the CSV text and recompute one aggregate
    point_rows = [r for r in rows if r["fault_count"] == "2"]
    rebuilt = [
        TrialRecord(
            index=int(r["trial"]),
            derived_seed=r["derived_seed"],
            true_set=tuple(int(i) for i in r["true_set"].split(";") if i),
            identified_set=tuple(
                int(i) for i in r["identified_set"].split(";") if i
            ),
            relative_error=float(r["relative_error"]),
            iterations=int(r["iterations"]),
            status=r["status"],
        )
        for r in point_rows
    ]
    expected = [p for p in result.points if p.params["fault_count"] == 2][0]
    assert rebuilt == list(expected.records)

    with open(agg_path, encoding="utf-8") as fh:
        fh.readline()
        agg_rows = list(csv.DictReader(fh))
    recomputed = aggregate_records(rebuilt)
    written = [r for r in agg_rows if r["fault_count"] == "2"][0]
    for key, value in recomputed.items():
        assert float(written[key]) == pytest.approx(value, nan_ok=True)


def test_sweep_is_reproducible_and_parallel_equivalent(tmp_path):
    scenario = small_scenario(trials=4)
    serial = tmp_path / "serial"
    again = tmp_path / "again"
    parallel = tmp_path / "parallel"
    monte_carlo_sweep(scenario, "fault_count", values=[1, 2], out_dir=serial)
    monte_carlo_sweep(scenario, "fault_count", values=[1, 2], out_dir=again)
    monte_carlo_sweep(
        scenario, "fault_count", values=[1, 2], jobs=2, out_dir=parallel
    )
    for name in ("trials.csv", "aggregate.csv"):
        baseline = (serial / name).read_bytes()
        assert (again / name).read_bytes() == baseline
        assert (parallel / name).read_bytes() == baseline


def test_iteration_cap_sweep_error_decreases():
    scenario = ScenarioConfig(
        network={"agents": 6, "dim": 2, "radius": 8.0, "box": 10.0, "seed": 3},
        fault_count=1,
        initial_slack=2.0,
        trials=5,
        base_seed=7,
    )
    result = monte_carlo_sweep(
        scenario, "scp_iterations", values=[1, 2, 3, 4, 6]
    )
    means = [p.aggregate["mean_relative_error"] for p in result.points]
    assert all(b < a for a, b in zip(means, means[1:]))


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ValueError, match="axis"):
        monte_carlo_sweep(small_scenario(), "slack")


def test_sweep_trials_override():
    result = monte_carlo_sweep(small_scenario(trials=5), "fault_count",
                               values=[1], trials=2)
    assert result.points[0].aggregate["trials"] == 2


def test_scenario_scp_params_forwarding():
    scenario = small_scenario(
        max_iterations=9,
        step_tolerance=1e-5,
        inner_tolerance=1e-7,
        relaxation=1.5,
        support_threshold=0.02,
    )
    params = scenario.scp_params()
    assert params.max_iterations == 9
    assert params.initial_slack == 2.0
    assert params.step_tolerance == 1e-5
    assert params.inner_tolerance == 1e-7
    assert params.relaxation == 1.5
    assert params.support_threshold == 0.02


def test_scenario_file_is_stable_json(tmp_path):
    path = tmp_path / "scenario.json"
    small_scenario().to_file(path)
    payload = json.loads(path.read_text())
    assert payload["network"] == SMALL_NET
    assert payload["fault_count"] == 1
    assert ScenarioConfig.from_json(payload) == small_scenario()
