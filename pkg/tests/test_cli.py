import json
import subprocess
import sys

import numpy as np
import pytest

from sparseloc.cli import main
from sparseloc.harness import ScenarioConfig
from sparseloc.network import load_network

# box 10 keeps the initial measurement residual well above the slack, so a
# recovery never short-circuits to the zero vector
SMALL_NET_ARGS = [
    "--n", "6", "--dim", "2", "--radius", "8.0", "--box", "10.0", "--seed", "3",
]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def write_network(capsys, tmp_path, name="net.json"):
    path = tmp_path / name
    code, payload = run_cli(
        capsys, "generate", *SMALL_NET_ARGS, "--out", str(path)
    )
    assert code == 0
    return path, payload


def test_generate_writes_a_loadable_network(capsys, tmp_path):
    path, payload = write_network(capsys, tmp_path)
    assert payload["path"] == str(path)
    assert payload["agents"] == 6
    assert payload["dim"] == 2
    assert payload["rigid"] is True
    cfg, graph = load_network(path)
    assert cfg.num_agents == 6
    assert graph.num_edges == payload["edges"]


def test_generate_uav13_preset(capsys, tmp_path):
    path = tmp_path / "uav.json"
    code, payload = run_cli(
        capsys, "generate", "--preset", "uav13", "--seed", "0",
        "--out", str(path),
    )
    assert code == 0
    assert payload["agents"] == 13
    assert payload["edges"] == 36
    assert payload["rigid"] is True


def test_generate_rejects_unknown_preset(capsys, tmp_path):
    with pytest.raises(SystemExit):
        main(["generate", "--preset", "grid7", "--out", str(tmp_path / "x")])


def test_analyze_reports_rigidity_and_certificates(capsys, tmp_path):
    path, _ = write_network(capsys, tmp_path)
    code, payload = run_cli(capsys, "analyze", str(path))
    assert code == 0
    assert payload["validation"]["ok"] is True
    assert payload["rigidity"]["is_rigid"] is True
    assert payload["rigidity"]["rank"] == 2 * 6 - 3
    assert payload["rigidity"]["lambda_tilde"] > 0
    assert payload["l0_recovery_limit"] == (6 - 1) // 2
    level = payload["certified_level"]
    assert isinstance(level, int) and level >= 1
    # one certificate per level plus the first failing one
    assert len(payload["certificates"]) == level + 1
    assert all(c["holds"] == "yes" for c in payload["certificates"][:level])


def test_analyze_max_s_caps_the_certificate_scan(capsys, tmp_path):
    path, _ = write_network(capsys, tmp_path)
    code, payload = run_cli(capsys, "analyze", str(path), "--max-s", "1")
    assert code == 0
    assert payload["certified_level"] >= 1
    assert len(payload["certificates"]) == 1


def test_analyze_flags_invalid_network(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps(
            {
                "dim": 2,
                "positions": [[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]],
                "edges": [[0, 1], [1, 2], [0, 2]],
            }
        )
    )
    code, payload = run_cli(capsys, "analyze", str(path))
    assert code == 1
    assert payload["validation"]["ok"] is False
    assert payload["validation"]["issues"]
    assert "rigidity" not in payload


def test_recover_writes_trace_and_record(capsys, tmp_path):
    net_path, _ = write_network(capsys, tmp_path)
    scenario = ScenarioConfig(
        network={"path": str(net_path)},
        fault_count=1,
        initial_slack=2.0,
        trials=1,
        base_seed=5,
    )
    sc_path = tmp_path / "scenario.json"
    scenario.to_file(sc_path)
    out_dir = tmp_path / "run"
    code, payload = run_cli(
        capsys, "recover", str(net_path), str(sc_path),
        "--trial", "0", "--out", str(out_dir),
    )
    assert code == 0
    assert payload["converged"] is True
    assert payload["support"] == payload["trial"]["true_set"]
    assert payload["trial"]["relative_error"] < 1e-5
    assert payload["trial"]["status"] == "converged"
    trace = out_dir / "trace_0.csv"
    assert payload["trace_csv"] == str(trace)
    header = trace.read_text().splitlines()[0]
    assert header.split(",")[:2] == ["iteration", "step_norm"]
    x_star = np.asarray(payload["x_star"])
    assert x_star.shape == (6, 2)


def test_montecarlo_writes_both_csvs(capsys, tmp_path):
    # 8 agents so the default fault-count axis 1..6 stays below the size
    net_path = tmp_path / "net8.json"
    code, _ = run_cli(
        capsys, "generate", "--n", "8", "--dim", "2", "--radius", "9.0",
        "--box", "10.0", "--seed", "2", "--out", str(net_path),
    )
    assert code == 0
    scenario = ScenarioConfig(
        network={"path": str(net_path)},
        fault_count=1,
        initial_slack=2.0,
        trials=2,
        base_seed=5,
    )
    sc_path = tmp_path / "scenario.json"
    scenario.to_file(sc_path)
    out_dir = tmp_path / "mc"
    code, payload = run_cli(
        capsys, "montecarlo", str(sc_path),
        "--sweep", "fault_count", "--trials", "2", "--out", str(out_dir),
    )
    assert code == 0
    assert payload["axis"] == "fault_count"
    assert (out_dir / "trials.csv").exists()
    assert (out_dir / "aggregate.csv").exists()
    assert len(payload["points"]) == 6
    for point in payload["points"]:
        assert point["aggregate"]["trials"] == 2


def test_montecarlo_rejects_unknown_axis(capsys, tmp_path):
    sc_path = tmp_path / "scenario.json"
    ScenarioConfig(trials=1).to_file(sc_path)
    with pytest.raises(SystemExit):
        main(["montecarlo", str(sc_path), "--sweep", "slack"])


def test_env_var_overrides_out_flag(capsys, tmp_path, monkeypatch):
    net_path, _ = write_network(capsys, tmp_path)
    scenario = ScenarioConfig(
        network={"path": str(net_path)},
        fault_count=1,
        initial_slack=2.0,
        trials=1,
    )
    sc_path = tmp_path / "scenario.json"
    scenario.to_file(sc_path)
    env_dir = tmp_path / "from_env"
    flag_dir = tmp_path / "from_flag"
    monkeypatch.setenv("SPARSELOC_OUT_DIR", str(env_dir))
    code, payload = run_cli(
        capsys, "recover", str(net_path), str(sc_path), "--out", str(flag_dir)
    )
    assert code == 0
    assert (env_dir / "trace_0.csv").exists()
    assert not flag_dir.exists()


def test_oracle_spark_matches_agent_count_minus_one(capsys, tmp_path):
    path, _ = write_network(capsys, tmp_path)
    code, payload = run_cli(capsys, "oracle", "spark", str(path))
    assert code == 0
    assert payload["block_spark"] == 5
    assert payload["instances_examined"] > 0


def test_oracle_l0_recovers_planted_fault(capsys, tmp_path):
    path, _ = write_network(capsys, tmp_path)
    code, payload = run_cli(
        capsys, "oracle", "l0", str(path),
        "--faults", "1", "--s-max", "1", "--seed", "4",
    )
    assert code == 0
    assert payload["unique"] is True
    assert payload["recovered_support"] == payload["planted_support"]


def test_oracle_nsp_agrees_with_certificate(capsys, tmp_path):
    path, _ = write_network(capsys, tmp_path)
    code, payload = run_cli(
        capsys, "oracle", "nsp", str(path), "--s", "1", "--samples", "5000",
    )
    assert code == 0
    holds = payload["certificate_holds"] == "yes"
    sampled_ok = payload["sampled_worst_ratio"] < 1.0
    assert holds == sampled_ok
    assert payload["sampled_worst_ratio"] <= 1.0 or not holds


def test_cli_requires_a_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "sparseloc.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "sparseloc" in proc.stdout
