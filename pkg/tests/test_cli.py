"""CLI: config validation, exit codes, CSV emission, verify, demo-lb."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from fucb_lab import environments as envs
from fucb_lab.cli import (
    load_config,
    main,
    parse_config,
    minimax_lb_curve,
)

GOLDEN = Path(__file__).parent / "data" / "golden_smoke.csv"
EPS = envs.EPSILON_LB


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return str(path)


def base_config(**overrides):
    doc = {
        "environment": {"kind": "crossing"},
        "policy": {"kind": "fucb"},
        "n_grid": [64, 128, 256],
        "replications": 2,
        "base_seed": 42,
    }
    doc.update(overrides)
    return doc


def test_run_oracle_writes_zero_csv(tmp_path, capsys):
    out = tmp_path / "oracle.csv"
    cfg = write_config(tmp_path, base_config(policy={"kind": "oracle"},
                                             output=str(out)))
    assert main(["run", cfg]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,mean_regret,stderr_regret,mean_subopt,stderr_subopt,reps"
    for line in lines[1:]:
        fields = line.split(",")
        assert float(fields[1]) == 0.0 and float(fields[3]) == 0.0
    assert "rate_regret=" in capsys.readouterr().out


def test_run_smoke_matches_golden(tmp_path):
    out = tmp_path / "smoke.csv"
    cfg = write_config(tmp_path, base_config(
        n_grid=[256, 512, 1024, 2048], replications=5, output=str(out)))
    assert main(["run", cfg]) == 0
    assert out.read_bytes() == GOLDEN.read_bytes()


def test_run_summary_contains_rates(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(n_grid=[128, 256, 512],
                                             replications=3))
    assert main(["run", cfg]) == 0
    text = capsys.readouterr().out
    assert "rate_regret=" in text
    assert "rate_regret_logcorrected=" in text
    assert "rate_subopt=" in text


def test_duplicate_horizon_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(n_grid=[64, 64]))
    assert main(["run", cfg]) == 2
    assert "n_grid" in capsys.readouterr().err


def test_unknown_key_exit_2(tmp_path, capsys):
    doc = base_config()
    doc["environment"]["smoothness"] = 1.0
    cfg = write_config(tmp_path, doc)
    assert main(["run", cfg]) == 2
    assert "environment.smoothness" in capsys.readouterr().err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n "environment": }\n', encoding="utf-8")
    assert main(["run", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_beta_and_missing_quantile_c(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(policy={"kind": "fucb", "beta": 2.0}))
    assert main(["run", cfg]) == 2
    cfg = write_config(tmp_path, base_config(
        policy={"kind": "fucb", "functional": {"kind": "quantile", "tau": 0.5}}))
    assert main(["run", cfg]) == 2
    assert "lipschitz_c" in capsys.readouterr().err


def test_quantile_c_from_density_floor(tmp_path):
    doc = base_config(environment={
        "kind": "two-point",
        "p": [{"kind": "constant", "value": 0.4}, {"kind": "affine",
                                                   "intercept": 0.0, "slope": 1.0}],
        "gamma": 1.0, "L": 1.0, "density_floor": 2.0},
        policy={"kind": "fucb", "functional": {"kind": "quantile", "tau": 0.5}})
    config = load_config(write_config(tmp_path, doc))
    assert config.policy_spec.functional.lipschitz_c == 0.5


def test_runtime_failure_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(output="/nonexistent-dir/x.csv"))
    assert main(["run", cfg]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_config_round_trip_identity(tmp_path):
    docs = [
        base_config(),
        base_config(environment={"kind": "margin", "alpha": 0.5}),
        base_config(environment={"kind": "adversarial", "P": 4, "gamma": 1.0,
                                 "alpha": 0.5, "sigma": [1, -1]},
                    policy={"kind": "fucb", "partition": {"P": 3}}),
        base_config(environment={"kind": "constant-gap", "delta": 0.2},
                    policy={"kind": "random"}),
    ]
    for doc in docs:
        first = parse_config(doc)
        second = parse_config(json.loads(json.dumps(first.to_dict())))
        assert first.to_dict() == second.to_dict()


def test_sigma_seed_reproducible(tmp_path):
    doc = base_config(environment={"kind": "adversarial", "P": 8, "gamma": 1.0,
                                   "alpha": 0.5, "sigma_seed": 9})
    a = parse_config(doc).to_dict()["environment"]["sigma"]
    b = parse_config(doc).to_dict()["environment"]["sigma"]
    assert a == b and len(a) == 3 and set(a) <= {-1, 1}


def test_sigma_and_seed_mutually_exclusive(tmp_path, capsys):
    doc = base_config(environment={"kind": "adversarial", "P": 4, "gamma": 1.0,
                                   "alpha": 0.5, "sigma": [1, -1],
                                   "sigma_seed": 2})
    cfg = write_config(tmp_path, doc)
    assert main(["run", cfg]) == 2


def test_trajectory_dump(tmp_path):
    out = tmp_path / "t.csv"
    cfg = write_config(tmp_path, base_config(n_grid=[16, 32], replications=2,
                                             output=str(out)))
    assert main(["run", cfg, "--trajectory"]) == 0
    traj = (tmp_path / "t.csv.traj.csv").read_text().splitlines()
    assert traj[0] == "n,rep,t,bin,arm,inst_regret"
    assert len(traj) == 1 + (16 + 32) * 2


def test_verify_pass_and_fail(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(
        environment={"kind": "margin", "alpha": 0.5}))
    assert main(["verify", cfg]) == 0
    text = capsys.readouterr().out
    assert "holder:" in text and "PASS" in text

    # under-declared Hoelder constant must be caught
    doc = base_config(environment={
        "kind": "two-point",
        "p": [{"kind": "constant", "value": 0.5},
              {"kind": "affine", "intercept": 0.0, "slope": 1.0}],
        "gamma": 1.0, "L": 0.5})
    cfg = write_config(tmp_path, doc)
    assert main(["verify", cfg]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_adversarial_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(
        environment={"kind": "adversarial", "P": 4, "gamma": 1.0, "alpha": 0.5,
                     "sigma": [1, -1]}))
    assert main(["verify", cfg]) == 0
    text = capsys.readouterr().out
    assert "margin:" in text and "family-slope:" in text


def test_verify_skips_margin_without_constants(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(
        environment={"kind": "constant-gap", "delta": 0.2}))
    assert main(["verify", cfg]) == 0
    assert "margin: skipped" in capsys.readouterr().out


def test_run_parallel_flag(tmp_path):
    out1, out2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
    doc = base_config(n_grid=[64, 128], replications=3)
    cfg = write_config(tmp_path, doc)
    assert main(["run", cfg, "--out", str(out1), "--parallel", "1"]) == 0
    assert main(["run", cfg, "--out", str(out2), "--parallel", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_minimax_lb_curve_arithmetic():
    # gamma=1, d=1, alpha=0.5: exponent 1 - 1.5/3 = 0.5
    C0 = 8.0 * EPS ** -0.5
    expected = 4096 ** 0.5 / (64 ** 3 * (C0 + 1) ** 2)
    assert minimax_lb_curve(4096, 1.0, 0.5, 1, C0) == pytest.approx(expected, rel=1e-12)
    an, bn = minimax_lb_curve(1024, 1.0, 0.5, 1, C0), minimax_lb_curve(4096, 1.0, 0.5, 1, C0)
    assert bn / an == pytest.approx(4 ** 0.5)      # n^0.5 scaling


def test_all_plus_sigma_makes_arm_two_optimal():
    inst = envs.build_adversarial(4, (1, 1), 1.0, 0.5)
    env = inst.environment()
    from fucb_lab.partition import CubicPartition
    part = CubicPartition(P=4, d=1)
    for j in range(1, inst.m + 1):
        assert env.oracle_arm(part.bin_center(j)) == 2


def test_demo_lb_csv(tmp_path, capsys):
    out = tmp_path / "lb.csv"
    code = main(["demo-lb", "--P", "4", "--n-grid", "64,128,256", "--reps", "2",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,mean_regret,stderr_regret,lower_bound"
    assert len(lines) == 4
    bound = float(lines[1].split(",")[3])
    assert bound == pytest.approx(minimax_lb_curve(64, 1.0, 0.5, 1,
                                                   8.0 * EPS ** -0.5))


def test_demo_lb_bad_grid(capsys):
    assert main(["demo-lb", "--P", "4", "--n-grid", "128,64"]) == 2


def test_console_entry_point():
    result = subprocess.run([sys.executable, "-m", "fucb_lab.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert "run" in result.stdout and "verify" in result.stdout


def test_threads_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("FUCB_LAB_THREADS", "2")
    cfg = write_config(tmp_path, base_config(n_grid=[32, 64], replications=2))
    assert main(["run", cfg]) == 0
