import json
import math
import subprocess
import sys

import pytest

from dispersal.cli import ConfigError, main, parse_masses, resolve_seed


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_simulate_minimal_config(tmp_path):
    cfg = _cfg(tmp_path, {"policy": "rdcs", "masses": [0.3, 0.1, 0.2], "trials": 30})
    assert main(["simulate", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "simulate.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "trial,N,occupied,free"
    assert len(lines) == 32
    summary = json.loads((tmp_path / "o" / "simulate.json").read_text())
    assert summary["config"]["seed"] == 5
    assert sum(summary["N_counts"].values()) == 30


@pytest.mark.parametrize("cmd", ["simulate", "phase", "cost", "limits"])
def test_same_seed_same_bytes(tmp_path, cmd):
    small = {"simulate": {}, "phase": {"n": 400}, "cost": {"n": 400}, "limits": {"N": 256}}[cmd]
    cfg = _cfg(tmp_path, small)
    outs = []
    for run, threads in (("a", "1"), ("b", "3")):
        d = tmp_path / run
        assert main([cmd, "--config", cfg, "--seed", "123", "--trials", "6",
                     "--threads", threads, "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]


def test_bad_masses_exit_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"masses": [0.6, 0.5]})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    cfg = _cfg(tmp_path, {"masses": [-0.1]})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_malformed_json_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_limits_at_zero(tmp_path):
    cfg = _cfg(tmp_path, {"lambdas": [0.0], "N": 256})
    assert main(["limits", "--config", cfg, "--trials", "4", "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "limits.json").read_text())
    assert out["sqrt_pi_over_2"] == pytest.approx(math.sqrt(math.pi / 2))
    assert out["table"][0]["closed_form"] == pytest.approx(math.sqrt(math.pi / 2))


def test_defaults_produce_output(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--trials", "20"]) == 0
    assert len((tmp_path / "simulate.csv").read_text().splitlines()) == 22


def test_cost_per_lambda_files(tmp_path):
    cfg = _cfg(tmp_path, {"n": 400, "lambdas": [0.0, 1.0]})
    assert main(["cost", "--config", cfg, "--trials", "3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "cost_lambda=0.0.csv").exists() and (tmp_path / "cost_lambda=1.0.csv").exists()


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv("DISPERSALLAB_SEED", raising=False)
    assert resolve_seed("7", {"seed": 9}) == 7
    assert resolve_seed(None, {"seed": 9}) == 9
    monkeypatch.setenv("DISPERSALLAB_SEED", "11")
    assert resolve_seed(None, {}) == 11
    with pytest.raises(ConfigError):
        resolve_seed("-1", {})


def test_parse_masses_forms():
    assert parse_masses({"equal": {"w": 0.1, "k": 3}}) == [0.1] * 3
    import numpy as np
    m = parse_masses({"iid": {"k": 50, "scale": 0.05}}, np.random.default_rng(0))
    assert 0 < len(m) <= 50 and sum(m) <= 0.95
    with pytest.raises(ConfigError):
        parse_masses({"iid": {"k": 3}})
    with pytest.raises(ConfigError):
        parse_masses("heavy")


def test_verify_quick_reports_controls_separately(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dispersal", "verify", "--quick", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "[negative controls]" in proc.stdout
    out = json.loads((tmp_path / "verify.json").read_text())
    assert len(out["criteria"]) == 12 and all(c["passed"] for c in out["criteria"])
    assert [c["name"] for c in out["negative_controls"]] == ["C13 negative controls detected"]
    assert out["known_unattainable"][0]["passed"] is False
