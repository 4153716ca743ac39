"""Config validation, CLI exit codes, determinism, and command round-trips."""

import json
import math

import numpy as np
import pytest

from tsgain.cli import main
from tsgain.errors import ConfigError
from tsgain.scenario import load_config, parse_config, run_scenario
from tsgain.trace import SimulationTrace, TraceRecord


def scalar_config(**run_overrides):
    cfg = {
        "plant": {"A": [[1.0]], "B": [[1.0]], "C": [[1.0]], "x0": [1.0]},
        "timescale": {"mode": "program", "segments": [{"dense": 5.0}]},
        "controller": {"k0": 0.5, "policy": "mimo_bound", "eps1": 0.1, "cb": [[1.0]]},
        "run": {"horizon": 5.0, "h_int": 0.001, "out": "trace.csv"},
    }
    cfg["run"].update(run_overrides)
    return cfg


def write_config(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestConfigParsing:
    def test_missing_plant_matrix_names_field(self):
        data = scalar_config()
        del data["plant"]["A"]
        with pytest.raises(ConfigError, match=r"plant\.A"):
            parse_config(data)

    def test_zero_horizon_rejected(self):
        with pytest.raises(ConfigError, match=r"run\.horizon"):
            parse_config(scalar_config(horizon=0.0))

    def test_unknown_field_rejected(self):
        data = scalar_config()
        data["plant"]["D"] = [[0.0]]
        with pytest.raises(ConfigError, match=r"plant.*D"):
            parse_config(data)

    def test_unknown_policy_rejected(self):
        data = scalar_config()
        data["controller"]["policy"] = "banana"
        with pytest.raises(ConfigError, match="banana"):
            parse_config(data)

    def test_policy_key_mismatch_rejected(self):
        data = scalar_config()
        data["controller"]["policy"] = "ilchmann_townley"
        # eps1/cb belong to mimo_bound and must be flagged
        with pytest.raises(ConfigError, match="do not apply"):
            parse_config(data)

    def test_bad_segment_rejected(self):
        data = scalar_config()
        data["timescale"]["segments"] = [{"dense": 1.0, "gap": 1.0}]
        with pytest.raises(ConfigError, match=r"segments\[0\]"):
            parse_config(data)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"plant": \n !nope}')
        with pytest.raises(ConfigError, match="broken.json:2"):
            load_config(path)

    def test_wiggle_parsing(self):
        data = scalar_config()
        data["controller"]["wiggle"] = {"mode": "random", "resolution_bits": 8, "seed": 7}
        cfg = parse_config(data)
        assert cfg.policy.wiggle is not None
        data["controller"]["wiggle"] = {"mode": "repeating", "values": [0.5, 1.0]}
        assert parse_config(data).policy.wiggle.period == 2
        data["controller"]["wiggle"] = {"mode": "repeating"}
        # generated sequence has n! + 1 entries for this first-order plant
        assert parse_config(data).policy.wiggle.period == 2


class TestSimulateCommand:
    def test_scalar_run_and_analyze_round_trip(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, scalar_config(out=str(tmp_path / "t.csv")))
        assert main(["simulate", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "final_k" in out
        trace = SimulationTrace.read_csv(tmp_path / "t.csv")
        trace.validate()
        gains = trace.gains
        assert gains[0] == 0.5
        assert np.all(np.diff(gains) >= 0)
        assert gains[-1] > 1.0
        assert trace.norms[-1] < trace.norms[0]
        assert main(["analyze", str(tmp_path / "t.csv")]) == 0

    def test_determinism_byte_identical(self, tmp_path):
        data = scalar_config(horizon=2.0)
        data["timescale"] = {"mode": "blocking", "continuous_run": 0.5, "block_cap_fraction": 0.9}
        data["controller"]["wiggle"] = {"mode": "random", "resolution_bits": 8, "seed": 5}
        cfg_path = write_config(tmp_path, data)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", str(cfg_path), "--out", str(out1)]) == 0
        assert main(["simulate", str(cfg_path), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_seed_changes_wiggled_trace(self, tmp_path):
        data = scalar_config(horizon=2.0)
        data["timescale"] = {"mode": "blocking", "continuous_run": 0.5, "block_cap_fraction": 0.9}
        data["controller"]["wiggle"] = {"mode": "random", "resolution_bits": 8}
        cfg_path = write_config(tmp_path, data)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", str(cfg_path), "--out", str(out1), "--seed", "1"]) == 0
        assert main(["simulate", str(cfg_path), "--out", str(out2), "--seed", "2"]) == 0
        assert out1.read_bytes() != out2.read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, scalar_config(horizon=0.0))
        assert main(["simulate", str(cfg_path)]) == 2
        assert "run.horizon" in capsys.readouterr().err

    def test_missing_config_exit_code(self, capsys):
        assert main(["simulate", "no_such_file.json"]) == 2

    def test_assumption_failure_exit_code(self, tmp_path, capsys):
        data = scalar_config()
        data["plant"]["C"] = [[-1.0]]
        data["controller"]["cb"] = [[1.0]]
        cfg_path = write_config(tmp_path, data)
        assert main(["simulate", str(cfg_path)]) == 3
        assert "assumption" in capsys.readouterr().err

    def test_blowup_exit_code_with_partial_trace(self, tmp_path, capsys):
        data = {
            "plant": {"A": [[3.0]], "B": [[1.0]], "C": [[1.0]], "x0": [1.0]},
            "timescale": {"mode": "program", "segments": [{"gap": 2.0}]},
            "controller": {"k0": 0.01, "policy": "fixed", "mu": 2.0},
            "run": {"horizon": 40.0, "h_int": 0.001, "out": str(tmp_path / "boom.csv")},
        }
        cfg_path = write_config(tmp_path, data)
        assert main(["simulate", str(cfg_path)]) == 4
        err = capsys.readouterr().err
        assert "blow-up" in err
        trace = SimulationTrace.read_csv(tmp_path / "boom.csv")
        assert len(trace) >= 2
        assert np.all(np.isfinite(trace.norms))

    def test_marginal_plant_warns_but_runs(self, tmp_path, capsys):
        data = {
            "plant": {
                "A": [[0.0, 1.0], [-1.0, 1.0]],
                "B": [[1.0], [1.0]],
                "C": [[1.0, 0.0]],
                "x0": [0.5, 0.0],
            },
            "timescale": {"mode": "blocking", "continuous_run": 1.0, "block_cap_fraction": 0.9},
            "controller": {"k0": 0.5, "policy": "mimo_bound", "eps1": 0.1, "cb": [[1.0]]},
            "run": {"horizon": 3.0, "h_int": 0.001, "out": str(tmp_path / "m.csv")},
        }
        cfg_path = write_config(tmp_path, data)
        assert main(["simulate", str(cfg_path)]) == 0
        assert "marginal" in capsys.readouterr().err

    def test_bundled_scenario_by_name(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TSGAIN_OUT_DIR", str(tmp_path))
        assert main(["simulate", "scalar", "--horizon", "1.0"]) == 0
        assert (tmp_path / "scalar_trace.csv").exists()

    def test_policy_override(self, tmp_path):
        cfg_path = write_config(tmp_path, scalar_config(horizon=1.0, out=str(tmp_path / "p.csv")))
        assert main(["simulate", str(cfg_path), "--policy", "ilchmann_townley"]) == 0
        assert main(["simulate", str(cfg_path), "--policy", "fixed"]) == 2  # mu is required


class TestCheckCommand:
    def test_oscillatory_plant_report(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("TSGAIN_OUT_DIR", str(tmp_path))
        assert main(["check", "fig1"]) == 0
        out = capsys.readouterr().out
        assert "marginal" in out
        assert "pass" in out
        kv = (tmp_path / "fig1_check.kv").read_text()
        assert "a2.pass=True" in kv
        assert "a1.verdict=marginal" in kv

    def test_near_resonant_graininess_flagged(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("TSGAIN_OUT_DIR", str(tmp_path))
        assert main(["check", "fig1", "--mu", "3.6276"]) == 0
        out = capsys.readouterr().out
        assert "VIOLATION" in out

    def test_scalar_plant_all_pass(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("TSGAIN_OUT_DIR", str(tmp_path))
        assert main(["check", "scalar"]) == 0
        out = capsys.readouterr().out
        assert "strict" in out
        assert "VIOLATION" not in out

    def test_a2_failure_exit_code(self, tmp_path, capsys):
        data = scalar_config()
        data["plant"]["C"] = [[-1.0]]
        data["controller"] = {"k0": 0.5, "policy": "fixed", "mu": 0.1}
        cfg_path = write_config(tmp_path, data, name="bad.json")
        monkey_out = tmp_path / "bad_check.kv"
        assert main(["check", str(cfg_path), "--out", str(monkey_out)]) == 3


class TestAnalyzeCommand:
    def _write_exponential_trace(self, path, rate=0.5, scale=3.0):
        times = np.linspace(0.0, 10.0, 1001)
        records = [
            TraceRecord(
                t=float(t),
                mu=0.0,
                k=1.0,
                blocked=False,
                mu_bar=1.9,
                y=[scale * math.exp(-rate * t)],
                x=[scale * math.exp(-rate * t)],
            )
            for t in times
        ]
        SimulationTrace(records).write_csv(path)

    def test_exact_exponential_metrics(self, tmp_path, capsys):
        path = tmp_path / "exp.csv"
        self._write_exponential_trace(path)
        assert main(["analyze", str(path)]) == 0
        out = capsys.readouterr().out
        alpha = float(next(l for l in out.splitlines() if l.startswith("envelope_alpha")).split("=")[1])
        assert math.isclose(alpha, 1.0, abs_tol=1e-6)
        realized = float(next(l for l in out.splitlines() if l.startswith("realized_alpha")).split("=")[1])
        assert math.isclose(realized, 0.5, abs_tol=1e-9)

    def test_zero_output_energy(self, tmp_path, capsys):
        times = np.linspace(0.0, 1.0, 11)
        records = [
            TraceRecord(t=float(t), mu=0.0, k=1.0, blocked=False, mu_bar=1.9, y=[0.0], x=[1.0])
            for t in times
        ]
        path = tmp_path / "silent.csv"
        SimulationTrace(records).write_csv(path)
        assert main(["analyze", str(path)]) == 0
        out = capsys.readouterr().out
        assert "y_l2_total = 0" in out

    def test_malformed_csv_exit_code(self, tmp_path, capsys):
        path = tmp_path / "junk.csv"
        path.write_text("not,a,trace\n1,2,3\n")
        assert main(["analyze", str(path)]) == 2

    def test_report_file(self, tmp_path):
        path = tmp_path / "exp.csv"
        self._write_exponential_trace(path)
        out_path = tmp_path / "report.kv"
        assert main(["analyze", str(path), "--out", str(out_path)]) == 0
        assert "envelope_alpha" in out_path.read_text()


class TestBundledScenarios:
    @pytest.mark.parametrize("name", ["fig1", "scalar", "uniform_h", "ilchmann"])
    def test_all_load_and_run_briefly(self, name, tmp_path, monkeypatch):
        monkeypatch.setenv("TSGAIN_OUT_DIR", str(tmp_path))
        assert main(["simulate", name, "--horizon", "2.0"]) == 0
        csv_files = list(tmp_path.glob("*.csv"))
        assert len(csv_files) == 1
        trace = SimulationTrace.read_csv(csv_files[0])
        trace.validate()

    def test_run_scenario_api(self):
        from tsgain.cli import _resolve_config_path

        cfg = load_config(_resolve_config_path("uniform_h"))
        result = run_scenario(cfg)
        assert not result.blew_up
        result.trace.validate()
        # fixed-mu program: every interior record is a scattered block
        mus = result.trace.mus[:-1]
        assert np.allclose(mus, 0.1)
