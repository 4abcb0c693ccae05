import json

import numpy as np
import pandas as pd
import pytest

from inputs.problem import ControlProblem
from inputs.shapes import ControlShape
from inputs.state import FourierState
from main import main

T = 2.0 * np.pi + 1.0


@pytest.fixture
def problem_file(tmp_path):
    initial = FourierState.random(4, np.random.default_rng(3), kmin=3)
    problem = ControlProblem(ControlShape.dipole(), initial, T=T, K=4)
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(problem.to_dict()))
    return path


def test_spectrum_table(tmp_path):
    assert main(["spectrum", "--kmax", "30", "--out", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "spectrum.csv")
    assert len(frame) == 122
    summary = json.loads((tmp_path / "spectrum.json").read_text())
    assert summary["rows"] == 122
    assert summary["metadata"]["parameters"] == {"figures": False, "kmax": 30}


def test_spectrum_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["spectrum", "--kmax", "12", "--figures", "--out", str(tmp_path / name)]) == 0
    for filename in ("spectrum.csv", "spectrum.json", "spectrum_figure.json"):
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()


def test_invalid_truncation_exits_with_two(tmp_path, capsys):
    assert main(["spectrum", "--kmax", "2", "--out", str(tmp_path)]) == 2
    assert "K >= 3" in capsys.readouterr().err


def test_missing_field_is_reported(tmp_path, problem_file, capsys):
    data = json.loads(problem_file.read_text())
    del data["T"]
    problem_file.write_text(json.dumps(data))
    assert main(["synthesize", "--problem", str(problem_file), "--out", str(tmp_path / "run")]) == 2
    assert "'T'" in capsys.readouterr().err


def test_free_solve(tmp_path):
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"state": FourierState.from_modes(3, pos={0: 1.0}, vel={0: 0.5}).to_dict()}))
    assert main(["solve", "--state", str(state), "--T", "2.0", "--out", str(tmp_path)]) == 0
    final = FourierState.from_dict(json.loads((tmp_path / "final_state.json").read_text())["state"])
    assert final.means[0] == pytest.approx(2.0)


def test_moments_round_trip(tmp_path):
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"random": {"K": 4, "kmin": 3}}))
    assert main(["moments", "build", "--state", str(state), "--T", str(T), "--kmax", "4",
                 "--shape", "dipole", "--out", str(tmp_path)]) == 0
    assert main(["moments", "solve", "--sys", str(tmp_path / "system.json"), "--out", str(tmp_path)]) == 0
    control = json.loads((tmp_path / "control.json").read_text())
    assert control["report"]["constraints"] == 16
    assert control["report"]["moment_residual_relative"] <= 1e-7
    residuals = pd.read_csv(tmp_path / "residuals.csv")
    assert len(residuals) == 16


def test_synthesize_then_verify(tmp_path, problem_file):
    run = tmp_path / "run"
    assert main(["synthesize", "--problem", str(problem_file), "--figures", "--out", str(run)]) == 0
    for name in ("problem.json", "control.json", "final_state.json", "report.json", "control.csv",
                 "control_figure.json"):
        assert (run / name).exists()
    report = json.loads((run / "report.json").read_text())["report"]
    assert report["final_norm_ratio"] <= 1e-6

    assert main(["verify", "--run", str(run)]) == 0
    verified = json.loads((run / "verify_report.json").read_text())["report"]
    assert verified["moment_residual_max"] == pytest.approx(report["moment_residual_max"], rel=1e-12, abs=1e-15)
    assert "phase_timings" not in verified


def test_tampered_control_is_detected(tmp_path, problem_file, capsys):
    run = tmp_path / "run"
    assert main(["synthesize", "--problem", str(problem_file), "--out", str(run)]) == 0
    original = json.loads((run / "report.json").read_text())["report"]["moment_residual_max"]
    controls = json.loads((run / "control.json").read_text())
    samples = controls["phases"][0]["control"]["samples"]
    middle = len(samples) // 2
    samples[middle] = [samples[middle][0] + 1.0, 0.0]
    (run / "control.json").write_text(json.dumps(controls))
    assert main(["verify", "--run", str(run)]) == 3
    assert "moment_residual_relative" in capsys.readouterr().err
    verified = json.loads((run / "verify_report.json").read_text())["report"]
    assert verified["moment_residual_max"] > 100.0 * max(original, 1e-14)
    assert verified["passed"] is False
    assert any(name.startswith("moment_residual_relative") for name in verified["failed_checks"])


def test_synthesize_fails_on_missed_thresholds(tmp_path, problem_file, monkeypatch, capsys):
    monkeypatch.setattr("analysis.synthesis.MOMENT_RELATIVE_LIMIT", 0.0)
    run = tmp_path / "run"
    assert main(["synthesize", "--problem", str(problem_file), "--out", str(run)]) == 3
    assert "check failed: moment_residual_relative" in capsys.readouterr().err
    report = json.loads((run / "report.json").read_text())["report"]
    assert report["passed"] is False


def test_biorthogonal_synthesis_refuses_a_short_horizon(tmp_path, problem_file, capsys):
    code = main(["synthesize", "--problem", str(problem_file), "--method", "biorthogonal",
                 "--out", str(tmp_path / "run")])
    assert code == 3
    assert "min-norm" in capsys.readouterr().err
