import json

import numpy as np
import pytest

from satseek.cli import main
from satseek.config import bundled_config

from conftest import REFERENCE_GAIN

BENCH = str(bundled_config("benchmark_2d"))


def _variant(tmp_path, name, **changes):
    data = json.loads(bundled_config("benchmark_2d").read_text())
    for dotted, value in changes.items():
        section, key = dotted.split("__")
        data[section][key] = value
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--config", BENCH, "--out", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    data = json.loads((synth_dir / "gain.json").read_text())
    K = np.array(data["gain"])
    assert K.shape == (2, 2)
    assert data["analysis"]["passed"] and data["inclusion"]["passed"]
    assert set(data["certificate"]) == {"P", "L", "U", "eta"}
    assert "kappa" in data["constants"]
    problem = json.loads((synth_dir / "problem.json").read_text())
    assert {v["name"] for v in problem["variables"]} == {"W", "V", "Z", "Y", "T", "Q0"}
    assert "status: optimal" in (synth_dir / "summary.txt").read_text()


def test_synth_infeasible_exit(tmp_path):
    cfg = _variant(tmp_path, "fast", synthesis__eta=1e6)
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "infeasible" in (tmp_path / "o" / "summary.txt").read_text()


def test_malformed_rational_exit(tmp_path, capsys):
    cfg = _variant(tmp_path, "bad", dither__multipliers=["5.5.5", "7"])
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "dither.multipliers[0]" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["bogus", "--config", BENCH]) == 1
    assert main(["synth"]) == 1
    assert main(["synth", "--config", "/nonexistent.json"]) == 1


def test_analyze_reference_gain(tmp_path):
    gain = tmp_path / "k.json"
    gain.write_text(json.dumps({"gain": REFERENCE_GAIN.tolist()}))
    assert main(["analyze", "--config", BENCH, "--gain", str(gain), "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "certificate.json").read_text())
    assert data["feasible"] and data["analysis"]["passed"]


def test_analyze_destabilizing_gain(tmp_path):
    gain = tmp_path / "k.json"
    gain.write_text(json.dumps([[0.1, 0.0], [0.0, 0.1]]))
    assert main(["analyze", "--config", BENCH, "--gain", str(gain), "--out", str(tmp_path)]) == 2


def test_simulate_outputs_and_determinism(tmp_path, synth_dir):
    cfg = _variant(tmp_path, "short", simulation__t_end=0.5)
    args = ["simulate", "--config", cfg, "--gain", str(synth_dir / "gain.json"), "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trace.csv", "sat_u.svg", "theta.svg", "y.svg", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "trace.csv").read_text().splitlines()[0]
    assert header.startswith("t,theta_hat_1,theta_hat_2,theta_1")


def test_simulate_zero_horizon(tmp_path, synth_dir):
    cfg = _variant(tmp_path, "t0", simulation__t_end=0.0)
    assert main(["simulate", "--config", cfg, "--gain", str(synth_dir / "gain.json"), "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 2


def test_simulate_divergence_exit(tmp_path):
    cfg = _variant(tmp_path, "div", plant__sat_limits=[1e12, 1e12], simulation__t_end=50.0,
                   simulation__gain=[[5.0, 0.0], [0.0, 5.0]])
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 3
    rows = (tmp_path / "trace.csv").read_text().splitlines()
    assert len(rows) > 2
    assert json.loads((tmp_path / "summary.json").read_text())["diverged"]


def test_simulate_diagonal_flags_nonconvergence(tmp_path):
    cfg = json.loads(bundled_config("diagonal_gain").read_text())
    cfg["simulation"]["t_end"] = 3.0
    path = tmp_path / "diag.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) in (0, 3)
    assert not json.loads((tmp_path / "summary.json").read_text())["converged"]


def test_sweep_command(tmp_path, synth_dir):
    cfg = _variant(tmp_path, "sw", sweep__t_end=1.0, sweep__omega_multipliers=[1.0, 2.0, 4.0, 8.0])
    code = main(["sweep", "--config", cfg, "--gain", str(synth_dir / "gain.json"), "--out", str(tmp_path)])
    assert code in (0, 2)
    data = json.loads((tmp_path / "sweep.json").read_text())
    assert "fitted_order" in data and len(data["residuals"]) == 4
    assert (tmp_path / "sweep.svg").exists()
    assert (tmp_path / "sweep.csv").read_text().startswith("omega,residual")


def test_compare_command(tmp_path, synth_dir):
    cfg = _variant(tmp_path, "cmp", simulation__t_end=1.0)
    code = main(["compare", "--config", cfg, "--gain", str(synth_dir / "gain.json"), "--out", str(tmp_path)])
    assert code in (0, 2)
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("lmi,") and lines[2].startswith("diagonal,")
