import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from entropic_dynamics.cli import main
from entropic_dynamics.io import SnapshotError, load_snapshot, save_snapshot, sidecar_path
from entropic_dynamics.scenario import ScenarioError, load_scenario, run_maxent, run_scenario
from entropic_dynamics.wavefield import Grid1D, gaussian_packet

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, obj, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


BASE = {
    "version": 1,
    "name": "t",
    "grid": {"dx": 0.05, "n": 400},
    "initial_state": {"kind": "gaussian", "x0": 0.0, "sigma0": 1.0, "k0": 1.0},
    "potential": {"kind": "harmonic", "omega": 1.0},
    "evolution": {"dt": 0.01, "steps": 100, "checkpoint_every": 25},
}


def test_snapshot_round_trip_is_byte_identical(tmp_path):
    g = Grid1D.centered(0.05, 400)
    psi = gaussian_packet(g, 0.3, 1.0, 2.0).with_psi(gaussian_packet(g, 0.3, 1.0, 2.0).psi, t=0.75)
    a = save_snapshot(psi, tmp_path / "a.csv")
    back = load_snapshot(a)
    assert np.array_equal(back.psi, psi.psi)
    assert back.t == 0.75 and back.grid == g
    b = save_snapshot(back, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert sidecar_path(a).read_bytes() == sidecar_path(b).read_bytes()


def test_snapshot_tamper_is_rejected(tmp_path):
    g = Grid1D.centered(0.05, 400)
    p = save_snapshot(gaussian_packet(g, 0.0, 1.0), tmp_path / "s.csv")
    lines = p.read_text().splitlines()
    # wrong norm
    bad = lines[:]
    bad[100] = bad[100].split(",")[0] + ",5.0,0.0"
    p.write_text("\n".join(bad) + "\n")
    with pytest.raises(SnapshotError):
        load_snapshot(p)
    # missing row
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(SnapshotError):
        load_snapshot(p)
    # x column off the sidecar grid
    bad = lines[:]
    x, re_, im = bad[5].split(",")
    bad[5] = f"{float(x) + 1e-3!r},{re_},{im}"
    p.write_text("\n".join(bad) + "\n")
    with pytest.raises(SnapshotError):
        load_snapshot(p)
    # bad header
    p.write_text("\n".join(["a,b,c"] + lines[1:]) + "\n")
    with pytest.raises(SnapshotError):
        load_snapshot(p)


def test_unknown_key_rejected(tmp_path):
    p = _write(tmp_path, {**BASE, "colour": "red"})
    with pytest.raises(ScenarioError):
        load_scenario(p)
    nested = json.loads(json.dumps(BASE))
    nested["grid"]["spacing"] = 1
    with pytest.raises(ScenarioError):
        load_scenario(_write(tmp_path, nested))


def test_missing_version_rejected(tmp_path):
    obj = dict(BASE)
    obj.pop("version")
    with pytest.raises(ScenarioError, match="version"):
        load_scenario(_write(tmp_path, obj))
    with pytest.raises(ScenarioError):
        load_scenario(_write(tmp_path, {**BASE, "version": 2}))


def test_types_are_strict(tmp_path):
    obj = json.loads(json.dumps(BASE))
    obj["grid"]["n"] = "400"
    with pytest.raises(ScenarioError):
        load_scenario(_write(tmp_path, obj))


def test_evolve_outputs(tmp_path):
    summary = run_scenario("evolve", _write(tmp_path, BASE), tmp_path / "out")
    assert summary["passed"]
    for name in ("checkpoints.csv", "density.csv", "final.csv", "final.json", "summary.json"):
        assert (tmp_path / "out" / name).exists()
    final = load_snapshot(tmp_path / "out" / "final.csv")
    assert final.t == pytest.approx(1.0)


def test_snapshot_as_initial_state(tmp_path):
    run_scenario("evolve", _write(tmp_path, BASE), tmp_path / "first")
    obj = json.loads(json.dumps(BASE))
    obj["initial_state"] = {"kind": "snapshot", "path": "first/final.csv"}
    summary = run_scenario("evolve", _write(tmp_path, obj, "second.json"), tmp_path / "second")
    assert summary["passed"]


def test_expression_potential(tmp_path):
    obj = json.loads(json.dumps(BASE))
    obj["potential"] = {"kind": "expression", "expression": "0.5*x^2 + 0.1*sin(t)*x"}
    summary = run_scenario("evolve", _write(tmp_path, obj), tmp_path / "out")
    assert "energy_relative_drift" not in summary["checks"]
    assert summary["passed"]


def test_maxent_problems(tmp_path):
    s = run_maxent(SCENARIOS / "maxent_two_state.json", tmp_path / "a")
    assert s["classification"] == "fully"
    assert (tmp_path / "a" / "posterior.csv").exists()
    s = run_maxent(SCENARIOS / "maxent_gaussian.json", tmp_path / "b")
    assert s["classification"] == "well" and s["converged"]


def _cli(args):
    return main([str(a) for a in args])


def test_exit_codes(tmp_path, capsys):
    assert _cli(["maxent", SCENARIOS / "maxent_two_state.json", "--out", tmp_path / "m", "--quiet"]) == 0
    assert _cli(["maxent", SCENARIOS / "maxent_overconstrained.json", "--out", tmp_path / "o"]) == 2
    bad = _write(tmp_path, {**BASE, "extra": 1}, "bad.json")
    assert _cli(["evolve", bad, "--out", tmp_path / "b"]) == 3
    assert _cli(["evolve", tmp_path / "missing.json", "--out", tmp_path / "c"]) == 3
    obj = json.loads(json.dumps(BASE))
    obj["potential"] = {"kind": "expression", "expression": "log(x)"}
    assert _cli(["evolve", _write(tmp_path, obj, "dom.json"), "--out", tmp_path / "d"]) == 3
    obj["potential"] = {"kind": "expression", "expression": "x +"}
    assert _cli(["evolve", _write(tmp_path, obj, "syn.json"), "--out", tmp_path / "e"]) == 3
    # a declared check that fails
    obj = json.loads(json.dumps(BASE))
    obj["evolution"]["checks"] = {"norm_drift_per_step": 1e-30}
    obj["evolution"]["steps"] = 10
    assert _cli(["evolve", _write(tmp_path, obj, "strict.json"), "--out", tmp_path / "f"]) == 3
    # missing section needed by the command
    assert _cli(["sample", _write(tmp_path, BASE, "nosampler.json"), "--out", tmp_path / "g"]) == 3
    err = capsys.readouterr().err
    assert "invalid" in err and "infeasible" in err


def test_filter_zero_probability_is_infeasible(tmp_path):
    obj = json.loads(json.dumps(BASE))
    obj["initial_state"] = {"kind": "harmonic_ground", "omega": 1.0}
    obj["grid"] = {"dx": 0.1, "n": 160}
    obj["measurement"] = {"device": {"basis": {"preset": "harmonic", "n_states": 4}},
                          "n_shots": 1000, "chi2_seeds": 3, "filter_outcome": 1}
    obj.pop("evolution")
    assert _cli(["measure", _write(tmp_path, obj), "--out", tmp_path / "m"]) == 2


def test_seed_override(tmp_path):
    obj = json.loads(json.dumps(BASE))
    obj["grid"] = {"dx": 0.2, "n": 120}
    obj["sampler"] = {"n_traj": 2000, "dt": 0.001, "steps": 10, "l1_tolerance": 1.0}
    p = _write(tmp_path, obj)
    a = run_scenario("sample", p, tmp_path / "a", seed=1)
    b = run_scenario("sample", p, tmp_path / "b", seed=1)
    c = run_scenario("sample", p, tmp_path / "c", seed=2)
    assert (tmp_path / "a" / "ensemble.csv").read_bytes() == (tmp_path / "b" / "ensemble.csv").read_bytes()
    assert (tmp_path / "a" / "ensemble.csv").read_bytes() != (tmp_path / "c" / "ensemble.csv").read_bytes()
    assert a["seed"] == 1 and c["seed"] == 2


def test_console_script_module(tmp_path):
    r = subprocess.run([sys.executable, "-m", "entropic_dynamics", "maxent",
                        str(SCENARIOS / "maxent_overconstrained.json"), "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 2
