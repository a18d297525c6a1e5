import filecmp
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from floquet_ssh import __version__
from floquet_ssh.cli import main
from floquet_ssh.dynamics import Trajectory
from floquet_ssh.io import csv_long, diverging_color, dumps, heatmap_svg
from floquet_ssh.scenario import (
    ScenarioError,
    build_coupling,
    config_hash,
    load_scenario,
    point_config,
    run_point,
    validate_dict,
)

SMALL = {
    "name": "small",
    "coupling": {"source": "exponential", "j_khz": 0.25, "xi": 1.0, "sites": 6},
    "drive": {"eta_bar": 0.0, "phi_over_pi": 0.75, "b0_over_j": 18, "omega_over_j": 6},
    "model": "xy_effective",
    "initial_state": {"kind": "single_excitation", "site": 1},
    "tau_max": 2.0,
    "n_tau": 81,
    "scan": {"axis": "eta_bar", "values": [0.0, 1.0]},
    "analysis": ["spreading_rate", "late_time", "shots"],
    "shots": 200,
    "heatmap": True,
    "seed": 11,
    "tol": 1e-9,
}


def write(tmp_path, d, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def tree_files(root):
    out = []
    for dirpath, _, files in os.walk(root):
        for f in files:
            out.append(os.path.relpath(os.path.join(dirpath, f), root))
    return sorted(out)


# ---- validation -----------------------------------------------------------

def test_small_scenario_is_valid():
    rep = validate_dict(SMALL)
    assert rep.ok and rep.warnings == []


def test_rwa_warnings():
    d = {**SMALL, "drive": {"b0_over_j": 2, "omega_over_j": 1}}
    rep = validate_dict(d)
    assert rep.ok
    assert any("b0_over_j" in w for w in rep.warnings)
    assert any("omega_over_j" in w for w in rep.warnings)


def test_full_drive_on_long_chain_is_error():
    d = {**SMALL, "model": "full_drive", "coupling": {"source": "published", "config": "config3"}}
    d.pop("scan")
    rep = validate_dict(d)
    assert not rep.ok
    assert any("full_drive" in e and "L = 22" in e for e in rep.errors)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"bogus": 1}, "bogus"),
        ({"scan": {"axis": "eta_bar", "values": []}}, "scan.values"),
        ({"scan": {"axis": "colour", "values": [1]}}, "scan.axis"),
        ({"initial_state": {"kind": "single_excitation", "site": 9}}, "initial_state.site"),
        ({"tol": 0.1}, "tol"),
        ({"n_tau": 1}, "n_tau"),
        ({"seed": -1}, "seed"),
        ({"analysis": ["shots"], "shots": 0}, "shots"),
        ({"coupling": {"source": "published", "config": "config9"}}, "coupling.config"),
    ],
)
def test_validation_errors_name_the_field(patch, field):
    rep = validate_dict({**SMALL, **patch})
    assert not rep.ok
    assert any(e.startswith(field) for e in rep.errors)
    with pytest.raises(ScenarioError):
        load_scenario({**SMALL, **patch})


def test_sector_cap_error():
    d = {**SMALL, "coupling": {"source": "exponential", "j_khz": 0.25, "xi": 1.0, "sites": 30},
         "initial_state": {"kind": "neel"}}
    d.pop("scan")
    assert any("sector dimension" in e for e in validate_dict(d).errors)


def test_config_hash_is_key_order_independent():
    shuffled = dict(reversed(list(SMALL.items())))
    assert config_hash(shuffled) == config_hash(SMALL)
    assert config_hash({**SMALL, "seed": 12}) != config_hash(SMALL)


# ---- pipeline -------------------------------------------------------------

def test_build_coupling_units():
    cm = build_coupling(SMALL["coupling"])
    assert cm.values[0, 1] == pytest.approx(2 * math.pi * 250 * math.exp(-1))
    m = build_coupling({"source": "matrix", "values_khz": [[0, 1], [1, 0]]})
    assert m.values[0, 1] == pytest.approx(2 * math.pi * 1e3)


def test_point_config_fixes_axis():
    d = point_config(SMALL, "eta_bar", 1.0)
    assert "scan" not in d and d["drive"]["eta_bar"] == 1.0
    assert point_config(SMALL, "site", 3)["initial_state"] == {"kind": "single_excitation", "site": 3}
    assert SMALL["drive"]["eta_bar"] == 0.0


def test_run_point_models_agree_for_single_excitation():
    base = point_config(SMALL, "eta_bar", 0.6)
    xy, _ = run_point(base)
    ff, _ = run_point({**base, "model": "free_fermion"})
    np.testing.assert_allclose(ff.magnetizations, xy.magnetizations, atol=1e-10)


def test_run_point_analyses():
    traj, out = run_point(point_config(SMALL, "eta_bar", 0.0))
    assert out["spreading_rate"]["status"] == "ok"
    assert out["late_time"]["site"] == 1
    assert len(out["shots"]["counts"]) == traj.magnetizations.shape[0]


# ---- io -------------------------------------------------------------------

def test_dumps_handles_numpy():
    text = dumps({"b": np.float64(1.5), "a": np.arange(2), "c": np.bool_(True), "d": float("nan")})
    assert json.loads(text) == {"a": [0, 1], "b": 1.5, "c": True, "d": None}
    assert text.endswith("\n")


def test_diverging_color_anchors():
    assert diverging_color(-1) == "#2166ac"
    assert diverging_color(0) == "#f7f7f7"
    assert diverging_color(1) == "#b2182b"
    assert diverging_color(5) == diverging_color(1)


def test_exports_are_pure():
    tr = Trajectory(np.linspace(0, 1, 3), np.zeros((3, 2)))
    assert heatmap_svg(tr, "x") == heatmap_svg(tr, "x")
    assert csv_long(tr).count("\n") == 3 * 2 + 1


# ---- command line ---------------------------------------------------------

def test_version_and_module_entry():
    out = subprocess.run([sys.executable, "-m", "floquet_ssh", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__


def test_validate_verb(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, SMALL)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ok"]
    bad = write(tmp_path, {**SMALL, "tol": 5.0}, "bad.json")
    assert main(["validate", "--config", bad]) == 2


def test_input_errors_exit_2(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"name": "x",\n  "coupling": }')
    assert main(["run", "--config", str(broken)]) == 2
    assert "broken.json:2:" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["run"]) == 2
    assert main(["nonsense", "--config", "x"]) == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    from floquet_ssh import cli
    from floquet_ssh.errors import SimulationError

    real = cli.run_point

    def flaky(d):
        if d["drive"]["eta_bar"] == 1.0:
            raise SimulationError("norm drift 1e-3 exceeds 100*tol")
        return real(d)

    monkeypatch.setattr(cli, "run_point", flaky)
    d = {**SMALL, "analysis": []}
    code = main(["run", "--config", write(tmp_path, d), "--out", str(tmp_path / "r"), "--workers", "1"])
    assert code == 3
    failed = json.loads((tmp_path / "r" / "points" / "001_eta_bar=1.0" / "failed.json").read_text())
    assert failed["error"] == "SimulationError"
    assert (tmp_path / "r" / "points" / "000_eta_bar=0.0" / "trajectory.csv").exists()
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert [p["status"] for p in manifest["points"]] == ["ok", "failed"]


def test_run_manifest_rerun_and_export(tmp_path):
    cfg = write(tmp_path, SMALL)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", "--config", cfg, "--out", str(first), "--workers", "2"]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["config_sha256"] == config_hash(SMALL)
    assert [p["status"] for p in manifest["points"]] == ["ok", "ok"]
    assert (first / "spreading.csv").exists() and (first / "late_time.csv").exists()
    assert (first / "points" / "000_eta_bar=0.0" / "heatmap.svg").exists()

    assert main(["run", "--config", str(first / "manifest.json"), "--out", str(second),
                 "--workers", "1"]) == 0
    files = tree_files(first)
    assert files == tree_files(second)
    assert "timings.json" in files
    for f in files:
        if f != "timings.json":
            assert filecmp.cmp(first / f, second / f, shallow=False), f

    for kind in ("csv_wide", "csv_long", "heatmap_svg"):
        out1, out2 = tmp_path / f"e1_{kind}", tmp_path / f"e2_{kind}"
        assert main(["export", "--config", str(first), "--kind", kind, "--out", str(out1)]) == 0
        assert main(["export", "--config", str(first), "--kind", kind, "--out", str(out2)]) == 0
        for f in tree_files(out1):
            assert filecmp.cmp(out1 / f, out2 / f, shallow=False)
    long_rows = (tmp_path / "e1_csv_long" / "000_eta_bar=0.0.long.csv").read_text().count("\n")
    assert long_rows == 81 * 6 + 1
    assert main(["export", "--config", str(first), "--kind", "png"]) == 2


def test_seed_override_changes_shots(tmp_path):
    d = dict(SMALL)
    d.pop("scan")
    cfg = write(tmp_path, d)
    main(["evolve", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["evolve", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = json.loads((tmp_path / "a" / "analysis.json").read_text())["shots"]["counts"]
    b = json.loads((tmp_path / "b" / "analysis.json").read_text())["shots"]["counts"]
    assert a != b


def test_other_verbs(tmp_path):
    d = {**SMALL, "drive": {"eta_bar": 1.0}, "zak_sweep": {"phi_over_pi": [0.75], "eta_bar": [1.0], "n_k": 200},
         "tomography": {"bonds": [[1, 2]], "tau_max": 2.0}}
    d.pop("scan")
    cfg = write(tmp_path, d)
    for verb in ("coupling", "dress", "spectrum", "tomography"):
        assert main([verb, "--config", cfg, "--out", str(tmp_path / verb)]) == 0
    assert (tmp_path / "dress" / "zak_sweep.csv").exists()
    tomo = json.loads((tmp_path / "tomography" / "tomography.json").read_text())
    assert len(tomo["bonds"]) == 1
    trap = write(tmp_path, {"trap": {"n_ions": 5, "com_radial_mhz": 3.0, "axial_c2": 0.11,
                                     "axial_c4": 1600.0}}, "trap.json")
    assert main(["modes", "--config", trap, "--out", str(tmp_path / "modes.json")]) == 0
    modes = json.loads((tmp_path / "modes.json").read_text())
    assert len(modes["freqs_rad_s"]) == 5
