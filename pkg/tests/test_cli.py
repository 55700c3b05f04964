"""Scenario / CLI layer tests: round-trips, validation, run outputs,
per-seed determinism and exit codes."""

import hashlib
import json
import math
from pathlib import Path

import pytest

from bohmdiff.errors import ParseError, ValidationError
from bohmdiff.scatcli import (PRESET_NAMES, Scenario, dump_scenario,
                              load_scenario, loads_scenario, main,
                              run_scenario, scenario_sha256)


def test_presets_round_trip():
    for name in PRESET_NAMES:
        sc = load_scenario(name)
        assert sc.name == name
        again = loads_scenario(dump_scenario(sc), origin=name)
        assert again == sc
        assert dump_scenario(again) == dump_scenario(sc)


def test_load_scenario_from_file(tmp_path):
    sc = load_scenario("fig2")
    p = tmp_path / "sep.scenario"
    p.write_text(dump_scenario(sc))
    assert load_scenario(str(p)) == sc


def test_unknown_task_is_a_parse_error():
    text = "[scenario]\nname = x\ntask = frobnicate\nmode = diffuse\n"
    with pytest.raises(ParseError):
        loads_scenario(text, origin="<test>")


def test_missing_beam_is_a_validation_error():
    text = ("[scenario]\nname = x\ntask = swarm\nmode = diffuse\nseed = 0\n"
            "[target]\nZ = 79\na = 0.257\nd = 420\n"
            "[params]\nt_end = 100\n")
    with pytest.raises(ValidationError):
        loads_scenario(text, origin="<test>")


def test_parse_error_cases():
    with pytest.raises(ParseError):
        loads_scenario("not an ini file [", origin="<t>")
    with pytest.raises(ParseError):
        loads_scenario("[beam]\nk0 = 1\n", origin="<t>")  # no [scenario]
    base = "[scenario]\nname = x\ntask = swarm\nmode = diffuse\n"
    with pytest.raises(ParseError):
        loads_scenario(base + "[beam]\nk0 = banana\n", origin="<t>")
    with pytest.raises(ParseError):
        loads_scenario(base + "[beam]\nwavelength = 3\n", origin="<t>")


def test_validation_error_cases():
    sc = load_scenario("fig4")
    text = dump_scenario(sc)
    bad_seed = text.replace("seed = 0", "seed = -3")
    with pytest.raises(ValidationError):
        loads_scenario(bad_seed, origin="<t>")
    bad_mode = text.replace("mode = diffuse", "mode = semiclassical")
    with pytest.raises(ValidationError):
        loads_scenario(bad_mode, origin="<t>")
    # partial grid override: all six keys or none
    partial = text + "n_z = 10\n"
    with pytest.raises(ValidationError):
        loads_scenario(partial, origin="<t>")


def test_missing_required_param_is_a_validation_error():
    sc = load_scenario("fig5")
    text = "\n".join(line for line in dump_scenario(sc).splitlines()
                     if not line.startswith("edge_lo")) + "\n"
    with pytest.raises(ValidationError):
        loads_scenario(text, origin="<t>")


def _tiny_profile_scenario(seed=0, name="tiny"):
    return loads_scenario(f"""
[scenario]
name = {name}
task = profile
mode = diffuse
seed = {seed}

[beam]
k0 = 887.7
l = 10000
D = 1000
l0 = 30000
Z1 = -1
mass = 1

[target]
Z = 79
a = 0.257
d = 420

[params]
theta = 0.9424777960769379
r = 60000
xi_min = -20000
xi_max = 20000
n_xi = 64
""", origin="<test>")


def test_run_scenario_writes_manifest_and_csv(tmp_path):
    sc = _tiny_profile_scenario()
    man = run_scenario(sc, out_dir=str(tmp_path))
    mpath = tmp_path / "manifest.json"
    assert mpath.exists()
    loaded = json.loads(mpath.read_text())
    assert loaded["scenario_name"] == "tiny"
    assert loaded["task"] == "profile"
    assert loaded["seed"] == 0
    assert loaded["scenario_sha256"] == scenario_sha256(sc)
    assert loaded["wall_clock_s"] >= 0.0
    assert loaded["files"] == [{"name": "profile.csv",
                                "role": "outgoing radial pulse profile",
                                "rows": 64}]
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[0] == "theta_rad,xi_nm,I"
    assert len(lines) == 65


def test_rerun_is_byte_identical(tmp_path):
    sc = _tiny_profile_scenario(seed=3)
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    run_scenario(sc, out_dir=str(a))
    run_scenario(sc, out_dir=str(b))
    ha = hashlib.sha256((a / "profile.csv").read_bytes()).hexdigest()
    hb = hashlib.sha256((b / "profile.csv").read_bytes()).hexdigest()
    assert ha == hb


def test_main_exit_codes(tmp_path, capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESET_NAMES:
        assert name in out

    # user error: nonexistent scenario -> 1 with a JSON error record
    assert main(["run", str(tmp_path / "missing.scenario")]) == 1
    err = capsys.readouterr().err
    rec = json.loads(err)
    assert rec["error"] in ("ParseError", "ValidationError")

    bad = tmp_path / "bad.scenario"
    bad.write_text("[scenario]\nname = x\ntask = nosuch\nmode = diffuse\n")
    assert main(["run", str(bad)]) == 1
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "ParseError"
    assert "nosuch" in rec["message"]


def test_main_runs_a_scenario(tmp_path, capsys):
    sc = _tiny_profile_scenario()
    p = tmp_path / "tiny.scenario"
    p.write_text(dump_scenario(sc))
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    code = main(["run", str(p), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "profile.csv").exists()


def test_preset_seed_override(tmp_path):
    sc = load_scenario("fig2")
    assert sc.seed == 0
    import dataclasses
    sc7 = dataclasses.replace(sc, seed=7)
    assert loads_scenario(dump_scenario(sc7), origin="<t>").seed == 7
