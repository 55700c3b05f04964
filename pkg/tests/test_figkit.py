"""Secondary-component tests: figure rendering from run outputs.

The acceptance test prints one [PASS]/[FAIL] line like the primary
criteria; unit tests cover the error surface of the renderer and CLI.
"""

import json
import sys

import pytest

from figkit import EmptyInput, FigkitError, MissingColumn, render
from figkit.cli import main as figkit_main
from bohmdiff.scatcli import load_scenario, run_scenario


_CAPMAN = None


@pytest.fixture(autouse=True)
def _capture_bypass(request):
    """Remember the capture manager so the verdict line reaches the real
    terminal even on pass (fd capture swallows sys.__stdout__)."""
    global _CAPMAN
    _CAPMAN = request.config.pluginmanager.getplugin("capturemanager")
    yield


def _report(criterion, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    line = f"[{verdict}] {criterion}: {detail}"
    if _CAPMAN is not None:
        with _CAPMAN.global_and_fixture_disabled():
            print(line, flush=True)
    else:
        print(line, file=sys.__stdout__, flush=True)
    return ok


FIG_TO_PRESET = {
    "separator": "fig2",
    "vortex": "fig3",
    "swarm+pradial": "fig4",
    "locus": "fig4",
    "bragg": "fig5",
    "tof": "fig6",
    "rutherford": "fig7",
}


@pytest.fixture(scope="module")
def preset_runs(tmp_path_factory):
    runs = {}
    for name in sorted(set(FIG_TO_PRESET.values())):
        out = tmp_path_factory.mktemp(name)
        run_scenario(load_scenario(name), out_dir=str(out))
        runs[name] = out / "manifest.json"
    return runs


def test_acceptance_figkit_renders_all_ids(preset_runs, tmp_path):
    rendered = []
    idempotent = []
    for fig_id, preset in FIG_TO_PRESET.items():
        safe = fig_id.replace("+", "_")
        p1 = tmp_path / f"{safe}_1.png"
        p2 = tmp_path / f"{safe}_2.png"
        render(preset_runs[preset], fig_id, p1)
        render(preset_runs[preset], fig_id, p2)
        rendered.append(p1.stat().st_size > 0)
        idempotent.append(p1.read_bytes() == p2.read_bytes())
    ok = all(rendered) and all(idempotent)
    _report("figure rendering", ok,
            f"{sum(rendered)}/7 ids rendered; "
            f"{sum(idempotent)}/7 byte-idempotent re-renders")
    assert ok


def test_unknown_figure_id(preset_runs, tmp_path):
    with pytest.raises(FigkitError):
        render(preset_runs["fig2"], "sankey", tmp_path / "x.png")


def test_missing_manifest_is_empty_input(tmp_path):
    with pytest.raises(EmptyInput):
        render(tmp_path / "manifest.json", "separator", tmp_path / "x.png")


def _write_run(tmp_path, files):
    (tmp_path / "manifest.json").write_text(json.dumps(
        {"scenario_name": "crafted", "files": [
            {"name": n, "role": "test", "rows": 1} for n in files]}))
    for name, text in files.items():
        (tmp_path / name).write_text(text)
    return tmp_path / "manifest.json"


def test_empty_csv_is_empty_input(tmp_path):
    man = _write_run(tmp_path, {
        "trajectories.csv": "traj_id,t_fs,z_nm,R_nm\n",
        "pradial.csv": "theta_rad,r_nm,P\n0.5,100,0.1\n",
    })
    with pytest.raises(EmptyInput):
        render(man, "swarm+pradial", tmp_path / "x.png")


def test_wrong_header_is_missing_column(tmp_path):
    man = _write_run(tmp_path, {
        "trajectories.csv": "traj_id,t_fs,z_nm\n0,0,1\n",
        "pradial.csv": "theta_rad,r_nm,P\n0.5,100,0.1\n",
    })
    with pytest.raises(MissingColumn):
        render(man, "swarm+pradial", tmp_path / "x.png")


def test_cli_exit_codes(preset_runs, tmp_path, capsys):
    out = tmp_path / "ok.png"
    assert figkit_main([str(preset_runs["fig2"]), "--fig", "separator",
                        "--out", str(out)]) == 0
    assert out.exists()

    man = _write_run(tmp_path, {
        "trajectories.csv": "traj_id,t_fs,z_nm,R_nm\n",
        "pradial.csv": "theta_rad,r_nm,P\n0.5,100,0.1\n",
    })
    code = figkit_main([str(man), "--fig", "swarm+pradial",
                        "--out", str(tmp_path / "bad.png")])
    assert code == 1
    assert "EmptyInput" in capsys.readouterr().err


def test_render_does_not_mutate_inputs(preset_runs, tmp_path):
    man = preset_runs["fig3"]
    before = {f.name: f.read_bytes() for f in man.parent.iterdir()}
    render(man, "vortex", tmp_path / "v.png")
    after = {f.name: f.read_bytes() for f in man.parent.iterdir()}
    assert before == after
