"""Configuration-driven command-line front end.

Scenario files are flat INI-style key-value sections (grammar documented
in docs/scenario-format.md).  Each run executes one task against the
library modules and emits CSV artifacts plus a JSON manifest.  Output is
deterministic per (scenario, seed): fixed 17-significant-digit decimal
formatting, fixed row order, byte-identical data files on rerun.

CLI grammar::

    bohmdiff run <scenario-file> [--out DIR]
    bohmdiff preset <name> [--out DIR] [--seed N]
    bohmdiff list-presets

Exit codes: 0 success, 1 user error (bad file, bad arguments), 2 internal
error.  Errors are emitted to stderr as one JSON record.

The environment variable BOHMDIFF_THREADS caps the numeric worker count
(applied to the BLAS/OpenMP pools at package import; see the package
__init__).  The orchestrator itself is single-threaded: tasks delegate to
internally vectorized library calls and emission is serialized.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import BohmdiffError, ParseError, ValidationError
from .flowgeom import nodal_points, separator_curve, vortex_analysis
from .observables import (angular_distribution_transported,
                          arrival_distribution_empirical, bragg_angles,
                          sphere_event_name, tof_difference_bohm,
                          tof_difference_histories, tof_difference_kijowski,
                          tof_empirical_curve)
from .rutherford import (SemiclassicalSpec, deflection_vs_b, run_rutherford)
from .trajectories import (GridSpec, Surface, initial_locus,
                           radial_distribution, run_swarm)
from .wavefield import BeamSpec, TargetSpec, WaveModel, pulse_profile_I

try:  # pragma: no cover - metadata lookup
    from importlib.metadata import version as _pkg_version
    TOOL_VERSION = _pkg_version("bohmdiff")
except Exception:  # pragma: no cover
    TOOL_VERSION = "0.1.0"

TASKS = ("separator", "vortices", "swarm", "arrival", "tof", "bragg",
         "profile", "rutherford")
MODES = ("free", "diffuse", "bragg", "semiclassical")

_F, _I, _FL = "float", "int", "floatlist"

_GRID_KEYS = {"z_min": _F, "z_max": _F, "R_min": _F, "R_max": _F,
              "n_z": _I, "n_R": _I}

# per-task parameter schema: key -> declared type; order fixes dump order
TASK_PARAMS: dict[str, dict[str, str]] = {
    "separator": {"times": _FL, "n_theta": _I, "flow": _I,
                  "flow_t_end": _F, "flow_n": _I},
    "vortices": {"t": _F, "theta_lo": _F, "theta_hi": _F,
                 "r_lo": _F, "r_hi": _F, "analyze": _I,
                 "target_z": _F, "target_R": _F},
    "swarm": {"t_end": _F, "n_samples": _I, **_GRID_KEYS,
              "angles": _FL, "dtheta": _F, "locus_angles": _FL},
    "arrival": {"l_D": _F, "theta": _F, "dtheta": _F, "t_end": _F,
                "n_samples": _I, **_GRID_KEYS},
    "tof": {"thetas": _FL, "theta_ref": _F, "s1_z": _F, "sphere_r": _F,
            "t_end": _F, "dtheta": _F, "n_samples": _I,
            "l_D": _F, "arrival_theta": _F, **_GRID_KEYS},
    "bragg": {"t_end": _F, **_GRID_KEYS,
              "edge_lo": _F, "edge_hi": _F, "edge_step": _F, "n_sub": _I},
    "profile": {"r": _F, "theta": _F, "xi_min": _F, "xi_max": _F,
                "n_xi": _I},
    "rutherford": {"b_list": _FL, "cloud_n": _I, "cloud_sigma_frac": _F,
                   "n_samples": _I},
}

TASK_REQUIRED: dict[str, set[str]] = {
    "separator": {"times"},
    "vortices": {"t", "theta_lo", "theta_hi", "r_lo", "r_hi"},
    "swarm": {"t_end"},
    "arrival": {"l_D", "theta", "t_end"},
    "tof": {"thetas", "theta_ref", "t_end"},
    "bragg": {"t_end", "edge_lo", "edge_hi", "edge_step"} | set(_GRID_KEYS),
    "profile": {"r", "theta", "xi_min", "xi_max"},
    "rutherford": {"b_list"},
}

# tasks restricted to one wavefunction mode
TASK_MODE: dict[str, tuple[str, ...]] = {
    "separator": ("diffuse", "bragg"),
    "vortices": ("diffuse",),
    "swarm": ("diffuse", "bragg"),
    "arrival": ("diffuse", "bragg"),
    "tof": ("diffuse",),
    "bragg": ("bragg",),
    "profile": ("diffuse",),
    "rutherford": ("semiclassical",),
}


@dataclass(frozen=True)
class Scenario:
    """One validated run configuration."""

    name: str
    task: str
    mode: str
    seed: int
    beam: BeamSpec
    target: TargetSpec | None
    params: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    """Record of one completed run; serialized as manifest.json.

    Data files are byte-identical across reruns of the same (scenario,
    seed); the manifest's wall_clock_s field is the only timing-dependent
    output.
    """

    scenario_name: str
    task: str
    scenario_sha256: str
    tool_version: str
    seed: int
    files: list  # of {"name", "role", "rows"}
    wall_clock_s: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


# ----------------------------------------------------------------------
# formatting and parsing helpers
# ----------------------------------------------------------------------

def _g17(x: float) -> str:
    """Decimal, 17 significant digits: enough to round-trip any double."""
    return "%.17g" % float(x)


def _fmt_value(kind: str, v) -> str:
    if kind == _I:
        return str(int(v))
    if kind == _F:
        return repr(float(v))
    if kind == _FL:
        return ", ".join(repr(float(x)) for x in v)
    raise ValueError(f"unknown param kind {kind!r}")


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == _I:
            return int(raw)
        if kind == _F:
            return float(raw)
        if kind == _FL:
            items = [s for s in (p.strip() for p in raw.split(",")) if s]
            if not items:
                raise ValueError("empty list")
            return tuple(float(s) for s in items)
    except ValueError as e:
        raise ParseError(f"{where}: cannot parse {raw!r} as {kind}: {e}") from None
    raise ValueError(f"unknown param kind {kind!r}")


_BEAM_FIELDS = {"k0": _F, "l": _F, "D": _F, "l0": _F, "Z1": _I, "mass": _F}
_TARGET_FIELDS = {"Z": _I, "a": _F, "d": _F, "deltaA": _F, "r0": _F}


def dump_scenario(sc: Scenario) -> str:
    """Canonical text form; load(dump(sc)) reproduces sc exactly."""
    lines = ["[scenario]",
             f"name = {sc.name}",
             f"task = {sc.task}",
             f"mode = {sc.mode}",
             f"seed = {sc.seed}",
             "",
             "[beam]"]
    for k, kind in _BEAM_FIELDS.items():
        lines.append(f"{k} = {_fmt_value(kind, getattr(sc.beam, k))}")
    if sc.target is not None:
        lines += ["", "[target]"]
        defaults = {"deltaA": 0.0, "r0": 0.05}
        for k, kind in _TARGET_FIELDS.items():
            v = getattr(sc.target, k)
            if k in defaults and v == defaults[k]:
                continue
            lines.append(f"{k} = {_fmt_value(kind, v)}")
    if sc.params:
        lines += ["", "[params]"]
        for k, kind in TASK_PARAMS[sc.task].items():
            if k in sc.params:
                lines.append(f"{k} = {_fmt_value(kind, sc.params[k])}")
    return "\n".join(lines) + "\n"


def scenario_sha256(sc: Scenario) -> str:
    return hashlib.sha256(dump_scenario(sc).encode()).hexdigest()


def loads_scenario(text: str, origin: str = "<string>") -> Scenario:
    """Parse and validate scenario text.

    ParseError carries line/field context; ValidationError lists every
    violated invariant at once.
    """
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as e:
        raise ParseError(str(e)) from None

    if not cp.has_section("scenario"):
        raise ParseError(f"{origin}: missing [scenario] section")
    sect = dict(cp.items("scenario"))
    for key in ("name", "task"):
        if key not in sect:
            raise ParseError(f"[scenario]: missing field {key!r}")
    task = sect.pop("task")
    if task not in TASKS:
        raise ParseError(f"[scenario] task: unknown task name {task!r}; "
                         f"expected one of {', '.join(TASKS)}")
    name = sect.pop("name")
    mode = sect.pop("mode", "diffuse")
    seed = _parse_value(_I, sect.pop("seed", "0"), "[scenario] seed")
    if sect:
        raise ParseError(f"[scenario]: unknown field(s) {sorted(sect)}")

    violations: list[str] = []

    beam = None
    if not cp.has_section("beam"):
        violations.append("missing [beam] section")
    else:
        raw = dict(cp.items("beam"))
        kw = {}
        for k, kind in _BEAM_FIELDS.items():
            if k in raw:
                kw[k] = _parse_value(kind, raw.pop(k), f"[beam] {k}")
        if raw:
            raise ParseError(f"[beam]: unknown field(s) {sorted(raw)}")
        missing = {"k0", "l", "D", "l0"} - set(kw)
        if missing:
            violations.append(f"[beam] missing required field(s) {sorted(missing)}")
        else:
            try:
                beam = BeamSpec(**kw)
            except ValueError as e:
                violations.append(f"[beam] {e}")

    target = None
    if cp.has_section("target"):
        raw = dict(cp.items("target"))
        kw = {}
        for k, kind in _TARGET_FIELDS.items():
            if k in raw:
                kw[k] = _parse_value(kind, raw.pop(k), f"[target] {k}")
        if raw:
            raise ParseError(f"[target]: unknown field(s) {sorted(raw)}")
        missing = {"Z", "a", "d"} - set(kw)
        if missing:
            violations.append(f"[target] missing required field(s) {sorted(missing)}")
        else:
            try:
                target = TargetSpec(**kw)
            except ValueError as e:
                violations.append(f"[target] {e}")

    params: dict = {}
    if cp.has_section("params"):
        raw = dict(cp.items("params"))
        schema = TASK_PARAMS[task]
        for k in list(raw):
            if k not in schema:
                raise ParseError(f"[params]: unknown field {k!r} for task {task!r}")
            params[k] = _parse_value(schema[k], raw[k], f"[params] {k}")

    if mode not in MODES:
        violations.append(f"unknown mode {mode!r}")
    elif mode not in TASK_MODE[task]:
        violations.append(f"task {task!r} requires mode in {TASK_MODE[task]}, "
                          f"got {mode!r}")
    if seed < 0:
        violations.append("seed must be >= 0")
    if mode != "free" and target is None and "missing [beam] section" not in violations:
        if not cp.has_section("target"):
            violations.append(f"mode {mode!r} requires a [target] section")
    missing_params = TASK_REQUIRED[task] - set(params)
    if missing_params:
        violations.append(
            f"task {task!r} missing required param(s) {sorted(missing_params)}")
    grid_given = set(_GRID_KEYS) & set(params)
    if grid_given and grid_given != set(_GRID_KEYS):
        violations.append("grid parameters must be given all together "
                          f"({sorted(set(_GRID_KEYS) - grid_given)} missing)")

    if violations:
        raise ValidationError("; ".join(violations))
    return Scenario(name=name, task=task, mode=mode, seed=seed,
                    beam=beam, target=target, params=params)


def load_scenario(path) -> Scenario:
    """Load a scenario from a file path or from a built-in preset name."""
    key = str(path)
    if key in PRESET_NAMES:
        return _build_presets()[key]
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"scenario file not found: {p}")
    return loads_scenario(p.read_text(), origin=str(p))


# ----------------------------------------------------------------------
# built-in presets
# ----------------------------------------------------------------------

PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


def _build_presets() -> dict[str, Scenario]:
    beam = BeamSpec(k0=887.7, l=10000.0, D=1000.0, l0=30000.0, Z1=-1, mass=1.0)
    target = TargetSpec(Z=79, a=0.257, d=420.0)
    tl = beam.l0 / beam.v0  # packet-center flight time to the target [fs]
    deg = math.radians
    angles16 = tuple(np.linspace(deg(5.0), deg(165.0), 16))

    presets = {}
    presets["fig2"] = Scenario(
        name="fig2", task="separator", mode="diffuse", seed=0,
        beam=beam, target=target,
        params={"times": (0.6 * tl, 1.2 * tl, 1.8 * tl),
                "n_theta": 256, "flow": 1,
                "flow_t_end": 2.0 * tl, "flow_n": 7})
    th_c = math.atan2(1934.42, 137.178)
    presets["fig3"] = Scenario(
        name="fig3", task="vortices", mode="diffuse", seed=0,
        beam=beam, target=target,
        params={"t": tl, "theta_lo": th_c - 6.0e-5, "theta_hi": th_c + 6.0e-5,
                "r_lo": 1900.0, "r_hi": 1980.0, "analyze": 3,
                "target_z": 137.178, "target_R": 1934.42})
    presets["fig4"] = Scenario(
        name="fig4", task="swarm", mode="diffuse", seed=0,
        beam=beam, target=target,
        params={"t_end": 2.0 * tl, "n_samples": 121,
                "angles": angles16, "dtheta": deg(2.5),
                "locus_angles": (deg(54.0), deg(134.0))})
    presets["fig5"] = Scenario(
        name="fig5", task="bragg", mode="bragg", seed=0,
        beam=beam, target=target,
        params={"t_end": 2.0 * tl,
                "z_min": -35000.0, "z_max": -25000.0,
                "R_min": 60.0, "R_max": 520.0, "n_z": 5, "n_R": 125,
                "edge_lo": 0.10, "edge_hi": 0.54, "edge_step": 0.04,
                "n_sub": 12})
    presets["fig6"] = Scenario(
        name="fig6", task="tof", mode="diffuse", seed=0,
        beam=beam, target=target,
        params={"thetas": angles16, "theta_ref": deg(150.0),
                "s1_z": -beam.l0, "sphere_r": beam.l0,
                "t_end": 4.2 * tl, "dtheta": deg(5.0), "n_samples": 61,
                "l_D": 2.0 * beam.l0, "arrival_theta": deg(54.0)})
    sbeam = BeamSpec(k0=0.9653, l=10.0, D=10.0, l0=10.0, Z1=2, mass=7100.0)
    starget = TargetSpec(Z=79, a=1.0, d=1.0)
    presets["fig7"] = Scenario(
        name="fig7", task="rutherford", mode="semiclassical", seed=0,
        beam=sbeam, target=starget,
        params={"b_list": (10.0, 12.0, 15.0), "cloud_n": 8,
                "cloud_sigma_frac": 0.2, "n_samples": 241})
    return presets


# ----------------------------------------------------------------------
# CSV emission
# ----------------------------------------------------------------------

def _write_csv(out_dir: Path, name: str, header: str, rows) -> int:
    """Write newline-delimited rows under a fixed header; returns row count."""
    n = 0
    with open(out_dir / name, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
            n += 1
    return n


def _model_for(sc: Scenario, mode: str | None = None) -> WaveModel:
    return WaveModel(beam=sc.beam, target=sc.target, mode=mode or sc.mode)


def _grid_for(sc: Scenario, model: WaveModel) -> GridSpec:
    p = sc.params
    if "z_min" in p:
        return GridSpec(z_min=p["z_min"], z_max=p["z_max"],
                        R_min=p["R_min"], R_max=p["R_max"],
                        n_z=p["n_z"], n_R=p["n_R"])
    return GridSpec.default_for(model)


def _emit_trajectories(out_dir: Path, ensemble) -> int:
    def rows():
        t = ensemble.times
        for i in range(ensemble.n):
            zi = ensemble.paths[i, :, 0]
            ri = ensemble.paths[i, :, 1]
            for k in range(t.size):
                yield (str(i), _g17(t[k]), _g17(zi[k]), _g17(ri[k]))
    return _write_csv(out_dir, "trajectories.csv",
                      "traj_id,t_fs,z_nm,R_nm", rows())


# ----------------------------------------------------------------------
# task runners: each returns [(file name, role, row count), ...]
# ----------------------------------------------------------------------

def _task_separator(sc: Scenario, out_dir: Path) -> list:
    model = _model_for(sc)
    p = sc.params
    theta_grid = np.linspace(0.01, math.pi - 0.01, p.get("n_theta", 512))
    rows = []
    for t in p["times"]:
        curve = separator_curve(t, model, theta_grid=theta_grid)
        for th, r_s in curve.samples:
            rows.append((_g17(t), _g17(th), _g17(r_s), curve.topology))
    files = [("separator.csv", "separator snapshots",
              _write_csv(out_dir, "separator.csv",
                         "t_fs,theta_rad,r_s_nm,topology", rows))]
    if p.get("flow", 0):
        b = model.beam
        n = p.get("flow_n", 7)
        grid = GridSpec(z_min=-b.l0 - b.l, z_max=-b.l0 + b.l,
                        R_min=b.D / 10.0, R_max=2.0 * b.D, n_z=n, n_R=n)
        ens = run_swarm(grid, 0.0, p.get("flow_t_end", 2.0 * b.l0 / model.v0),
                        model, n_samples=81)
        files.append(("trajectories.csv", "flow-panel paths",
                      _emit_trajectories(out_dir, ens)))
    return files


def _task_vortices(sc: Scenario, out_dir: Path) -> list:
    model = _model_for(sc)
    p = sc.params
    t = p["t"]
    pts = nodal_points(t, model,
                       window=((p["theta_lo"], p["theta_hi"]),
                               (p["r_lo"], p["r_hi"])))
    if "target_z" in p and "target_R" in p:
        pts = sorted(pts, key=lambda q: math.hypot(q.z - p["target_z"],
                                                   q.R - p["target_R"]))
    n_analyze = p.get("analyze", len(pts))
    rows = []
    for node in pts[:n_analyze]:
        vc = vortex_analysis(node, t, model)
        lam_p, lam_m = vc.eigenvalues
        rows.append((_g17(t), _g17(vc.nodal.R), _g17(vc.nodal.z),
                     _g17(vc.xpoint.R), _g17(vc.xpoint.z),
                     _g17(lam_p), _g17(lam_m), _g17(vc.R_X), vc.nodalClass))
    return [("vortices.csv", "nodal point / X-point complexes",
             _write_csv(out_dir, "vortices.csv",
                        "t_fs,nodal_R_nm,nodal_z_nm,x_R_nm,x_z_nm,"
                        "lambda_plus,lambda_minus,R_X_nm,class", rows))]


def _task_swarm(sc: Scenario, out_dir: Path) -> list:
    model = _model_for(sc)
    p = sc.params
    grid = _grid_for(sc, model)
    ens = run_swarm(grid, 0.0, p["t_end"], model,
                    n_samples=p.get("n_samples", 121))
    files = [("trajectories.csv", "swarm paths",
              _emit_trajectories(out_dir, ens))]
    angles = p.get("angles")
    if angles:
        curves = radial_distribution(ens, list(angles),
                                     dtheta=p.get("dtheta", math.radians(2.5)))
        rows = []
        for c in curves:
            for r, P in zip(c.r, c.P):
                rows.append((_g17(c.theta), _g17(r), _g17(P)))
        files.append(("pradial.csv", "transported radial distributions",
                      _write_csv(out_dir, "pradial.csv",
                                 "theta_rad,r_nm,P", rows)))
    locus_angles = p.get("locus_angles")
    if locus_angles:
        b = model.beam
        th_f = ens.final_angles()
        rows = []
        for thL in locus_angles:
            line = initial_locus(thL, model)
            for z0 in np.linspace(grid.z_min, grid.z_max, 49):
                rows.append((_g17(thL), _g17(z0),
                             _g17(line.R_of(z0, b.l0)), "line"))
            sel = (np.abs(th_f - thL) <= math.radians(5.0)) & (~ens.failed)
            for z0, R0 in zip(ens.z0[sel], ens.R0[sel]):
                rows.append((_g17(thL), _g17(z0), _g17(R0), "member"))
        files.append(("locus.csv", "initial-condition locus lines and members",
                      _write_csv(out_dir, "locus.csv",
                                 "theta_rad,z0_nm,R0_nm,tag", rows)))
    return files


def _arrival_rows(ens, theta: float, dtheta: float, l_D: float) -> list:
    emp = arrival_distribution_empirical(ens, theta, dtheta, l_D)
    centers, weights = emp.histogram
    return [(_g17(theta), _g17(t), _g17(w)) for t, w in zip(centers, weights)]


def _task_arrival(sc: Scenario, out_dir: Path) -> list:
    model = _model_for(sc)
    p = sc.params
    l_D = p["l_D"]
    surf = Surface(name=sphere_event_name(l_D), kind="sphere-r",
                   value=l_D, direction=+1)
    ens = run_swarm(_grid_for(sc, model), 0.0, p["t_end"], model,
                    n_samples=p.get("n_samples", 61), surfaces=(surf,))
    rows = _arrival_rows(ens, p["theta"], p.get("dtheta", math.radians(5.0)),
                         l_D)
    return [("arrival.csv", "empirical arrival-time histogram",
             _write_csv(out_dir, "arrival.csv", "theta_rad,t_fs,weight", rows))]


def _task_tof(sc: Scenario, out_dir: Path) -> list:
    model = _model_for(sc)
    p = sc.params
    b = model.beam
    theta_ref = p["theta_ref"]
    thetas = list(p["thetas"])
    sphere_r = p.get("sphere_r", b.l0)
    s1_z = p.get("s1_z", -b.l0)
    dtheta = p.get("dtheta", math.radians(5.0))
    surfaces = [Surface(name=sphere_event_name(sphere_r), kind="sphere-r",
                        value=sphere_r, direction=+1)]
    l_D = p.get("l_D")
    if l_D is not None:
        surfaces.append(Surface(name=sphere_event_name(l_D), kind="sphere-r",
                                value=l_D, direction=+1))
    ens = run_swarm(_grid_for(sc, model), 0.0, p["t_end"], model,
                    n_samples=p.get("n_samples", 61),
                    surfaces=tuple(surfaces))
    rows = []
    for th in thetas:
        rows.append((_g17(th), _g17(theta_ref),
                     _g17(tof_difference_bohm(th, theta_ref, model)),
                     _g17(tof_difference_histories(th, theta_ref, b,
                                                   sc.target.Z)),
                     _g17(tof_difference_kijowski(th, theta_ref))))
    files = [("tof.csv", "flight-time differences vs reference angle",
              _write_csv(out_dir, "tof.csv",
                         "theta1_rad,theta2_rad,dT_bohm_fs,dT_hist_fs,"
                         "dT_kij_fs", rows))]
    _, T = tof_empirical_curve(ens, thetas + [theta_ref], model,
                               s1_z, sphere_r, dtheta=dtheta)
    T_ref = T[-1]
    rows = [(_g17(th), _g17(T[i] - T_ref),
             _g17(tof_difference_bohm(th, theta_ref, model)))
            for i, th in enumerate(thetas)]
    files.append(("tofcurve.csv", "swarm vs analytic flight-time curve",
                  _write_csv(out_dir, "tofcurve.csv",
                             "theta_rad,dT_swarm_fs,dT_model_fs", rows)))
    if l_D is not None:
        rows = _arrival_rows(ens, p.get("arrival_theta", math.radians(54.0)),
                             dtheta, l_D)
        files.append(("arrival.csv", "empirical arrival-time histogram",
                      _write_csv(out_dir, "arrival.csv",
                                 "theta_rad,t_fs,weight", rows)))
    return files


def _task_bragg(sc: Scenario, out_dir: Path) -> list:
    p = sc.params
    n_edges = int(round((p["edge_hi"] - p["edge_lo"]) / p["edge_step"])) + 1
    edges = np.linspace(p["edge_lo"], p["edge_hi"], n_edges)
    n_sub = p.get("n_sub", 12)
    files = []
    for mode, fname, role in (
            ("bragg", "angular.csv", "coherent-mode angular histogram"),
            ("diffuse", "angular_control.csv",
             "diffuse-mode control angular histogram")):
        model = _model_for(sc, mode=mode)
        ens = run_swarm(_grid_for(sc, model), 0.0, p["t_end"], model,
                        n_samples=2)
        hist = angular_distribution_transported(ens, edges, n_sub=n_sub)
        rows = [(_g17(c), _g17(w))
                for c, w in zip(hist.centers(), hist.weights)]
        files.append((fname, role,
                      _write_csv(out_dir, fname, "theta_rad,weight", rows)))
    table = bragg_angles(sc.beam.k0, sc.target.a)
    rows = [(str(q), _g17(th)) for q, th in table.entries]
    files.append(("braggtable.csv", "coherent-addition angles",
                  _write_csv(out_dir, "braggtable.csv", "q,theta_rad", rows)))
    return files


def _task_profile(sc: Scenario, out_dir: Path) -> list:
    p = sc.params
    xi = np.linspace(p["xi_min"], p["xi_max"], p.get("n_xi", 201))
    rows = [(_g17(p["theta"]), _g17(x),
             _g17(pulse_profile_I(float(x), p["r"], p["theta"], sc.beam.D)))
            for x in xi]
    return [("profile.csv", "outgoing radial pulse profile",
             _write_csv(out_dir, "profile.csv", "theta_rad,xi_nm,I", rows))]


def _task_rutherford(sc: Scenario, out_dir: Path) -> list:
    p = sc.params
    spec = SemiclassicalSpec(D=sc.beam.D, Z1=sc.beam.Z1, Z=sc.target.Z,
                             mass=sc.beam.mass, k0=sc.beam.k0,
                             bList=tuple(p["b_list"]))
    result = run_rutherford(spec, cloud_n=p.get("cloud_n", 0),
                            cloud_sigma_frac=p.get("cloud_sigma_frac", 0.2),
                            seed=sc.seed, n_samples=p.get("n_samples", 241))
    rows = []
    for b in sorted(result.trajectories):
        for traj_id, tr in enumerate(result.trajectories[b]):
            for t, x, z in tr.samples:
                rows.append((_g17(b), str(traj_id), _g17(t),
                             _g17(x), _g17(z)))
    files = [("rutherford.csv", "planar impact-parameter trajectories",
              _write_csv(out_dir, "rutherford.csv",
                         "b_fm,traj_id,t,x_fm,z_fm", rows))]
    rep = deflection_vs_b(result)
    rows = [(_g17(b), _g17(d), _g17(c))
            for b, d, c in zip(rep.b, rep.deflection, rep.classical)]
    files.append(("deflection.csv", "deflection vs impact parameter",
                  _write_csv(out_dir, "deflection.csv",
                             "b_fm,deflection_rad,classical_rad", rows)))
    return files


_TASK_RUNNERS = {
    "separator": _task_separator,
    "vortices": _task_vortices,
    "swarm": _task_swarm,
    "arrival": _task_arrival,
    "tof": _task_tof,
    "bragg": _task_bragg,
    "profile": _task_profile,
    "rutherford": _task_rutherford,
}


def run_scenario(sc: Scenario, out_dir=".") -> RunManifest:
    """Execute the scenario's task and emit CSVs plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.monotonic()
    emitted = _TASK_RUNNERS[sc.task](sc, out)
    manifest = RunManifest(
        scenario_name=sc.name,
        task=sc.task,
        scenario_sha256=scenario_sha256(sc),
        tool_version=TOOL_VERSION,
        seed=sc.seed,
        files=[{"name": n, "role": role, "rows": rows}
               for n, role, rows in emitted],
        wall_clock_s=round(time.monotonic() - t_start, 3),
    )
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def _error_record(exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bohmdiff",
        description="Pilot-wave diffraction scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario_file")
    p_run.add_argument("--out", default=".", help="output directory")
    p_pre = sub.add_parser("preset", help="run a built-in preset")
    p_pre.add_argument("name")
    p_pre.add_argument("--out", default=".", help="output directory")
    p_pre.add_argument("--seed", type=int, default=None)
    sub.add_parser("list-presets", help="list built-in preset names")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse prints its own message; -h/--help exits 0
        return 0 if e.code in (0, None) else 1

    try:
        if args.command == "list-presets":
            for name in PRESET_NAMES:
                print(name)
            return 0
        if args.command == "run":
            sc = load_scenario(args.scenario_file)
        else:
            if args.name not in PRESET_NAMES:
                raise ParseError(
                    f"unknown preset {args.name!r}; "
                    f"expected one of {', '.join(PRESET_NAMES)}")
            sc = _build_presets()[args.name]
            if args.seed is not None:
                if args.seed < 0:
                    raise ValidationError("seed must be >= 0")
                sc = replace(sc, seed=args.seed)
        manifest = run_scenario(sc, out_dir=args.out)
        print(f"{sc.name}: wrote {len(manifest.files)} data file(s) + "
              f"manifest.json to {args.out}")
        return 0
    except (ParseError, ValidationError) as e:
        print(_error_record(e), file=sys.stderr)
        return 1
    except BohmdiffError as e:
        print(_error_record(e), file=sys.stderr)
        return 1
    except Exception as e:  # pragma: no cover - internal failure path
        print(_error_record(e), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
