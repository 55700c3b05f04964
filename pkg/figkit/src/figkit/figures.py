"""The seven figure renderers.

Every renderer reads only the run manifest and the CSV files beside it,
draws with a fixed style, and writes one image.  No numerics beyond
plotting transforms happen here.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import FigkitError  # noqa: E402
from .io import column, load_csv, load_manifest  # noqa: E402

FIGURE_IDS = ("separator", "vortex", "swarm+pradial", "locus",
              "bragg", "tof", "rutherford")

#: fixed default style: every rcParam that affects layout or color is
#: pinned so a re-render is byte-identical
STYLE = {
    "figure.figsize": (9.0, 4.5),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9.0,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "axes.prop_cycle": plt.cycler(
        color=["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]),
    "svg.hashsalt": "figkit",
}


def _group(rows, key):
    """Ordered {value -> [rows]} grouping on a column."""
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r)
    return out


def _fig_separator(run_dir, axs):
    rows = load_csv(run_dir, "separator.csv",
                    ("t_fs", "theta_rad", "r_s_nm", "topology"))
    ax = axs[0]
    for t, grp in _group(rows, "t_fs").items():
        th = column(grp, "theta_rad")
        rs = column(grp, "r_s_nm")
        topo = grp[0]["topology"]
        ax.plot(np.asarray(rs) * np.cos(th) / 1e3,
                np.asarray(rs) * np.sin(th) / 1e3,
                label=f"t = {float(t):.0f} fs ({topo})")
    ax.set_xlabel("z [um]")
    ax.set_ylabel("R [um]")
    ax.set_title("separator snapshots")
    ax.legend(fontsize=7)

    traj = load_csv(run_dir, "trajectories.csv",
                    ("traj_id", "t_fs", "z_nm", "R_nm"), required=False)
    ax = axs[1]
    if traj is None:
        ax.set_axis_off()
        return
    for _, grp in _group(traj, "traj_id").items():
        ax.plot(column(grp, "z_nm"), column(grp, "R_nm"),
                color="#1f77b4", alpha=0.4, linewidth=0.7)
    ax.set_xlabel("z [nm]")
    ax.set_ylabel("R [nm]")
    ax.set_title("flow sample")


def _fig_vortex(run_dir, axs):
    rows = load_csv(run_dir, "vortices.csv",
                    ("t_fs", "nodal_R_nm", "nodal_z_nm", "x_R_nm", "x_z_nm",
                     "lambda_plus", "lambda_minus", "R_X_nm", "class"))
    nz = column(rows, "nodal_z_nm")
    nR = column(rows, "nodal_R_nm")
    xz = column(rows, "x_z_nm")
    xR = column(rows, "x_R_nm")
    cls = column(rows, "class", as_float=False)
    ax = axs[0]
    ax.scatter(nz, nR, marker="o", s=30, label="nodal point")
    ax.scatter(xz, xR, marker="x", s=40, label="X-point")
    for z, R, c in zip(nz, nR, cls):
        ax.annotate(c, (z, R), textcoords="offset points",
                    xytext=(4, 4), fontsize=7)
    ax.set_xlabel("z [nm]")
    ax.set_ylabel("R [nm]")
    ax.set_title("nodal / X-point pairs")
    ax.legend(fontsize=7)

    ax = axs[1]
    idx = np.arange(len(rows))
    ax.bar(idx - 0.15, column(rows, "lambda_plus"), width=0.3,
           label="lambda+")
    ax.bar(idx + 0.15, column(rows, "lambda_minus"), width=0.3,
           label="lambda-")
    ax.set_xlabel("vortex index")
    ax.set_ylabel("eigenvalue [1/fs]")
    ax.set_title("X-point eigenvalues")
    ax.legend(fontsize=7)


def _fig_swarm(run_dir, axs):
    traj = load_csv(run_dir, "trajectories.csv",
                    ("traj_id", "t_fs", "z_nm", "R_nm"))
    ax = axs[0]
    for _, grp in _group(traj, "traj_id").items():
        ax.plot(column(grp, "z_nm"), column(grp, "R_nm"),
                color="#1f77b4", alpha=0.25, linewidth=0.6)
    ax.set_xlabel("z [nm]")
    ax.set_ylabel("R [nm]")
    ax.set_title("trajectory swarm")

    prad = load_csv(run_dir, "pradial.csv", ("theta_rad", "r_nm", "P"))
    ax = axs[1]
    for i, (th, grp) in enumerate(_group(prad, "theta_rad").items()):
        r = np.asarray(column(grp, "r_nm"))
        P = np.asarray(column(grp, "P"))
        # stacked offsets so the per-angle curves stay readable
        ax.plot(r / 1e3, P / max(P.max(), 1e-300) + 1.1 * i,
                linewidth=0.9,
                label=f"{np.degrees(float(th)):.0f} deg" if i % 5 == 0 else None)
    ax.set_xlabel("r [um]")
    ax.set_ylabel("P_radial (offset per angle)")
    ax.set_title("radial distributions")
    ax.legend(fontsize=7)


def _fig_locus(run_dir, axs):
    rows = load_csv(run_dir, "locus.csv",
                    ("theta_rad", "z0_nm", "R0_nm", "tag"))
    groups = _group(rows, "theta_rad")
    for ax, (th, grp) in zip(axs, groups.items()):
        lines = [r for r in grp if r["tag"] == "line"]
        members = [r for r in grp if r["tag"] == "member"]
        if lines:
            ax.plot(column(lines, "z0_nm"), column(lines, "R0_nm"),
                    color="#d62728", label="locus line")
        if members:
            ax.scatter(column(members, "z0_nm"), column(members, "R0_nm"),
                       s=8, alpha=0.6, label="swarm members")
        ax.set_xlabel("z0 [nm]")
        ax.set_ylabel("R0 [nm]")
        ax.set_title(f"launch locus, theta = "
                     f"{np.degrees(float(th)):.0f} deg")
        ax.legend(fontsize=7)
    for ax in axs[len(groups):]:
        ax.set_axis_off()


def _fig_bragg(run_dir, axs):
    rows = load_csv(run_dir, "angular.csv", ("theta_rad", "weight"))
    ax = axs[0]
    th = column(rows, "theta_rad")
    w = column(rows, "weight")
    width = (th[1] - th[0]) if len(th) > 1 else 0.02
    ax.bar(th, w, width=0.9 * width, label="coherent")
    control = load_csv(run_dir, "angular_control.csv",
                       ("theta_rad", "weight"), required=False)
    if control is not None:
        ax.step(column(control, "theta_rad"), column(control, "weight"),
                where="mid", color="#7f7f7f", label="structureless control")
    table = load_csv(run_dir, "braggtable.csv", ("q", "theta_rad"),
                     required=False)
    if table is not None:
        for i, tq in enumerate(column(table, "theta_rad")):
            if th[0] - width <= tq <= th[-1] + width:
                ax.axvline(tq, color="#d62728", linewidth=0.8,
                           linestyle="--",
                           label="coherent orders" if i == 0 else None)
    ax.set_xlabel("theta [rad]")
    ax.set_ylabel("weight")
    ax.set_title("angular distribution")
    ax.legend(fontsize=7)
    axs[1].set_axis_off()


def _fig_tof(run_dir, axs):
    rows = load_csv(run_dir, "tof.csv",
                    ("theta1_rad", "theta2_rad", "dT_bohm_fs",
                     "dT_hist_fs", "dT_kij_fs"))
    th1 = np.degrees(column(rows, "theta1_rad"))
    ax = axs[0]
    ax.plot(th1, column(rows, "dT_bohm_fs"), "o-", label="pilot-wave")
    ax.plot(th1, column(rows, "dT_kij_fs"), "s--", label="arrival operator")
    ax.set_xlabel("theta1 [deg]")
    ax.set_ylabel("dT [fs]")
    ax.set_title("flight-time differences")
    ax.legend(fontsize=7)
    axt = ax.twinx()
    axt.plot(th1, column(rows, "dT_hist_fs"), "^:", color="#2ca02c",
             label="path sum")
    axt.set_ylabel("path-sum dT [fs]", color="#2ca02c")
    axt.grid(False)

    curve = load_csv(run_dir, "tofcurve.csv",
                     ("theta_rad", "dT_swarm_fs", "dT_model_fs"),
                     required=False)
    ax = axs[1]
    if curve is None:
        ax.set_axis_off()
        return
    thc = np.degrees(column(curve, "theta_rad"))
    ax.plot(thc, column(curve, "dT_model_fs"), label="model curve")
    ax.plot(thc, column(curve, "dT_swarm_fs"), "o", markersize=4,
            label="swarm")
    ax.set_xlabel("theta [deg]")
    ax.set_ylabel("T(theta) - T(ref) [fs]")
    ax.set_title("swarm vs model")
    ax.legend(fontsize=7)


def _fig_rutherford(run_dir, axs):
    rows = load_csv(run_dir, "rutherford.csv",
                    ("b_fm", "traj_id", "t", "x_fm", "z_fm"))
    ax = axs[0]
    for b, grp in _group(rows, "b_fm").items():
        for tid, sub in _group(grp, "traj_id").items():
            center = tid == "0"
            ax.plot(column(sub, "z_fm"), column(sub, "x_fm"),
                    linewidth=1.4 if center else 0.5,
                    alpha=1.0 if center else 0.35,
                    color=None if center else "#7f7f7f",
                    label=f"b = {float(b):g} fm" if center else None)
    ax.set_xlabel("z [fm]")
    ax.set_ylabel("x [fm]")
    ax.set_title("impact-parameter sweep")
    ax.legend(fontsize=7)

    defl = load_csv(run_dir, "deflection.csv",
                    ("b_fm", "deflection_rad", "classical_rad"),
                    required=False)
    ax = axs[1]
    if defl is None:
        ax.set_axis_off()
        return
    b = column(defl, "b_fm")
    ax.plot(b, column(defl, "deflection_rad"), "o-", label="pilot-wave")
    ax.plot(b, column(defl, "classical_rad"), "s--", label="point charge")
    ax.set_xlabel("b [fm]")
    ax.set_ylabel("deflection [rad]")
    ax.set_title("deflection vs impact parameter")
    ax.legend(fontsize=7)


_RENDERERS = {
    "separator": _fig_separator,
    "vortex": _fig_vortex,
    "swarm+pradial": _fig_swarm,
    "locus": _fig_locus,
    "bragg": _fig_bragg,
    "tof": _fig_tof,
    "rutherford": _fig_rutherford,
}


def render(manifest_path: str | Path, fig_id: str, out_path: str | Path,
           style: str | Path | None = None) -> Path:
    """Render one figure id from a run manifest to out_path.

    style may name a matplotlib style file; otherwise the pinned default
    style is used.  Returns the written path.
    """
    if fig_id not in _RENDERERS:
        raise FigkitError(f"unknown figure id {fig_id!r}; "
                          f"choose from {', '.join(FIGURE_IDS)}")
    manifest, run_dir = load_manifest(manifest_path)
    out = Path(out_path)
    with plt.style.context(str(style) if style is not None else STYLE):
        fig, axs = plt.subplots(1, 2)
        try:
            _RENDERERS[fig_id](run_dir, axs)
            name = manifest.get("scenario_name", "")
            fig.suptitle(f"{fig_id} ({name})" if name else fig_id)
            fig.tight_layout()
            fig.savefig(out, metadata={"Software": "figkit"})
        finally:
            plt.close(fig)
    return out
