"""Trajectory integration: single paths, weighted swarms, initial-condition
loci per scattering angle, and the Jacobian continuity check.

Trajectories follow dz/dt = v_z, dR/dt = v_R with the pilot-wave velocity.
Swarms integrate all members as one vectorized ODE system (the field
evaluation is array-friendly), recording registered surface crossings
(S1 plane, detector spheres) from per-step dense interpolants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from .errors import (
    DegenerateCell,
    InvalidGrid,
    NodalSingularity,
    NoRoot,
    RegimeViolation,
    StepUnderflow,
)
from .flowgeom import ABS_NODE_FLOOR, vortex_size_estimate
from .wavefield import (
    CylPoint,
    WaveModel,
    eval_f_geom,
    psi_in_dlog_zR,
    psi_in_zR,
    psi_out_band_zR,
    psi_out_zR,
    psi_total_zR,
)

RTOL = 1.0e-8
ATOL = 1.0e-6  # nm
EVENT_TTOL = 1.0e-3  # fs
EVENT_SUBSTEPS = 8  # interpolant subdivisions per step for crossing search


@dataclass(frozen=True)
class Surface:
    """A registered crossing surface: plane z = value or sphere r = value.

    direction filters which sign changes of the signed distance count:
    +1 records inside -> outside crossings only (a detector sphere ignores
    a member that starts beyond it and first enters inward), -1 the
    reverse, 0 any.  The first matching crossing is kept.
    """

    name: str
    kind: str  # 'plane-z' or 'sphere-r'
    value: float
    direction: int = 0

    def signed(self, z, R):
        if self.kind == "plane-z":
            return np.asarray(z) - self.value
        if self.kind == "sphere-r":
            return np.hypot(z, R) - self.value
        raise ValueError(f"unknown surface kind {self.kind!r}")


@dataclass
class Trajectory:
    """One time-stamped pilot-wave path."""

    samples: np.ndarray  # (n, 3): t [fs], z [nm], R [nm]
    events: dict = field(default_factory=dict)  # name -> (t, z, R)
    complete: bool = True
    message: str = ""

    @property
    def final(self) -> tuple[float, float]:
        return float(self.samples[-1, 1]), float(self.samples[-1, 2])


@dataclass(frozen=True)
class GridSpec:
    """Regular initial-condition grid in the (z0, R0) plane."""

    z_min: float
    z_max: float
    R_min: float
    R_max: float
    n_z: int = 25
    n_R: int = 25

    def __post_init__(self):
        if self.n_z < 1 or self.n_R < 1:
            raise InvalidGrid("grid counts must be >= 1")
        if not (self.z_max > self.z_min and self.R_max > self.R_min):
            raise InvalidGrid("grid ranges must be non-degenerate")
        if self.R_min <= 0:
            raise InvalidGrid("R_min must be positive")

    @classmethod
    def default_for(cls, model: WaveModel) -> "GridSpec":
        b = model.beam
        return cls(z_min=-b.l0 - 2 * b.l, z_max=-b.l0 + 2 * b.l,
                   R_min=b.D / 100.0, R_max=4.0 * b.D)

    def points(self):
        z = np.linspace(self.z_min, self.z_max, self.n_z)
        R = np.linspace(self.R_min, self.R_max, self.n_R)
        return z, R


@dataclass
class Ensemble:
    """A weighted swarm of trajectories from a regular grid.

    weights are |psi_in(z0, R0, 0)|^2 2 pi R0 dR0 dz0, renormalized to
    sum to 1; coverage reports the raw probability sum of the grid.
    """

    grid: GridSpec
    z0: np.ndarray  # (n,)
    R0: np.ndarray
    weights: np.ndarray
    coverage: float
    times: np.ndarray  # (m,)
    paths: np.ndarray  # (n, m, 2): z, R
    events: dict  # name -> dict(t=(n,), z=(n,), R=(n,)), nan where missed
    failed: np.ndarray  # bool (n,)

    @property
    def n(self) -> int:
        return self.z0.size

    def final_angles(self) -> np.ndarray:
        z = self.paths[:, -1, 0]
        R = self.paths[:, -1, 1]
        return np.arctan2(R, z)

    def final_radii(self) -> np.ndarray:
        z = self.paths[:, -1, 0]
        R = self.paths[:, -1, 1]
        return np.hypot(z, R)


# ----------------------------------------------------------------------
# core batched integrator
# ----------------------------------------------------------------------

def _rhs_factory(model: WaveModel, n: int, failed: np.ndarray):
    hom = model.hbar_over_m

    def rhs(t, y):
        z = y[:n]
        R = y[n:]
        v, gz, gR = psi_total_zR(z, np.abs(R), t, model)
        av = np.abs(v)
        bad = av < ABS_NODE_FLOOR
        if np.any(bad):
            failed[bad] = True
            v = np.where(bad, 1.0, v)
            gz = np.where(bad, 0.0, gz)
            gR = np.where(bad, 0.0, gR)
        vz = hom * np.imag(gz / v)
        vR = hom * np.imag(gR / v) * np.sign(R)
        return np.concatenate([vz, vR])

    return rhs


# Width (in log-amplitude units) of the blend between the two averaged
# flow branches around the separator.  The exact phase average switches
# discontinuously at |psi_in| = |psi_out|; a thin C^1 blend keeps the
# step controller happy while staying far below the grid-cell scale.
BAND_BLEND_WIDTH = 0.02

def _band_rhs_factory(model: WaveModel, n: int, failed: np.ndarray):
    """Fast-phase-averaged velocity field for swarm integration.

    Near the separator the exact velocity oscillates at the beat phase
    k0 (r - z) (sub-fs period at these energies), which forces millions
    of RK steps per trajectory.  Averaging the velocity over that phase
    by contour integration gives exactly the ingoing flow where
    |psi_in| > |psi_out| and exactly the outgoing flow where
    |psi_out| > |psi_in|; we blend the two branches smoothly over a thin
    log-amplitude band so the RHS stays C^1 for the error controller.
    Transport at the swarm's resolution is unchanged; only the nm-scale
    vortex wiggles are averaged out.
    """
    hom = model.hbar_over_m
    tiny = 1.0e-300

    def rhs(t, y):
        z = y[:n]
        R = y[n:]
        Ra = np.abs(R)
        vi, _, _ = psi_in_zR(z, Ra, t, model)
        in_dz, in_dR = psi_in_dlog_zR(z, Ra, t, model)
        in_z = np.broadcast_to(np.imag(in_dz), z.shape)
        in_R = np.broadcast_to(np.imag(in_dR), z.shape)
        ao, out_z, out_R = psi_out_band_zR(z, Ra, t, model)
        ai = np.abs(vi)
        bad = np.maximum(ai, ao) < ABS_NODE_FLOOR
        if np.any(bad):
            failed[bad] = True
        gap = np.log(np.maximum(ai, tiny)) - np.log(np.maximum(ao, tiny))
        # w -> 1 ingoing side, w -> 0 outgoing side
        w = 1.0 / (1.0 + np.exp(-np.clip(gap / BAND_BLEND_WIDTH, -60, 60)))
        vz = hom * (w * in_z + (1.0 - w) * out_z)
        vR = hom * (w * in_R + (1.0 - w) * out_R) * np.sign(R)
        return np.concatenate([vz, vR])

    return rhs


def _integrate_batch(z0, R0, t0, t1, model: WaveModel,
                     t_eval=None, surfaces=(), known_nodes=None,
                     band_average=False):
    """Integrate n trajectories as one RK45 system.

    Returns (times, paths, events, failed).  When known_nodes is given,
    the step size is clamped to 0.1 x the flight time to the nearest
    node whenever a trajectory is inside the vortex window (1000 x the
    node-free clamp radius); vortices are tiny, so this rarely triggers.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    R0 = np.atleast_1d(np.asarray(R0, dtype=float))
    n = z0.size
    failed = np.zeros(n, dtype=bool)
    if band_average and model.mode != "free":
        rhs = _band_rhs_factory(model, n, failed)
    else:
        rhs = _rhs_factory(model, n, failed)
    y0 = np.concatenate([z0, R0])
    forward = t1 >= t0
    solver = RK45(rhs, t0, y0, t_bound=t1, rtol=RTOL, atol=ATOL)

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        rec_t = list(t_eval)
        out = np.empty((n, t_eval.size, 2))
        if t_eval.size and np.isclose(t_eval[0], t0):
            out[:, 0, 0] = z0
            out[:, 0, 1] = R0
            next_i = 1
        else:
            next_i = 0
    else:
        rec_t = [t0]
        out = [np.stack([z0, R0], axis=1)]
        next_i = None

    ev_state = {s.name: {
        "t": np.full(n, np.nan), "z": np.full(n, np.nan),
        "R": np.full(n, np.nan),
        "g": s.signed(z0, R0)} for s in surfaces}
    nodes = None
    if known_nodes:
        nodes = np.array([[p.z, p.R] for p in known_nodes])
        window = 1000.0 * vortex_size_estimate(model)

    while solver.status == "running":
        if nodes is not None:
            z = solver.y[:n]
            R = solver.y[n:]
            d2 = ((z[:, None] - nodes[None, :, 0]) ** 2
                  + (R[:, None] - nodes[None, :, 1]) ** 2)
            dmin = math.sqrt(float(d2.min()))
            v = rhs(solver.t, solver.y)
            speed = float(np.max(np.hypot(v[:n], v[n:]))) or 1.0
            # inside the vortex window: cap the step at 0.1 x the flight
            # time to the nearest known node
            if dmin < window:
                solver.max_step = max(0.1 * dmin / speed, 1.0e-12)
            else:
                solver.max_step = np.inf
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(msg or "RK45 step failed")
        t_old, t_new = solver.t_old, solver.t
        dense = None
        # record requested sample times inside this step
        if next_i is not None:
            while next_i < t_eval.size and (
                    (forward and t_eval[next_i] <= t_new + 1e-12)
                    or (not forward and t_eval[next_i] >= t_new - 1e-12)):
                if dense is None:
                    dense = solver.dense_output()
                ys = dense(t_eval[next_i])
                out[:, next_i, 0] = ys[:n]
                out[:, next_i, 1] = ys[n:]
                next_i += 1
        else:
            rec_t.append(t_new)
            out.append(np.stack([solver.y[:n], solver.y[n:]], axis=1))
        # surface crossings, refined on the step interpolant; the step is
        # subdivided so one large step that enters and leaves a surface
        # (its endpoint sign change cancelling out) is still caught
        if surfaces:
            if dense is None:
                dense = solver.dense_output()
            sub_t = np.linspace(t_old, t_new, EVENT_SUBSTEPS + 1)
            sub_y = [dense(tt) for tt in sub_t[1:-1]]
        for s in surfaces:
            st = ev_state[s.name]
            g_new = s.signed(solver.y[:n], np.abs(solver.y[n:]))
            sub_g = ([st["g"]]
                     + [s.signed(y[:n], np.abs(y[n:])) for y in sub_y]
                     + [g_new])
            for k in range(EVENT_SUBSTEPS):
                ta, tb = sub_t[k], sub_t[k + 1]
                ga, gb = sub_g[k], sub_g[k + 1]
                hit = (ga * gb < 0) & np.isnan(st["t"])
                if s.direction > 0:
                    hit &= gb > 0
                elif s.direction < 0:
                    hit &= gb < 0
                if np.any(hit):
                    for i in np.nonzero(hit)[0]:
                        def gi(tt):
                            ys = dense(tt)
                            return float(s.signed(ys[i], abs(ys[n + i])))
                        lo, hi = (ta, tb) if forward else (tb, ta)
                        tc = brentq(gi, lo, hi, xtol=EVENT_TTOL)
                        yc = dense(tc)
                        st["t"][i] = tc
                        st["z"][i] = yc[i]
                        st["R"][i] = abs(yc[n + i])
            st["g"] = g_new

    if next_i is not None:
        # fill any trailing samples at the final state
        while next_i < t_eval.size:
            out[:, next_i, 0] = solver.y[:n]
            out[:, next_i, 1] = solver.y[n:]
            next_i += 1
        times = t_eval
        paths = out
    else:
        times = np.asarray(rec_t)
        paths = np.stack(out, axis=1)
    paths[:, :, 1] = np.abs(paths[:, :, 1])
    events = {name: {k: v for k, v in st.items() if k != "g"}
              for name, st in ev_state.items()}
    return times, paths, events, failed


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------

def integrate_trajectory(init: CylPoint, t0: float, t1: float,
                         model: WaveModel, t_eval=None, surfaces=(),
                         known_nodes=None, band_average=False) -> Trajectory:
    """Integrate one trajectory from init over [t0, t1].

    Adaptive RK45 (rtol 1e-8, atol 1e-6 nm); surface crossings located on
    the step interpolants to 1e-3 fs.  Raises NodalSingularity if the
    starting point sits on a node.  band_average=True swaps in the
    fast-phase-averaged field (see _band_rhs_factory).
    """
    v, _, _ = psi_total_zR(init.z, init.R, t0, model)
    if abs(complex(v)) < ABS_NODE_FLOOR:
        raise NodalSingularity(f"initial point on a node: {init}")
    times, paths, events, failed = _integrate_batch(
        [init.z], [init.R], t0, t1, model,
        t_eval=t_eval, surfaces=surfaces, known_nodes=known_nodes,
        band_average=band_average)
    ev = {}
    for name, st in events.items():
        if not math.isnan(st["t"][0]):
            ev[name] = (float(st["t"][0]), float(st["z"][0]), float(st["R"][0]))
    samples = np.column_stack([times, paths[0, :, 0], paths[0, :, 1]])
    return Trajectory(samples=samples, events=ev,
                      complete=not bool(failed[0]),
                      message="nodal underflow" if failed[0] else "")


def run_swarm(grid: GridSpec | None, t0: float, t1: float, model: WaveModel,
              n_samples: int = 121, surfaces=(), known_nodes=None,
              band_average=True) -> Ensemble:
    """Integrate the full grid swarm as one vectorized ODE system.

    Weights carry the initial quantum measure |psi_in|^2 2 pi R0 dR0 dz0,
    renormalized to unit sum; the raw sum is reported as coverage.
    Per-trajectory nodal failures are recorded in Ensemble.failed.

    By default the swarm rides the fast-phase-averaged field (the exact
    mean of the pilot velocity over the sub-fs in/out interference beat);
    set band_average=False to resolve every beat at vastly higher cost.
    """
    if grid is None:
        grid = GridSpec.default_for(model)
    zs, Rs = grid.points()
    Z0, R0 = np.meshgrid(zs, Rs, indexing="ij")
    z0 = Z0.ravel()
    r0 = R0.ravel()
    vin, _, _ = psi_in_zR(z0, r0, 0.0, model)
    dz = (grid.z_max - grid.z_min) / max(grid.n_z - 1, 1)
    dR = (grid.R_max - grid.R_min) / max(grid.n_R - 1, 1)
    w = np.abs(vin) ** 2 * 2.0 * math.pi * r0 * dR * dz
    coverage = float(np.sum(w))
    if coverage <= 0:
        raise InvalidGrid("grid carries no probability")
    t_eval = np.linspace(t0, t1, n_samples)
    times, paths, events, failed = _integrate_batch(
        z0, r0, t0, t1, model, t_eval=t_eval,
        surfaces=surfaces, known_nodes=known_nodes,
        band_average=band_average)
    return Ensemble(grid=grid, z0=z0, R0=r0, weights=w / coverage,
                    coverage=coverage, times=times, paths=paths,
                    events=events, failed=failed)


# ----------------------------------------------------------------------
# initial-condition locus per scattering angle
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LocusLine:
    """Straight-line locus of initial conditions scattered near theta:
    R0 = R_c + slope * (z0 + l0)."""

    theta: float
    R_c: float
    slope: float
    g: float

    def R_of(self, z0, l0: float):
        return self.R_c + self.slope * (np.asarray(z0) + l0)


def locus_residual(R0: float, theta: float, z0: float, model: WaveModel,
                   far_field: bool = False) -> float:
    """Residual of the piecewise-straight encounter condition at (z0, R0).

    Zero when a horizontal trajectory from (z0, R0) meets the separator
    exactly on the ray at angle theta.  By default the outgoing profile
    f is evaluated at the encounter point (r = R0/sin(theta)), matching
    the field the trajectories actually move in; far_field=True uses the
    closed-form large-r limit f -> g/(2 k0^2 R0) instead.
    """
    b = model.beam
    g = 2.0 * math.sin(theta) / (1.0 - math.cos(theta))
    amp = model.diffuse_amplitude
    lhs = (-(b.l ** 2 * g / (4.0 * b.D ** 2)) * R0 + R0 / g + z0 + b.l0)
    if far_field:
        f = g / (2.0 * b.k0 ** 2 * R0)
    else:
        f = eval_f_geom(R0 / math.sin(theta), theta, model)
    rhs = (b.l ** 2 * g / (2.0 * R0)) * math.log(amp * f)
    return lhs - rhs


def initial_locus(theta: float, model: WaveModel,
                  far_field: bool = False) -> LocusLine:
    """Locus line for scattering angle theta: root of the encounter
    condition at z0 = -l0, slope 4 D^2 / (l^2 g(theta))."""
    if not (0.0 < theta < math.pi):
        raise ValueError("theta must lie in (0, pi)")
    b = model.beam
    g = 2.0 * math.sin(theta) / (1.0 - math.cos(theta))
    regime = b.l ** 2 * g ** 2 / (4.0 * b.D ** 2)
    if regime < 10.0:
        raise RegimeViolation(
            f"l^2 g^2/(4 D^2) = {regime:.2f} < 10 at theta={theta:.3f}")
    f = lambda R0: locus_residual(R0, theta, -b.l0, model, far_field=far_field)
    # bracket the root by scanning R0; keep the outermost (descending)
    # crossing — the inner one is an artifact of the log factor changing
    # sign and does not balance the envelopes
    grid = np.linspace(b.D * 1.0e-3, 8.0 * b.D, 4000)
    vals = np.array([f(R) for R in grid])
    sgn = np.sign(vals)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if idx.size == 0:
        raise NoRoot(f"no locus root for theta={theta:.3f}")
    i = int(idx[-1])
    R_c = brentq(f, grid[i], grid[i + 1], xtol=1.0e-6)
    return LocusLine(theta=theta, R_c=R_c,
                     slope=4.0 * b.D ** 2 / (b.l ** 2 * g), g=g)


# ----------------------------------------------------------------------
# continuity check: Jacobian-transported radial distribution
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialCurve:
    theta: float
    r: np.ndarray
    P: np.ndarray  # normalized to unit integral over r


def radial_distribution(ensemble: Ensemble, theta_list,
                        dtheta: float = math.radians(2.5),
                        min_j: float = 1.0e-12, n_sub: int = 12,
                        n_bins: int = 48) -> list[RadialCurve]:
    """Per-angle radial probability transported by the trajectory map.

    Each grid cell gets a bilinear-with-cross-term fit of the final
    (r, theta) over its four corners, whose Jacobian determinant J
    transports the initial measure P = N(theta) |psi_in|^2 R0 / |J|.
    Because one cell typically spans several degrees of final angle, the
    transported density is accumulated by integrating the fitted map on
    an n_sub x n_sub subgrid per cell (each subsample carries its share
    of the cell's initial measure; summing shares that land in an
    (r, theta) bin is the change-of-variables integral of |J|^-1 over
    the bin) rather than by a single center-point evaluation of J.
    """
    grid = ensemble.grid
    nz, nR = grid.n_z, grid.n_R
    zf = ensemble.paths[:, -1, 0].reshape(nz, nR)
    Rf = ensemble.paths[:, -1, 1].reshape(nz, nR)
    rf = np.hypot(zf, Rf)
    thf = np.arctan2(Rf, zf)
    z0g = ensemble.z0.reshape(nz, nR)
    R0g = ensemble.R0.reshape(nz, nR)
    dz = z0g[1, 0] - z0g[0, 0]
    dR = R0g[0, 1] - R0g[0, 0]

    # cell-cornered bilinear coefficients F(u, v) = F00 + A1 u + A2 v + A3 u v
    def coeffs(F):
        F00 = F[:-1, :-1]
        F10 = F[1:, :-1]
        F01 = F[:-1, 1:]
        F11 = F[1:, 1:]
        A1 = (F10 - F00) / dz
        A2 = (F01 - F00) / dR
        A3 = (F11 - F10 - F01 + F00) / (dz * dR)
        return F00, A1, A2, A3

    win = (ensemble.weights * ensemble.coverage).reshape(nz, nR)
    dens0 = win / (2.0 * math.pi * R0g * dR * dz)  # |psi_in|^2 on the grid
    r00, A1, A2, A3 = coeffs(rf)
    t00, B1, B2, B3 = coeffs(thf)
    d00, D1, D2, D3 = coeffs(dens0)
    R00 = R0g[:-1, :-1]

    # center-point Jacobian of every cell, for the degeneracy guard
    Jc = ((A1 + A3 * dR / 2.0) * (B2 + B3 * dz / 2.0)
          - (A2 + A3 * dz / 2.0) * (B1 + B3 * dR / 2.0))
    if np.any(np.abs(Jc) < min_j):
        raise DegenerateCell("vanishing Jacobian determinant in a cell")

    # subsample the fitted map; each subcell carries dens * R0 * dA measure
    u = (np.arange(n_sub) + 0.5) / n_sub
    ths, rs, ws = [], [], []
    for a in range(n_sub):
        du = u[a] * dz
        for b in range(n_sub):
            dv = u[b] * dR
            ths.append((t00 + B1 * du + B2 * dv + B3 * du * dv).ravel())
            rs.append((r00 + A1 * du + A2 * dv + A3 * du * dv).ravel())
            dens = d00 + D1 * du + D2 * dv + D3 * du * dv
            ws.append((dens * (R00 + dv) * (dz * dR / n_sub ** 2)).ravel())
    ths = np.concatenate(ths)
    rs = np.concatenate(rs)
    ws = np.concatenate(ws)

    curves = []
    for th in np.atleast_1d(theta_list):
        sel = np.abs(ths - th) < dtheta
        if not np.any(sel):
            curves.append(RadialCurve(theta=float(th),
                                      r=np.empty(0), P=np.empty(0)))
            continue
        r_sel = rs[sel]
        w_sel = ws[sel]
        hist, edges = np.histogram(r_sel, bins=n_bins, weights=w_sel)
        count, _ = np.histogram(r_sel, bins=edges)
        centers = 0.5 * (edges[1:] + edges[:-1])
        ok = count > 0
        r_b = centers[ok]
        p_b = (hist / np.diff(edges))[ok]
        if r_b.size > 1:
            norm = np.trapezoid(p_b, r_b)
            if norm > 0:
                p_b = p_b / norm
        curves.append(RadialCurve(theta=float(th), r=r_b, P=p_b))
    return curves
