"""Pilot-wave flow geometry: velocity field, quantum potential,
separator location, and nodal-point / X-point (quantum vortex) analysis.

The velocity field is v = (hbar/m) Im(grad psi / psi).  The separator is
the surface |psi_in| = |psi_out| dividing ingoing- from outgoing-dominated
flow.  Nodal points (psi = 0) sit on the separator where the two pieces
also interfere destructively; each is paired with a nearby X-point where
v = 0 with a saddle-type Jacobian.

Vortex work runs in extended precision (mpmath): at the relevant radii
the carrier phase k0 r is ~1e6 rad, so float64 cannot push |psi| below
~1e-10 of the envelope, while the nodal tolerance and the vortex size
R_X ~ 1e-9 nm both live far beneath that floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import mpmath as mp
from scipy.optimize import brentq

from .constants import HBAR
from .errors import NodalSingularity, NoRoot, XPointNotFound
from .wavefield import (
    CylPoint,
    WaveModel,
    DIFFUSE_QUADRATURE,
    _bragg_bracket,
    _f_parts,
    eval_psi,
    psi_laplacian_zR,
    psi_semiclassical_xyz,
    psi_total_zR,
)

ABS_NODE_FLOOR = 1.0e-30  # |psi| below this: refuse to divide

# topology classification: a boundary root only counts if the ingoing
# envelope there is non-negligible.  Amplitude crossings do exist in the
# deep Gaussian tails at essentially all times; the physically meaningful
# closed/open distinction is whether the boundary branches carry any of
# the packet.  1e-6 of peak sits comfortably between the tail crossings
# (< 1e-7 of peak) and genuine branches (> 1e-3 of peak).
SIGNIFICANT_LOG_ENVELOPE = math.log(1.0e-6)


# ----------------------------------------------------------------------
# velocity and quantum potential
# ----------------------------------------------------------------------

def velocity(p: CylPoint, t: float, model: WaveModel):
    """Pilot-wave velocity (v_z, v_R) [nm/fs] at p."""
    fld = eval_psi(p, t, model)
    if abs(fld.value) < ABS_NODE_FLOOR:
        raise NodalSingularity(f"|psi|={abs(fld.value):.3e} at {p}")
    hom = model.hbar_over_m
    return (hom * (fld.grad_z / fld.value).imag,
            hom * (fld.grad_R / fld.value).imag)


def velocity_zR(z, R, t, model: WaveModel):
    """Array version of velocity over (z, R) grids; no nodal guard."""
    v, gz, gR = psi_total_zR(z, R, t, model)
    hom = model.hbar_over_m
    return hom * np.imag(gz / v), hom * np.imag(gR / v)


def velocity_xyz(x, y, z, t, model: WaveModel):
    """3D velocity [fm/fs] for the semiclassical impact-parameter mode."""
    v, gx, gy, gz = psi_semiclassical_xyz(x, y, z, t, model)
    av = np.abs(v)
    if np.any(av < ABS_NODE_FLOOR):
        raise NodalSingularity("semiclassical |psi| underflow")
    hom = model.hbar_over_m
    return hom * np.imag(gx / v), hom * np.imag(gy / v), hom * np.imag(gz / v)


def quantum_potential(p: CylPoint, t: float, model: WaveModel) -> float:
    """Q = -(hbar^2/2m) lap|psi| / |psi| [eV].

    Uses the identity lap|psi|/|psi| = Re(lap psi/psi) + |Im grad log psi|^2
    with fully analytic derivatives; the k0^2 carrier term cancels between
    the two summands, which finite differences of |psi| cannot reproduce.
    """
    fld = eval_psi(p, t, model)
    if abs(fld.value) < ABS_NODE_FLOOR:
        raise NodalSingularity(f"|psi|={abs(fld.value):.3e} at {p}")
    lap = complex(psi_laplacian_zR(p.z, p.R, t, model))
    gz = fld.grad_z / fld.value
    gR = fld.grad_R / fld.value
    amp_curv = (lap / fld.value).real + gz.imag ** 2 + gR.imag ** 2
    # hbar^2/m in eV nm^2: hbar * (hbar/m)
    return -0.5 * HBAR * model.hbar_over_m * amp_curv


# ----------------------------------------------------------------------
# separator
# ----------------------------------------------------------------------

def _log_amp_gap(r, theta: float, t: float, model: WaveModel):
    """ln|psi_in| - ln|psi_out| along the ray at angle theta (vectorized).

    Computed in log space; the shared normalization prefactor cancels.
    """
    b, tg = model.beam, model.target
    r = np.asarray(r, dtype=float)
    z = r * math.cos(theta)
    R = r * math.sin(theta)
    zc = z + b.l0 - model.v0 * t
    xi = r + b.l0 - model.v0 * t
    ln_in = -zc ** 2 / (2.0 * b.l ** 2) - R ** 2 / (2.0 * b.D ** 2)
    f, _, _ = _f_parts(r, np.full_like(r, theta), model)
    if model.mode == "diffuse":
        amp = model.diffuse_amplitude
        ln_out = math.log(amp) - xi ** 2 / (2.0 * b.l ** 2) + np.log(f)
    elif model.mode == "bragg":
        g, _, _ = _bragg_bracket(r, np.full_like(r, theta), model)
        amp = 2.0 * abs(model.coupling) * (b.D / tg.a)
        ln_out = math.log(amp) - xi ** 2 / (2.0 * b.l ** 2) + np.log(f * np.abs(g))
    else:
        raise ValueError("separator defined for diffuse/bragg modes")
    return ln_in - ln_out


def log_ingoing_envelope(r: float, theta: float, t: float, model: WaveModel) -> float:
    """Gaussian exponent of |psi_in| relative to its peak."""
    b = model.beam
    z = r * math.cos(theta)
    R = r * math.sin(theta)
    zc = z + b.l0 - model.v0 * t
    return -zc ** 2 / (2.0 * b.l ** 2) - R ** 2 / (2.0 * b.D ** 2)


def separator_radius(theta: float, t: float, model: WaveModel,
                     n_scan: int = 1200, r_max: float | None = None) -> float:
    """Innermost radius where |psi_in| = |psi_out| on the ray at theta.

    Bracketing scan followed by root refinement; tolerance well under
    1e-3 nm.  Raises NoRoot when the amplitudes never cross (e.g. zero
    coupling, or before the outgoing pulse emerges on that ray).
    """
    if not (0.0 < theta < math.pi):
        raise ValueError("theta must lie in (0, pi)")
    if model.mode == "free" or model.coupling == 0.0:
        raise NoRoot("no outgoing wave")
    b = model.beam
    if r_max is None:
        r_max = model.v0 * t + b.l0 + 8.0 * b.l
    rs = np.linspace(1.0e-3, r_max, n_scan)
    gap = _log_amp_gap(rs, theta, t, model)
    sgn = np.sign(gap)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if idx.size == 0:
        raise NoRoot(f"no amplitude crossing on ray theta={theta:.4f}")
    i = int(idx[0])
    func = lambda r: float(_log_amp_gap(np.array([r]), theta, t, model)[0])
    return brentq(func, rs[i], rs[i + 1], xtol=1.0e-6, rtol=1.0e-14)


@dataclass(frozen=True)
class SeparatorCurve:
    """One time snapshot of the separator, sampled over theta."""

    t: float
    samples: np.ndarray  # (n, 2): theta [rad], r_s [nm], sorted by theta
    topology: str  # 'open-pair' or 'closed'

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))


def separator_curve(t: float, model: WaveModel,
                    theta_grid=None) -> SeparatorCurve:
    """Separator snapshot with topology classification.

    The curve is closed when significant roots persist at both the
    forward (theta -> 0) and backward (theta -> pi) ends of the grid;
    'significant' means the ingoing envelope at the root is above the
    deep-tail floor, rejecting spurious crossings of the fit-function
    artifact region.
    """
    if theta_grid is None:
        theta_grid = np.linspace(0.01, math.pi - 0.01, 512)
    theta_grid = np.sort(np.asarray(theta_grid, dtype=float))
    samples = []
    found = {}
    for th in theta_grid:
        try:
            r_s = separator_radius(float(th), t, model)
        except NoRoot:
            continue
        samples.append((float(th), r_s))
        found[float(th)] = r_s
    samples_arr = np.array(samples) if samples else np.empty((0, 2))

    def end_significant(end_thetas):
        # judge the extreme sampled angle: an open branch runs off to
        # large r_s there, with the ingoing envelope collapsing, while a
        # closed branch stays at finite radius with real support
        for th in end_thetas:
            th = float(th)
            if th in found:
                return (log_ingoing_envelope(found[th], th, t, model)
                        > SIGNIFICANT_LOG_ENVELOPE)
        return False

    closed = (samples_arr.shape[0] > 0
              and end_significant(theta_grid)
              and end_significant(theta_grid[::-1]))
    return SeparatorCurve(t=t, samples=samples_arr,
                          topology="closed" if closed else "open-pair")


# ----------------------------------------------------------------------
# extended-precision field evaluation (diffuse mode)
# ----------------------------------------------------------------------

def _mp_params(model: WaveModel):
    b, tg = model.beam, model.target
    return {
        "k0": mp.mpf(b.k0), "l": mp.mpf(b.l), "D": mp.mpf(b.D),
        "l0": mp.mpf(b.l0), "v0": mp.mpf(model.v0),
        "amp": mp.mpf(model.coupling) * mp.mpf(b.D) / mp.mpf(tg.a)
               * mp.sqrt(mp.mpf(tg.d) / mp.mpf(tg.a)) / mp.sqrt(2),
        "c3": mp.mpf(model.fit_consts[0]), "c4": mp.mpf(model.fit_consts[1]),
    }


def _mp_psi(z, R, t, pp):
    """Normalization-stripped psi_in + psi_out (diffuse) and gradient, mp.

    The spatially constant prefactor B(t) is dropped: it cancels in
    grad psi / psi and does not move the zeros of psi.
    """
    z, R, t = mp.mpf(z), mp.mpf(R), mp.mpf(t)
    k0, l, D, l0, v0 = pp["k0"], pp["l"], pp["D"], pp["l0"], pp["v0"]
    r = mp.sqrt(z * z + R * R)
    zc = z + l0 - v0 * t
    Ein = mp.e ** (-R * R / (2 * D * D) - zc * zc / (2 * l * l) + 1j * k0 * z)
    Ein_z = Ein * (-zc / (l * l) + 1j * k0)
    Ein_R = Ein * (-R / (D * D))
    # outgoing diffuse: -amp_signed * env * f * e^{i k0 r}
    s = R / r
    c = z / r
    c3, c4 = pp["c3"], pp["c4"]
    S = mp.sqrt(c3 ** 2 * D ** 2 * s ** 2 + r ** 2 - 2 * r * c4 * D * s + c4 ** 2 * D ** 2)
    den = c3 * D * s + S - r * c
    f = 1 / (k0 ** 2 * den)
    theta_r = -R / r ** 2  # d theta / d z
    theta_R = z / r ** 2   # d theta / d R
    dS_dr = (r - c4 * D * s) / S
    dS_dth = (c3 ** 2 * D ** 2 * s * c - r * c4 * D * c) / S
    dden_dr = dS_dr - c
    dden_dth = c3 * D * c + dS_dth + r * s
    dlnf_dr = -dden_dr / den
    dlnf_dth = -dden_dth / den
    xi = r + l0 - v0 * t
    Eout = -pp["amp"] * f * mp.e ** (-xi * xi / (2 * l * l) + 1j * k0 * r)
    dlog_r = -xi / (l * l) + 1j * k0 + dlnf_dr
    Eout_z = Eout * (dlog_r * c + dlnf_dth * theta_r)
    Eout_R = Eout * (dlog_r * s + dlnf_dth * theta_R)
    return Ein + Eout, Ein_z + Eout_z, Ein_R + Eout_R


def _mp_velocity(z, R, t, pp, hom):
    E, Ez, ER = _mp_psi(z, R, t, pp)
    return hom * mp.im(Ez / E), hom * mp.im(ER / E)


def _mp_log_envelope(z, R, t, pp):
    zc = mp.mpf(z) + pp["l0"] - pp["v0"] * mp.mpf(t)
    return -mp.mpf(R) ** 2 / (2 * pp["D"] ** 2) - zc ** 2 / (2 * pp["l"] ** 2)


def _mp_newton_node(z, R, t, pp, tol_rel=mp.mpf("1e-12"), max_iter=50,
                    max_step=mp.mpf("0.01")):
    """2D Newton on (Re psi, Im psi) with the analytic complex gradient.

    Converges when |psi| < tol_rel * local ingoing envelope; steps are
    damped to max_step nm, 50 iterations max.
    """
    z, R = mp.mpf(z), mp.mpf(R)
    for _ in range(max_iter):
        E, Ez, ER = _mp_psi(z, R, t, pp)
        env = mp.e ** _mp_log_envelope(z, R, t, pp)
        if abs(E) < tol_rel * env:
            return z, R, abs(E) / env
        a, b_ = mp.re(Ez), mp.re(ER)
        c, d = mp.im(Ez), mp.im(ER)
        det = a * d - b_ * c
        if det == 0:
            break
        dz = -(d * mp.re(E) - b_ * mp.im(E)) / det
        dR = -(-c * mp.re(E) + a * mp.im(E)) / det
        norm = mp.sqrt(dz * dz + dR * dR)
        if norm > max_step:
            dz, dR = dz * max_step / norm, dR * max_step / norm
        z, R = z + dz, R + dR
    E, _, _ = _mp_psi(z, R, t, pp)
    env = mp.e ** _mp_log_envelope(z, R, t, pp)
    res = abs(E) / env
    if res < tol_rel:
        return z, R, res
    raise NodalSingularity(f"Newton failed to reach tol: residual {mp.nstr(res, 5)}")


# ----------------------------------------------------------------------
# nodal points
# ----------------------------------------------------------------------

def nodal_quantum_number(p: CylPoint, model: WaveModel) -> float:
    """k0 R tan(theta/2) / pi: odd integers at nodes for Z1 < 0,
    even for Z1 > 0 (pi-shifted outgoing phase)."""
    return model.beam.k0 * p.R * math.tan(p.theta / 2.0) / math.pi


def nodal_points(t: float, model: WaveModel,
                 window: tuple[tuple[float, float], tuple[float, float]],
                 max_points: int = 64) -> list[CylPoint]:
    """Nodal points psi = 0 inside window = ((theta_lo, theta_hi), (r_lo, r_hi)).

    Seeds are separator crossings of the phase-matching condition
    k0 R tan(theta/2) = n pi (n odd for Z1 < 0, even for Z1 > 0),
    polished by extended-precision Newton to |psi| < 1e-12 x envelope.
    """
    if model.mode != "diffuse":
        raise ValueError("nodal analysis implemented for diffuse mode")
    (th_lo, th_hi), (r_lo, r_hi) = window
    if r_lo <= 0:
        raise ValueError("window must exclude r = 0")

    def m_of(th):
        r_s = separator_radius(th, t, model)
        return model.beam.k0 * (r_s * math.sin(th)) * math.tan(th / 2.0) / math.pi, r_s

    # adaptively refine the theta grid until the index m is well sampled
    thetas = list(np.linspace(th_lo, th_hi, 17))
    vals = {}
    for th in thetas:
        try:
            vals[th] = m_of(th)
        except NoRoot:
            vals[th] = None
    for _ in range(24):
        new = []
        for a, b in zip(thetas[:-1], thetas[1:]):
            va, vb = vals[a], vals[b]
            if va is None or vb is None:
                continue
            if abs(vb[0] - va[0]) > 0.45:
                new.append(0.5 * (a + b))
        if not new:
            break
        for th in new:
            try:
                vals[th] = m_of(th)
            except NoRoot:
                vals[th] = None
        thetas = sorted(set(thetas) | set(new))
        if len(thetas) > 20000:
            raise ValueError("window too wide: too many candidate nodes")

    parity = 1 if model.beam.Z1 < 0 else 0  # odd/even multiples of pi
    pp = _mp_params(model)
    pts = []
    with mp.workdps(60):
        for a, b in zip(thetas[:-1], thetas[1:]):
            va, vb = vals[a], vals[b]
            if va is None or vb is None:
                continue
            m_a, m_b = va[0], vb[0]
            lo, hi = min(m_a, m_b), max(m_a, m_b)
            n = int(math.floor(lo))
            if n % 2 != parity:
                n += 1
            while n <= hi:
                if n >= lo:
                    th_star = brentq(lambda th, n=n: m_of(th)[0] - n, a, b,
                                     xtol=1.0e-12)
                    r_star = m_of(th_star)[1]
                    if r_lo <= r_star <= r_hi:
                        z0 = r_star * math.cos(th_star)
                        R0 = r_star * math.sin(th_star)
                        try:
                            zn, Rn, _ = _mp_newton_node(z0, R0, t, pp)
                        except NodalSingularity:
                            n += 2
                            continue
                        pts.append(CylPoint(z=float(zn), R=float(Rn)))
                        if len(pts) > max_points:
                            raise ValueError("window too wide: > max_points nodes")
                n += 2
    pts.sort(key=lambda p: p.theta)
    return pts


# ----------------------------------------------------------------------
# vortex analysis
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class VortexComplex:
    """One nodal point + X-point pair with its local flow structure."""

    nodal: CylPoint
    xpoint: CylPoint
    eigenvalues: tuple[float, float]  # (lambda_plus > 0, lambda_minus < 0) [1/fs]
    eigvecs: tuple[tuple[float, float], tuple[float, float]]
    R_X: float  # |nodal - xpoint| [nm]
    nodalClass: str  # attractor | center | repellor


def vortex_size_estimate(model: WaveModel) -> float:
    """Order-of-magnitude vortex extent 1/(D k0^2) [nm]."""
    return 1.0 / (model.beam.D * model.beam.k0 ** 2)


def circulation(nodal: CylPoint, radius: float, t: float, model: WaveModel,
                n: int = 256) -> float:
    """Loop integral of v around the nodal point [nm^2/fs].

    Equals (hbar/m) x 2 pi x winding number; computed from the phase
    winding of psi on the circle in extended precision.
    """
    pp = _mp_params(model)
    with mp.workdps(60):
        total = mp.mpf(0)
        prev = None
        first = None
        for k in range(n):
            a = 2 * mp.pi * k / n
            E, _, _ = _mp_psi(nodal.z + radius * mp.cos(a),
                              nodal.R + radius * mp.sin(a), t, pp)
            ph = mp.arg(E)
            if prev is not None:
                d = ph - prev
                while d > mp.pi:
                    d -= 2 * mp.pi
                while d < -mp.pi:
                    d += 2 * mp.pi
                total += d
            else:
                first = ph
            prev = ph
        d = first - prev
        while d > mp.pi:
            d -= 2 * mp.pi
        while d < -mp.pi:
            d += 2 * mp.pi
        total += d
        return float(model.hbar_over_m * total)


def vortex_analysis(nodal: CylPoint, t: float, model: WaveModel) -> VortexComplex:
    """Find the X-point paired with a verified nodal point and classify.

    The X-point is the nearby stagnation point v = 0; Newton is seeded on
    a ring of radius 1/(D k0^2) around the node, with a trust radius of
    1e3 x that estimate.  All work in extended precision.
    """
    if model.mode != "diffuse":
        raise ValueError("vortex analysis implemented for diffuse mode")
    pp = _mp_params(model)
    hom = mp.mpf(model.hbar_over_m)
    est = mp.mpf(vortex_size_estimate(model))
    trust = 1000 * est
    with mp.workdps(60):
        zn, Rn, _ = _mp_newton_node(nodal.z, nodal.R, t, pp)

        def F(z, R):
            E, Ez, ER = _mp_psi(z, R, t, pp)
            return mp.im(Ez / E), mp.im(ER / E)

        def newton_x(z, R):
            h = est * mp.mpf("1e-8")
            for _ in range(80):
                fz, fR = F(z, R)
                j00 = (F(z + h, R)[0] - F(z - h, R)[0]) / (2 * h)
                j01 = (F(z, R + h)[0] - F(z, R - h)[0]) / (2 * h)
                j10 = (F(z + h, R)[1] - F(z - h, R)[1]) / (2 * h)
                j11 = (F(z, R + h)[1] - F(z, R - h)[1]) / (2 * h)
                det = j00 * j11 - j01 * j10
                if det == 0:
                    return None
                dz = -(j11 * fz - j01 * fR) / det
                dR = -(-j10 * fz + j00 * fR) / det
                step = mp.sqrt(dz * dz + dR * dR)
                if step > est:
                    dz, dR = dz * est / step, dR * est / step
                z, R = z + dz, R + dR
                if mp.sqrt((z - zn) ** 2 + (R - Rn) ** 2) > trust:
                    return None
                if step < est * mp.mpf("1e-20"):
                    return z, R
            return None

        xp = None
        for ang in range(8):
            a = mp.pi * (2 * ang + 1) / 8
            res = newton_x(zn + est * mp.cos(a), Rn + est * mp.sin(a))
            if res is not None:
                # reject if it collapsed onto the node itself
                if mp.sqrt((res[0] - zn) ** 2 + (res[1] - Rn) ** 2) > est * mp.mpf("1e-6"):
                    xp = res
                    break
        if xp is None:
            raise XPointNotFound("Newton diverged from all seeds")
        zx, Rx = xp
        r_x = float(mp.sqrt((zx - zn) ** 2 + (Rx - Rn) ** 2))

        # flow Jacobian (hbar/m included) at the X-point
        h = est * mp.mpf("1e-6")
        j00 = hom * (F(zx + h, Rx)[0] - F(zx - h, Rx)[0]) / (2 * h)
        j01 = hom * (F(zx, Rx + h)[0] - F(zx, Rx - h)[0]) / (2 * h)
        j10 = hom * (F(zx + h, Rx)[1] - F(zx - h, Rx)[1]) / (2 * h)
        j11 = hom * (F(zx, Rx + h)[1] - F(zx, Rx - h)[1]) / (2 * h)
        tr = j00 + j11
        det = j00 * j11 - j01 * j10
        disc = tr * tr - 4 * det
        if disc < 0:
            raise XPointNotFound("complex eigenvalues at candidate X-point")
        sq = mp.sqrt(disc)
        lam_p = float((tr + sq) / 2)
        lam_m = float((tr - sq) / 2)

        def eigvec(lam):
            if abs(j01) > abs(j10):
                v = (float(j01), float(lam - j00))
            else:
                v = (float(lam - j11), float(j10))
            nv = math.hypot(*v)
            return (v[0] / nv, v[1] / nv) if nv > 0 else (1.0, 0.0)

        vec_p, vec_m = eigvec(mp.mpf(lam_p)), eigvec(mp.mpf(lam_m))

        # classify the node by net flux vs circulation on a tight loop
        rho = mp.mpf(r_x) / 5 if r_x > 0 else est / 5
        flux = mp.mpf(0)
        circ = mp.mpf(0)
        nloop = 64
        for k in range(nloop):
            a = 2 * mp.pi * k / nloop
            ca, sa = mp.cos(a), mp.sin(a)
            vz, vR = _mp_velocity(zn + rho * ca, Rn + rho * sa, t, pp, hom)
            flux += vz * ca + vR * sa
            circ += -vz * sa + vR * ca
        flux, circ = float(flux / nloop), float(circ / nloop)
        if flux < -0.01 * abs(circ):
            klass = "attractor"
        elif flux > 0.01 * abs(circ):
            klass = "repellor"
        else:
            klass = "center"

    return VortexComplex(
        nodal=CylPoint(z=float(zn), R=float(Rn)),
        xpoint=CylPoint(z=float(zx), R=float(Rx)),
        eigenvalues=(lam_p, lam_m),
        eigvecs=(vec_p, vec_m),
        R_X=r_x,
        nodalClass=klass,
    )
