"""Closed-form wavepacket models psi = psi_in + psi_out and their gradients.

The total wavefunction of a charged particle scattered by a thin
crystalline foil is modeled as an ingoing Gaussian packet (longitudinal
coherence length l, transverse coherence length D) plus an outgoing
radial pulse shaped by the near-target geometric factor f(r, theta) and,
in bragg mode, by the coherent lattice terms U_q exp(i Phi_q).

All evaluators are pure functions of (point, time, model); models and
lattices are immutable after construction and safe to share across
workers.  z/R arguments may be floats or numpy arrays (broadcasting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .constants import (
    COULOMB_EVNM,
    HBAR_OVER_ME,
    HBAR_OVER_ME_FM2,
    coulomb_coupling,
)

# Diffuse random-phasor quadrature factor: the incoherent lattice sum of
# N unit phasors contributes sqrt(N/2) per quadrature, so the diffuse
# amplitude is D sqrt(d/a) / (a sqrt(2)).  Validated against the published
# nodal-point coordinates (R=1934.42 nm, z=137.178 nm) to < 0.1 nm.
DIFFUSE_QUADRATURE = 1.0 / math.sqrt(2.0)

MODES = ("free", "diffuse", "bragg", "semiclassical")


@dataclass(frozen=True)
class BeamSpec:
    """Incident-particle parameters defining the ingoing packet.

    k0 : mean wavenumber [nm^-1] (fm^-1 in semiclassical use)
    l : longitudinal coherence length [nm]
    D : transverse coherence length [nm]
    l0 : initial distance of the packet center from the target [nm]
    Z1 : signed projectile charge number
    mass : particle mass in electron masses
    """

    k0: float
    l: float
    D: float
    l0: float
    Z1: int = -1
    mass: float = 1.0

    def __post_init__(self):
        for name in ("k0", "l", "D", "l0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"BeamSpec.{name} must be positive")
        if self.mass <= 0:
            raise ValueError("BeamSpec.mass must be positive")

    @property
    def hbar_over_m(self) -> float:
        return HBAR_OVER_ME / self.mass

    @property
    def v0(self) -> float:
        """Mean packet speed hbar k0 / m [nm/fs]."""
        return self.hbar_over_m * self.k0

    @property
    def is_fast_packet(self) -> bool:
        """k0 at least 100x larger than both momentum dispersions."""
        return self.k0 >= 100.0 * max(1.0 / self.l, 1.0 / self.D)


@dataclass(frozen=True)
class TargetSpec:
    """Crystal foil parameters.

    Z : nuclear charge number
    a : cubic lattice constant [nm]
    d : foil thickness [nm]; the number of lattice planes is round(d/a)
    deltaA : thermal oscillation amplitude as a fraction of a, in [0, 0.5)
    nperp : transverse atom count (defaults to round(D/a) at lattice build)
    r0 : charge screening length [nm] (order of the atomic size; it drops
         out of the fast-packet closed forms and is kept for completeness)
    """

    Z: int
    a: float
    d: float
    deltaA: float = 0.0
    nperp: int | None = None
    r0: float = 0.05

    def __post_init__(self):
        if self.a <= 0 or self.d <= 0:
            raise ValueError("TargetSpec.a and d must be positive")
        if not (0.0 <= self.deltaA < 0.5):
            raise ValueError("TargetSpec.deltaA must lie in [0, 0.5)")
        if self.nz < 1:
            raise ValueError("target thinner than one lattice plane")

    @property
    def nz(self) -> int:
        return int(round(self.d / self.a))

    @property
    def rho(self) -> float:
        """Atom number density a^-3 [nm^-3]."""
        return self.a ** -3


@dataclass(frozen=True)
class Lattice:
    """Realized atom positions of one thermal snapshot."""

    positions: np.ndarray  # (N, 3), nm
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        self.positions.setflags(write=False)

    def __len__(self) -> int:
        return self.positions.shape[0]


def build_lattice(target: TargetSpec, seed: int, nperp: int | None = None) -> Lattice:
    """Cubic lattice with uniform random offsets in [-0.5, 0.5] * deltaA * a.

    Integer grids are inclusive, n in [-N/2, N/2]; for odd N the grid sits
    on half-integers, so each axis always carries N+1 sites and the total
    count is (nperp+1)^2 (nz+1).  Deterministic for a fixed seed.
    """
    n_perp = nperp if nperp is not None else target.nperp
    if n_perp is None:
        raise ValueError("nperp not set on TargetSpec and not passed explicitly")
    nz = target.nz
    ax_perp = (np.arange(n_perp + 1) - n_perp / 2.0) * target.a
    ax_z = (np.arange(nz + 1) - nz / 2.0) * target.a
    gx, gy, gz = np.meshgrid(ax_perp, ax_perp, ax_z, indexing="ij")
    pos = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    if target.deltaA > 0:
        rng = np.random.default_rng(seed)
        pos = pos + target.deltaA * target.a * rng.uniform(-0.5, 0.5, size=pos.shape)
    return Lattice(positions=pos, seed=seed)


@dataclass(frozen=True)
class CylPoint:
    """Point in the meridian plane: axial z and cylindrical radius R [nm]."""

    z: float
    R: float

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("CylPoint.R must be >= 0")
        if self.r == 0.0:
            raise ValueError("CylPoint at the origin: theta undefined")

    @property
    def r(self) -> float:
        return math.hypot(self.z, self.R)

    @property
    def theta(self) -> float:
        return math.atan2(self.R, self.z)


@dataclass(frozen=True)
class ComplexField:
    """psi and its analytic gradient at one meridian-plane point."""

    value: complex
    grad_z: complex
    grad_R: complex


@dataclass(frozen=True)
class ComplexField3:
    """psi and its analytic gradient at one 3D Cartesian point."""

    value: complex
    grad_x: complex
    grad_y: complex
    grad_z: complex


@dataclass(frozen=True)
class WaveModel:
    """A closed, evaluable wavefunction model psi = psi_in + psi_out.

    mode: 'free' (no target), 'diffuse' (incoherent lattice background),
    'bragg' (diffuse + coherent Bragg terms) or 'semiclassical'
    (impact-parameter packet, fm units).

    exact_spreading keeps the i hbar t / m terms in the Gaussian widths;
    the default drops them (hbar t / m << D^2, l^2 for the beams of
    interest here).  The semiclassical mode is run with them kept.
    """

    beam: BeamSpec
    target: TargetSpec | None = None
    mode: str = "diffuse"
    fit_consts: tuple[float, float] = (0.3, 0.8)
    exact_spreading: bool = False
    impact_parameter: float = 0.0  # b [fm], semiclassical mode only
    coherent_q_max: int | None = None  # None: all admissible orders

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("diffuse", "bragg") and self.target is None:
            raise ValueError(f"mode {self.mode!r} requires a target")
        if self.mode == "semiclassical" and self.target is None:
            raise ValueError("semiclassical mode requires a target (for Z)")
        if self.mode == "bragg" and not self.bragg_q():
            raise ValueError("bragg mode with empty Bragg set (k0 a <= pi)")

    # -- derived coupling constants -------------------------------------

    @property
    def coupling(self) -> float:
        """Signed C = m Z1 Z q_e^2/(4 pi eps0 hbar^2) [nm^-1 or fm^-1]."""
        if self.target is None:
            return 0.0
        return coulomb_coupling(
            self.beam.mass, self.beam.Z1, self.target.Z,
            fm_units=(self.mode == "semiclassical"),
        )

    @property
    def diffuse_amplitude(self) -> float:
        """|C| (D/a) sqrt(d/a) / sqrt(2): magnitude scale of psi_out."""
        if self.target is None:
            return 0.0
        t, b = self.target, self.beam
        return abs(self.coupling) * (b.D / t.a) * math.sqrt(t.d / t.a) * DIFFUSE_QUADRATURE

    @property
    def hbar_over_m(self) -> float:
        if self.mode == "semiclassical":
            return HBAR_OVER_ME_FM2 / self.beam.mass
        return self.beam.hbar_over_m

    @property
    def v0(self) -> float:
        return self.hbar_over_m * self.beam.k0

    def bragg_q(self) -> list[int]:
        """Coherent Bragg orders entering the outgoing bracket.

        Admissible orders satisfy q pi / (k0 a) < 1; all of them enter by
        default.  Set coherent_q_max to truncate the sum (it is capped at
        the admissible maximum).
        """
        if self.target is None:
            return []
        x = self.beam.k0 * self.target.a / math.pi
        q_adm = int(math.ceil(x)) - 1 if x > 1 else 0
        if self.coherent_q_max is not None:
            q_adm = min(q_adm, self.coherent_q_max)
        return list(range(1, q_adm + 1))

    def bragg_thetas(self) -> np.ndarray:
        qs = np.asarray(self.bragg_q(), dtype=float)
        return 2.0 * np.arcsin(np.sqrt(qs * math.pi / (self.beam.k0 * self.target.a)))

    def with_time_frozen_widths(self) -> "WaveModel":
        return replace(self, exact_spreading=False)


# ----------------------------------------------------------------------
# ingoing packet
# ----------------------------------------------------------------------

def _widths(model: WaveModel, t):
    """Complex squared widths D^2 + i hbar t/m and l^2 + i hbar t/m."""
    b = model.beam
    if model.exact_spreading:
        s = 1j * model.hbar_over_m * t
    else:
        s = 0.0
    return b.D ** 2 + s, b.l ** 2 + s


def _B_prefactor(model: WaveModel, t):
    """Normalization/phase factor B(t) common to psi_in and psi_out.

    The transverse factor enters at first power, the longitudinal one at
    power 1/2, exactly as printed in the model being implemented.
    """
    b = model.beam
    D2, l2 = _widths(model, t)
    return (
        math.pi ** -0.75
        * (b.D / D2)
        * np.sqrt(b.l / l2)
        * np.exp(1j * (b.k0 * b.l0 - 0.5 * model.hbar_over_m * b.k0 ** 2 * t))
    )


def psi_in_zR(z, R, t, model: WaveModel):
    """Ingoing packet: (value, dpsi/dz, dpsi/dR); array-friendly."""
    b = model.beam
    D2, l2 = _widths(model, t)
    zc = z + b.l0 - model.v0 * t
    val = _B_prefactor(model, t) * np.exp(
        -np.asarray(R) ** 2 / (2.0 * D2) - zc ** 2 / (2.0 * l2) + 1j * b.k0 * np.asarray(z)
    )
    dlog_z = -zc / l2 + 1j * b.k0
    dlog_R = -np.asarray(R) / D2
    return val, val * dlog_z, val * dlog_R


def psi_in_dlog_zR(z, R, t, model: WaveModel):
    """Log-derivatives (dlog/dz, dlog/dR) of the ingoing packet.

    Closed form, finite even where the packet amplitude underflows to
    zero; used by the swarm flow so no division by psi is ever needed.
    """
    b = model.beam
    D2, l2 = _widths(model, t)
    zc = np.asarray(z) + b.l0 - model.v0 * t
    return -zc / l2 + 1j * b.k0, -np.asarray(R) / D2 + 0.0j


def eval_psi_in(p: CylPoint, t: float, model: WaveModel) -> ComplexField:
    v, gz, gR = psi_in_zR(p.z, p.R, t, model)
    return ComplexField(complex(v), complex(gz), complex(gR))


# ----------------------------------------------------------------------
# near-target geometric factor f(r, theta)
# ----------------------------------------------------------------------

def _f_parts(r, theta, model: WaveModel):
    """f and the log-derivatives (dlnf/dr, dlnf/dtheta)."""
    c3, c4 = model.fit_consts
    D = model.beam.D
    k0 = model.beam.k0
    s, c = np.sin(theta), np.cos(theta)
    S = np.sqrt(c3 ** 2 * D ** 2 * s ** 2 + r ** 2 - 2.0 * r * c4 * D * s + c4 ** 2 * D ** 2)
    den = c3 * D * s + S - r * c
    f = 1.0 / (k0 ** 2 * den)
    dS_dr = (r - c4 * D * s) / S
    dS_dth = (c3 ** 2 * D ** 2 * s * c - r * c4 * D * c) / S
    dden_dr = dS_dr - c
    dden_dth = c3 * D * c + dS_dth + r * s
    return f, -dden_dr / den, -dden_dth / den


def eval_f_geom(r: float, theta: float, model: WaveModel) -> float:
    """Geometric prefactor f(r, theta) [nm]; asymptotically
    1/(2 k0^2 sin^2(theta/2) r) at large r."""
    if r <= 0:
        raise ValueError("r must be positive")
    if not (0.0 < theta <= math.pi):
        raise ValueError("theta must lie in (0, pi]")
    f, _, _ = _f_parts(r, theta, model)
    return float(f)


# ----------------------------------------------------------------------
# effective Fraunhofer sum (exact lattice sum, O(N) per point)
# ----------------------------------------------------------------------

def eval_S_eff_direct(lattice: Lattice, p: CylPoint, t: float, model: WaveModel) -> complex:
    """Exact sum over atoms of phasor x Gaussian envelope.

    Cost grows linearly with the atom count; intended for validation and
    small targets, not for trajectory integration.
    """
    b = model.beam
    D2, l2 = _widths(model, t)
    r, theta = p.r, p.theta
    n = np.array([math.sin(theta), 0.0, math.cos(theta)])
    pos = lattice.positions
    rj2 = np.einsum("ij,ij->i", pos, pos)
    rdotn = pos @ n
    u = -rdotn + pos[:, 2] + rj2 / (2.0 * r)
    Rj2 = pos[:, 0] ** 2 + pos[:, 1] ** 2
    phase = 1j * b.k0 * u
    envelope = -Rj2 / (2.0 * D2) - (r + b.l0 - model.v0 * t + u) ** 2 / (2.0 * l2)
    return complex(np.sum(np.exp(phase + envelope)))


# ----------------------------------------------------------------------
# outgoing wave: diffuse and bragg closed forms
# ----------------------------------------------------------------------

def _bragg_bracket(r, theta, model: WaveModel):
    """sqrt(d/a)/sqrt(2) + sum_q U_q e^{i Phi_q}, with (d/dr, d/dtheta).

    U_q = (2/a) sqrt(r/k0) sinc(sqrt(k0 r) sin(theta_q) (theta - theta_q)):
    the Fresnel window of ~ (2/a) sqrt(r/k0) lattice planes contributes
    coherently, so the resonance peak grows like sqrt(r) with angular
    half-width ~ 1/(sin(theta_q) sqrt(k0 r)) and the far tail falls off as
    2/(k0 a sin(theta_q) |theta - theta_q|).
    """
    t_, b = model.target, model.beam
    th_q = model.bragg_thetas()
    s_q = np.sin(th_q)
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    rr = r[..., None]
    dth = theta[..., None] - th_q
    sk = np.sqrt(b.k0 * rr)
    x = sk * s_q * dth
    Um = 2.0 * np.sqrt(rr / b.k0) / t_.a
    # stable sinc series near x = 0
    small = np.abs(x) < 1.0e-6
    xs = np.where(small, 1.0, x)
    sinc = np.where(small, 1.0 - x ** 2 / 6.0, np.sin(xs) / xs)
    dsinc = np.where(small, -x / 3.0, (xs * np.cos(xs) - np.sin(xs)) / xs ** 2)
    U = Um * sinc
    x_r = x / (2.0 * rr)
    x_th = sk * s_q
    dU_dr = Um * (sinc / (2.0 * rr) + dsinc * x_r)
    dU_dth = Um * dsinc * x_th
    w = -3.0 + 0.5 * rr * b.k0 * s_q ** 2 * dth ** 2
    phi = np.arctan2(1.0, w)
    dphi_dw = -1.0 / (1.0 + w ** 2)
    dphi_dr = dphi_dw * 0.5 * b.k0 * s_q ** 2 * dth ** 2
    dphi_dth = dphi_dw * rr * b.k0 * s_q ** 2 * dth
    e = np.exp(1j * phi)
    g = math.sqrt(t_.d / t_.a) * DIFFUSE_QUADRATURE + np.sum(U * e, axis=-1)
    dg_dr = np.sum((dU_dr + 1j * U * dphi_dr) * e, axis=-1)
    dg_dth = np.sum((dU_dth + 1j * U * dphi_dth) * e, axis=-1)
    return g, dg_dr, dg_dth


def _psi_out_parts(z, R, t, model: WaveModel):
    """Outgoing wave as (value, dlog/dz, dlog/dR); diffuse/bragg only.

    The log-derivatives are closed forms that stay finite even where the
    value itself underflows, so callers never have to divide by psi.
    """
    b, tg = model.beam, model.target
    z = np.asarray(z, dtype=float)
    R = np.asarray(R, dtype=float)
    r = np.hypot(z, R)
    theta = np.arctan2(R, z)
    _, l2 = _widths(model, t)
    f, dlnf_dr, dlnf_dth = _f_parts(r, theta, model)
    xi = r + b.l0 - model.v0 * t
    if model.mode == "diffuse":
        amp = -model.coupling * (b.D / tg.a) * math.sqrt(tg.d / tg.a) * DIFFUSE_QUADRATURE
        val = amp * _B_prefactor(model, t) * np.exp(-xi ** 2 / (2.0 * l2) + 1j * b.k0 * r) * f
        dlog_r = -xi / l2 + 1j * b.k0 + dlnf_dr
        dlog_th = dlnf_dth + 0.0j
    else:  # bragg
        g, dg_dr, dg_dth = _bragg_bracket(r, theta, model)
        amp = -2.0 * model.coupling * (b.D / tg.a)
        val = amp * _B_prefactor(model, t) * np.exp(-xi ** 2 / (2.0 * l2) + 1j * b.k0 * r) * f * g
        dlog_r = -xi / l2 + 1j * b.k0 + dlnf_dr + dg_dr / g
        dlog_th = dlnf_dth + dg_dth / g
    # chain rule (r, theta) -> (z, R)
    dlog_z = dlog_r * (z / r) + dlog_th * (-R / r ** 2)
    dlog_R = dlog_r * (R / r) + dlog_th * (z / r ** 2)
    return val, dlog_z, dlog_R


def psi_out_zR(z, R, t, model: WaveModel):
    """Outgoing wave: (value, dpsi/dz, dpsi/dR); array-friendly.

    Carries the first-order Born sign, so for Z1 < 0 the outgoing
    amplitude is positive and nodal points satisfy
    k0 R tan(theta/2) = (2q+1) pi.
    """
    if model.mode == "free":
        zero = np.zeros(np.broadcast(np.asarray(z), np.asarray(R)).shape, dtype=complex)
        return zero, zero.copy(), zero.copy()
    if model.mode == "semiclassical":
        raise ValueError("use psi_semiclassical_xyz for semiclassical mode")
    val, dlog_z, dlog_R = _psi_out_parts(z, R, t, model)
    return val, val * dlog_z, val * dlog_R


def psi_out_band_zR(z, R, t, model: WaveModel):
    """Outgoing pilot flow for swarm integration: (|psi_out|, Im dlog_z,
    Im dlog_R); array-friendly.

    Both outgoing modes are beat-free on their own (the carrier e^{i k0 r}
    contributes the constant radial rate k0; the bracket amplitudes vary
    on micrometre scales), so this is the exact outgoing flow.  It exists
    as a separate entry point so the swarm right-hand side can blend the
    ingoing and outgoing branches by amplitude dominance without ever
    forming the oscillating total field; the log-derivatives stay finite
    even where the amplitude underflows.
    """
    if model.mode not in ("diffuse", "bragg"):
        raise ValueError("psi_out_band_zR supports diffuse and bragg modes")
    val, dlog_z, dlog_R = _psi_out_parts(z, R, t, model)
    return np.abs(val), np.imag(dlog_z), np.imag(dlog_R)


def eval_psi_out(p: CylPoint, t: float, model: WaveModel) -> ComplexField:
    if p.r <= 0:
        raise ValueError("r must be positive")
    if not (0.0 < p.theta <= math.pi):
        raise ValueError("theta must lie in (0, pi]")
    v, gz, gR = psi_out_zR(p.z, p.R, t, model)
    return ComplexField(complex(v), complex(gz), complex(gR))


def psi_total_zR(z, R, t, model: WaveModel):
    """psi_in + psi_out with gradients; array-friendly."""
    vi, giz, giR = psi_in_zR(z, R, t, model)
    if model.mode == "free":
        return vi, giz, giR
    vo, goz, goR = psi_out_zR(z, R, t, model)
    return vi + vo, giz + goz, giR + goR


def eval_psi(p: CylPoint, t: float, model: WaveModel) -> ComplexField:
    v, gz, gR = psi_total_zR(p.z, p.R, t, model)
    return ComplexField(complex(v), complex(gz), complex(gR))


# ----------------------------------------------------------------------
# analytic Laplacian (for the quantum potential)
# ----------------------------------------------------------------------
#
# Each wave piece is exp(L) up to a spatial constant, so
# lap(psi)/psi = lap(L) + grad(L).grad(L) (complex, no conjugation).
# Finite differences of |psi| are useless here: away from nodes the
# k0^2 carrier term cancels against |Im grad(log psi)|^2 to 10 orders,
# which only an analytic evaluation survives.

def _lnf_derivs(r, theta, model: WaveModel):
    """First and second (r, theta) derivatives of ln f(r, theta)."""
    c3, c4 = model.fit_consts
    D = model.beam.D
    s, c = np.sin(theta), np.cos(theta)
    g = c3 ** 2 * D ** 2 * s ** 2 + r ** 2 - 2.0 * r * c4 * D * s + c4 ** 2 * D ** 2
    S = np.sqrt(g)
    g_r = 2.0 * r - 2.0 * c4 * D * s
    g_th = 2.0 * c3 ** 2 * D ** 2 * s * c - 2.0 * r * c4 * D * c
    g_rr = 2.0
    g_rth = -2.0 * c4 * D * c
    g_thth = 2.0 * c3 ** 2 * D ** 2 * (c * c - s * s) + 2.0 * r * c4 * D * s
    S_r = g_r / (2.0 * S)
    S_th = g_th / (2.0 * S)
    S_rr = g_rr / (2.0 * S) - g_r * g_r / (4.0 * g * S)
    S_rth = g_rth / (2.0 * S) - g_r * g_th / (4.0 * g * S)
    S_thth = g_thth / (2.0 * S) - g_th * g_th / (4.0 * g * S)
    den = c3 * D * s + S - r * c
    d_r = S_r - c
    d_th = c3 * D * c + S_th + r * s
    d_rr = S_rr
    d_rth = S_rth + s
    d_thth = -c3 * D * s + S_thth + r * c
    # ln f = -ln den + const
    lnf_r = -d_r / den
    lnf_th = -d_th / den
    lnf_rr = -d_rr / den + d_r * d_r / den ** 2
    lnf_rth = -d_rth / den + d_r * d_th / den ** 2
    lnf_thth = -d_thth / den + d_th * d_th / den ** 2
    return lnf_r, lnf_th, lnf_rr, lnf_rth, lnf_thth


def _bragg_bracket2(r, theta, model: WaveModel):
    """Bragg bracket g with first and second (r, theta) derivatives."""
    t_, b = model.target, model.beam
    th_q = model.bragg_thetas()
    s_q = np.sin(th_q)
    rr = np.asarray(r, dtype=float)[..., None]
    dth = np.asarray(theta, dtype=float)[..., None] - th_q
    sk = np.sqrt(b.k0 * rr)
    x = sk * s_q * dth
    Um = 2.0 * np.sqrt(rr / b.k0) / t_.a
    small = np.abs(x) < 1.0e-6
    xs = np.where(small, 1.0, x)
    sinc = np.where(small, 1.0 - x ** 2 / 6.0, np.sin(xs) / xs)
    sinc1 = np.where(small, -x / 3.0, (xs * np.cos(xs) - np.sin(xs)) / xs ** 2)
    sinc2 = np.where(
        small, -1.0 / 3.0 + x ** 2 / 10.0,
        -np.sin(xs) / xs - 2.0 * np.cos(xs) / xs ** 2 + 2.0 * np.sin(xs) / xs ** 3,
    )
    x_r = x / (2.0 * rr)
    x_th = sk * s_q
    x_rr = -x / (4.0 * rr ** 2)
    x_rth = x_th / (2.0 * rr)
    Um_r = Um / (2.0 * rr)
    Um_rr = -Um / (4.0 * rr ** 2)
    U = Um * sinc
    U_r = Um_r * sinc + Um * sinc1 * x_r
    U_th = Um * sinc1 * x_th
    U_rr = (Um_rr * sinc + 2.0 * Um_r * sinc1 * x_r
            + Um * (sinc2 * x_r ** 2 + sinc1 * x_rr))
    U_rth = Um_r * sinc1 * x_th + Um * (sinc2 * x_r * x_th + sinc1 * x_rth)
    U_thth = Um * sinc2 * x_th ** 2
    w = -3.0 + 0.5 * rr * b.k0 * s_q ** 2 * dth ** 2
    w_r = 0.5 * b.k0 * s_q ** 2 * dth ** 2
    w_th = rr * b.k0 * s_q ** 2 * dth
    w_rth = b.k0 * s_q ** 2 * dth
    w_thth = rr * b.k0 * s_q ** 2
    phi = np.arctan2(1.0, w)
    p1 = -1.0 / (1.0 + w ** 2)  # dphi/dw
    p2 = 2.0 * w / (1.0 + w ** 2) ** 2  # d2phi/dw2
    phi_r = p1 * w_r
    phi_th = p1 * w_th
    phi_rr = p2 * w_r * w_r
    phi_rth = p2 * w_r * w_th + p1 * w_rth
    phi_thth = p2 * w_th * w_th + p1 * w_thth
    e = np.exp(1j * phi)
    term = U * e
    # d(U e^{i phi}) and second derivatives by product rule
    t_r = (U_r + 1j * U * phi_r) * e
    t_th = (U_th + 1j * U * phi_th) * e
    t_rr = (U_rr + 2j * U_r * phi_r + 1j * U * phi_rr - U * phi_r ** 2) * e
    t_rth = (U_rth + 1j * (U_r * phi_th + U_th * phi_r) + 1j * U * phi_rth - U * phi_r * phi_th) * e
    t_thth = (U_thth + 2j * U_th * phi_th + 1j * U * phi_thth - U * phi_th ** 2) * e
    g0 = math.sqrt(t_.d / t_.a) * DIFFUSE_QUADRATURE + np.sum(term, axis=-1)
    return (g0, np.sum(t_r, axis=-1), np.sum(t_th, axis=-1),
            np.sum(t_rr, axis=-1), np.sum(t_rth, axis=-1), np.sum(t_thth, axis=-1))


def psi_laplacian_zR(z, R, t, model: WaveModel):
    """3D Laplacian of psi = psi_in + psi_out at axisymmetric points.

    Returns lap(psi) as a complex scalar/array.  The on-axis limit R=0 is
    handled for the ingoing piece; outgoing pieces require theta > 0.
    """
    if model.mode == "semiclassical":
        raise ValueError("Laplacian implemented for axisymmetric modes only")
    b = model.beam
    z = np.asarray(z, dtype=float)
    R = np.asarray(R, dtype=float)
    D2, l2 = _widths(model, t)
    vin, _, _ = psi_in_zR(z, R, t, model)
    zc = z + b.l0 - model.v0 * t
    Lz = -zc / l2 + 1j * b.k0
    LR = -R / D2
    lam_in = (-1.0 / l2) + (-1.0 / D2) + (-1.0 / D2) + Lz ** 2 + LR ** 2
    lap = vin * lam_in
    if model.mode == "free":
        return lap
    r = np.hypot(z, R)
    theta = np.arctan2(R, z)
    vout, _, _ = psi_out_zR(z, R, t, model)
    xi = r + b.l0 - model.v0 * t
    lnf_r, lnf_th, lnf_rr, lnf_rth, lnf_thth = _lnf_derivs(r, theta, model)
    Lr = -xi / l2 + 1j * b.k0 + lnf_r
    Lth = lnf_th + 0.0j
    Lrr = -1.0 / l2 + lnf_rr
    Lthth = lnf_thth + 0.0j
    if model.mode == "bragg":
        g0, g_r, g_th, g_rr, g_rth, g_thth = _bragg_bracket2(r, theta, model)
        Lr = Lr + g_r / g0
        Lth = Lth + g_th / g0
        Lrr = Lrr + g_rr / g0 - (g_r / g0) ** 2
        Lthth = Lthth + g_thth / g0 - (g_th / g0) ** 2
    cot = np.cos(theta) / np.sin(theta)
    lam_out = (Lrr + 2.0 * Lr / r + (Lthth + cot * Lth) / r ** 2
               + Lr ** 2 + (Lth / r) ** 2)
    return lap + vout * lam_out


# ----------------------------------------------------------------------
# D >> l pulse profile integral
# ----------------------------------------------------------------------

def pulse_profile_I(xi: float, r: float, theta: float, D: float) -> float:
    """Radial pulse profile integral for the D >> l regime.

    I(xi) = int_{Rmin}^{Rmax} exp(-R^2/2D^2) /
            (sin(theta) sqrt(1 - ((R/2r) + (xi/R))^2 / sin^2(theta))) dR

    Returns 0 when the integration bracket is empty (xi > r sin^2(theta)/2).
    The inverse-square-root endpoint singularities are removed by the
    substitution R = R_end +/- u^2.
    """
    if not (0.0 < theta < math.pi):
        raise ValueError("theta must lie in (0, pi)")
    if D <= 0 or r <= 0:
        raise ValueError("r and D must be positive")
    s = math.sin(theta)
    disc = s * s - 2.0 * xi / r
    if disc <= 0.0:
        return 0.0
    root = math.sqrt(disc)
    r_min = abs(r * (s - root))
    r_max = r * (s + root)
    if r_max <= r_min:
        return 0.0

    def integrand(R):
        q = (R / (2.0 * r) + xi / R) / s
        w = 1.0 - q * q
        if w <= 0.0:
            return 0.0
        return math.exp(-R * R / (2.0 * D * D)) / (s * math.sqrt(w))

    r_mid = 0.5 * (r_min + r_max)
    lo, _ = quad(lambda u: integrand(r_min + u * u) * 2.0 * u,
                 0.0, math.sqrt(r_mid - r_min), epsrel=1e-8, limit=200)
    hi, _ = quad(lambda u: integrand(r_max - u * u) * 2.0 * u,
                 0.0, math.sqrt(r_max - r_mid), epsrel=1e-8, limit=200)
    return lo + hi


# ----------------------------------------------------------------------
# semiclassical impact-parameter model (fm units)
# ----------------------------------------------------------------------

def _A_prefactor_sc(model: WaveModel, t):
    b = model.beam
    D2, l2 = _widths(model, t)
    return (b.D / math.sqrt(math.pi)) * (1.0 / D2) * (math.sqrt(b.l) / math.pi ** 0.25) * np.sqrt(b.l / l2)


def psi_semiclassical_xyz(x, y, z, t, model: WaveModel):
    """Impact-parameter wavefunction: value plus (d/dx, d/dy, d/dz).

    Ingoing Gaussian centered at (b, 0, v0 t) plus a spherical outgoing
    wavefront damped by exp(-b^2 / 2(D^2 + i hbar t/m)).  All lengths in
    fm, times in fs; t is measured so the free packet crosses z=0 at t=0.
    """
    b_ = model.beam
    bpar = model.impact_parameter
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.sqrt(x * x + y * y + z * z)
    D2, _ = _widths(model, t)
    A = _A_prefactor_sc(model, t)
    com_phase = -0.5 * model.hbar_over_m * b_.k0 ** 2 * t
    # ingoing
    arg_in = -((x - bpar) ** 2 + y ** 2 + (z - model.v0 * t) ** 2) / (2.0 * D2) \
        + 1j * (b_.k0 * z + com_phase)
    vin = A * np.exp(arg_in)
    gin = (
        vin * (-(x - bpar) / D2),
        vin * (-y / D2),
        vin * (-(z - model.v0 * t) / D2 + 1j * b_.k0),
    )
    # outgoing: -A C / (k0^2 (r - z)) * exp(-((r-v0 t)^2 + b^2)/2D2 + i k0 r)
    C = model.coupling
    pref = -A * C / (b_.k0 ** 2 * (r - z))
    arg_out = -((r - model.v0 * t) ** 2 + bpar ** 2) / (2.0 * D2) + 1j * (b_.k0 * r + com_phase)
    vout = pref * np.exp(arg_out)
    dlog_r = -(r - model.v0 * t) / D2 + 1j * b_.k0 - 1.0 / (r - z)
    # d/dxi = dlog_r * xi/r, with the extra +1/(r-z) on the z derivative
    gout = (
        vout * (dlog_r * (x / r)),
        vout * (dlog_r * (y / r)),
        vout * (dlog_r * (z / r) + 1.0 / (r - z)),
    )
    return vin + vout, gin[0] + gout[0], gin[1] + gout[1], gin[2] + gout[2]


def eval_psi_semiclassical(x: float, y: float, z: float, t: float,
                           model: WaveModel) -> ComplexField3:
    if math.sqrt(x * x + y * y + z * z) <= 0:
        raise ValueError("r must be positive")
    v, gx, gy, gz = psi_semiclassical_xyz(x, y, z, t, model)
    return ComplexField3(complex(v), complex(gx), complex(gy), complex(gz))
