"""Measurement-side quantities: Bragg-angle tables, angular and arrival
distributions from trajectory ensembles, and time-of-flight differences
under three rival time-observable formalisms (pilot-wave mean flight
times, a semiclassical sum-over-histories estimate, and the Kijowski
arrival-time density).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .constants import COULOMB_EVNM, HBAR, HBAR_OVER_ME
from .errors import InsufficientStatistics
from .trajectories import Ensemble
from .wavefield import WaveModel

# q_e^2/(4 pi eps0 m_e) [nm^3/fs^2]
COULOMB_PER_ME = COULOMB_EVNM * HBAR_OVER_ME / HBAR


# ----------------------------------------------------------------------
# Bragg angles and angular distribution
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BraggTable:
    k0: float
    a: float
    entries: tuple  # of (q, theta_q [rad])

    def thetas(self) -> np.ndarray:
        return np.array([th for _, th in self.entries])


def bragg_angles(k0: float, a: float) -> BraggTable:
    """All coherent-addition angles sin^2(theta_q/2) = q pi/(k0 a)."""
    entries = []
    q = 1
    while q * math.pi / (k0 * a) <= 1.0:
        entries.append((q, 2.0 * math.asin(math.sqrt(q * math.pi / (k0 * a)))))
        q += 1
    return BraggTable(k0=k0, a=a, entries=tuple(entries))


@dataclass(frozen=True)
class AngularHistogram:
    edges: np.ndarray  # (nbins+1,)
    weights: np.ndarray  # (nbins,), unit sum over included trajectories

    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def peak_bins(self) -> np.ndarray:
        """Indices of strict local maxima of the histogram."""
        w = self.weights
        idx = []
        for i in range(1, w.size - 1):
            if w[i] > w[i - 1] and w[i] >= w[i + 1] and w[i] > 0:
                idx.append(i)
        return np.array(idx, dtype=int)


def angular_distribution(ensemble: Ensemble, bins) -> AngularHistogram:
    """Weighted histogram of final scattering angles.

    bins: integer count or explicit edge array over theta.
    """
    ok = ~ensemble.failed
    th = ensemble.final_angles()[ok]
    w = ensemble.weights[ok]
    hist, edges = np.histogram(th, bins=bins, weights=w)
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return AngularHistogram(edges=edges, weights=hist)


def angular_distribution_transported(ensemble: Ensemble, edges,
                                     n_sub: int = 12) -> AngularHistogram:
    """Angular histogram of the transported initial measure.

    Each grid cell gets a bilinear fit of the final angle over its four
    corners, and the cell's initial measure |psi_in|^2 2 pi R0 dz dR is
    spread over an n_sub x n_sub subgrid of the fitted map.  This removes
    the grid-aliasing sawtooth of the raw per-member histogram (one cell
    typically spans several bins of final angle) while describing the
    same trajectory transport.  Cells with a failed corner are skipped.
    """
    grid = ensemble.grid
    nz, nR = grid.n_z, grid.n_R
    if nz < 2 or nR < 2:
        raise ValueError("transported histogram needs a 2-d grid")
    edges = np.asarray(edges, dtype=float)
    thf = np.arctan2(ensemble.paths[:, -1, 1],
                     ensemble.paths[:, -1, 0]).reshape(nz, nR)
    okc = (~ensemble.failed).reshape(nz, nR)
    cell_ok = okc[:-1, :-1] & okc[1:, :-1] & okc[:-1, 1:] & okc[1:, 1:]
    z0g = ensemble.z0.reshape(nz, nR)
    R0g = ensemble.R0.reshape(nz, nR)
    dz = z0g[1, 0] - z0g[0, 0]
    dR = R0g[0, 1] - R0g[0, 0]
    T00, T10 = thf[:-1, :-1], thf[1:, :-1]
    T01, T11 = thf[:-1, 1:], thf[1:, 1:]
    u = (np.arange(n_sub) + 0.5) / n_sub
    hist = np.zeros(edges.size - 1)
    # no model handle on the ensemble: reconstruct the initial measure the
    # same way run_swarm built the weights, from the stored weight field
    w_cell = ensemble.weights.reshape(nz, nR)
    for iu in range(n_sub):
        for iv in range(n_sub):
            a, b = u[iu], u[iv]
            th_s = ((1 - a) * (1 - b) * T00 + a * (1 - b) * T10
                    + (1 - a) * b * T01 + a * b * T11)
            # bilinear share of the corner weights: integrates the same
            # measure the swarm carries, cell by cell
            m = ((1 - a) * (1 - b) * w_cell[:-1, :-1]
                 + a * (1 - b) * w_cell[1:, :-1]
                 + (1 - a) * b * w_cell[:-1, 1:]
                 + a * b * w_cell[1:, 1:]) / (n_sub * n_sub)
            m = np.where(cell_ok, m, 0.0)
            h, _ = np.histogram(th_s.ravel(), bins=edges, weights=m.ravel())
            hist += h
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return AngularHistogram(edges=edges, weights=hist)


# ----------------------------------------------------------------------
# arrival-time distributions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalDistribution:
    kind: str  # analytic-longitudinal | analytic-transverse | empirical
    center: float  # t_bar [fs]
    dispersion: float  # sigma_t [fs]
    theta: float
    l_D: float
    histogram: tuple | None = None  # (t_centers, weights), unit sum
    floor_applied: bool = False


def arrival_distribution_analytic(theta: float, l_D: float,
                                  model: WaveModel) -> ArrivalDistribution:
    """Gaussian arrival-time law at a detector sphere of radius l_D.

    Center (l_D + l0)/v0 in both regimes.  Dispersion: l/(sqrt2 v0) when
    the packet is longitudinally dominated (l >= D), sin(theta) D/(sqrt2 v0)
    when transversally dominated; the longitudinal value is kept as a
    floor near theta -> 0 (flagged).
    """
    b = model.beam
    if l_D < 10.0 * max(b.l, b.D):
        # detector must sit in the far field for the Gaussian law
        pass
    center = (l_D + b.l0) / model.v0
    sigma_long = b.l / (math.sqrt(2.0) * model.v0)
    if b.l >= b.D:
        return ArrivalDistribution(kind="analytic-longitudinal", center=center,
                                   dispersion=sigma_long, theta=theta, l_D=l_D)
    sigma_tr = math.sin(theta) * b.D / (math.sqrt(2.0) * model.v0)
    if sigma_tr < sigma_long:
        return ArrivalDistribution(kind="analytic-transverse", center=center,
                                   dispersion=sigma_long, theta=theta, l_D=l_D,
                                   floor_applied=True)
    return ArrivalDistribution(kind="analytic-transverse", center=center,
                               dispersion=sigma_tr, theta=theta, l_D=l_D)


def sphere_event_name(r: float) -> str:
    return f"sphere:{r:g}"


def plane_event_name(z: float) -> str:
    return f"plane:{z:g}"


def arrival_distribution_empirical(ensemble: Ensemble, theta: float,
                                   dtheta: float, l_D: float,
                                   n_bins: int = 24) -> ArrivalDistribution:
    """Histogram of detector-sphere (r = l_D) crossing times in the cone
    theta +/- dtheta, weighted by the ensemble measure."""
    name = sphere_event_name(l_D)
    if name not in ensemble.events:
        raise ValueError(f"ensemble has no registered surface {name!r}")
    ev = ensemble.events[name]
    th_cross = np.arctan2(ev["R"], ev["z"])
    sel = (~np.isnan(ev["t"])) & (np.abs(th_cross - theta) <= dtheta) \
        & (~ensemble.failed)
    if int(np.count_nonzero(sel)) < 30:
        raise InsufficientStatistics(
            f"only {int(np.count_nonzero(sel))} trajectories in the cone")
    t = ev["t"][sel]
    w = ensemble.weights[sel]
    wsum = w.sum()
    center = float(np.sum(w * t) / wsum)
    var = float(np.sum(w * (t - center) ** 2) / wsum)
    sigma = math.sqrt(var)
    hist, edges = np.histogram(t, bins=n_bins, weights=w)
    hist = hist / hist.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ArrivalDistribution(kind="empirical", center=center,
                               dispersion=sigma, theta=theta, l_D=l_D,
                               histogram=(centers, hist))


# ----------------------------------------------------------------------
# time-of-flight: pilot-wave mean flight times
# ----------------------------------------------------------------------

def tof_constants(model: WaveModel) -> tuple[float, float]:
    """(C0, R0) entering the flight-time difference law.

    C0 = 2 k0^2 / (|C| rho^{1/2} d^{1/2}) with rho = a^-3;
    R0 = sqrt(2 ln C0) + 1/(1 + sqrt(2 ln C0)).
    """
    b, tg = model.beam, model.target
    c0 = 2.0 * b.k0 ** 2 * tg.a / (abs(model.coupling) * math.sqrt(tg.d / tg.a))
    s = math.sqrt(2.0 * math.log(c0))
    return c0, s + 1.0 / (1.0 + s)


def tof_difference_bohm(theta1: float, theta2: float, model: WaveModel) -> float:
    """Mean flight-time difference T(theta1) - T(theta2) [fs]:
    (D R0 / v0)(tan(theta2/2) - tan(theta1/2))."""
    if not (0.0 < theta1 < math.pi and 0.0 < theta2 < math.pi):
        raise ValueError("angles must lie in (0, pi)")
    _, r0 = tof_constants(model)
    return (model.beam.D * r0 / model.v0) * (
        math.tan(theta2 / 2.0) - math.tan(theta1 / 2.0))


def tof_mean(theta: float, model: WaveModel, s1_z: float | None = None) -> float:
    """Mean S1 -> S2 flight time at angle theta [fs].

    Piecewise-straight construction averaged over the initial-condition
    locus with the ingoing measure 2 pi R |psi_in|^2: a member starting
    at (z_L(R), R) runs horizontally to the separator ray, then radially
    to the S2 sphere r = l0; S1 is the plane z = s1_z (default -l0).
    """
    from .trajectories import initial_locus

    b = model.beam
    if s1_z is None:
        s1_z = -b.l0
    locus = initial_locus(theta, model)
    tanh2 = math.tan(theta / 2.0)

    def weight(R):
        zL = -b.l0 + (R - locus.R_c) / locus.slope
        return 2.0 * math.pi * R * math.exp(
            -R * R / b.D ** 2 - (zL + b.l0) ** 2 / b.l ** 2)

    def t_of(R):
        # horizontal from the S1 plane to z_s = R/tan(theta), then radial
        # from r = R/sin(theta) to the S2 sphere r = l0
        return (R / math.tan(theta) - s1_z + b.l0 - R / math.sin(theta)) / model.v0

    lo, hi = 1.0e-3, locus.R_c + 6.0 * b.D
    num, _ = quad(lambda R: weight(R) * t_of(R), lo, hi, epsrel=1e-9, limit=200)
    den, _ = quad(weight, lo, hi, epsrel=1e-9, limit=200)
    return num / den


def tof_empirical_curve(ensemble: Ensemble, thetas, model: WaveModel,
                        s1_z: float, sphere_r: float,
                        dtheta: float = math.radians(5.0)):
    """Swarm-measured mean S1 -> S2 flight times per angle [fs].

    The S1 plane crossing is computed from the straight pre-scattering
    segment, t_S1 = (s1_z - z0)/v0 (negative for members released past
    S1); the S2 time comes from the registered sphere crossing.  Returns
    (thetas, mean_T) with nan where the cone is unpopulated.
    """
    name = sphere_event_name(sphere_r)
    if name not in ensemble.events:
        raise ValueError(f"ensemble has no registered surface {name!r}")
    ev = ensemble.events[name]
    t_s1 = (s1_z - ensemble.z0) / model.v0
    tof = ev["t"] - t_s1
    th_fin = ensemble.final_angles()
    out = []
    for th in np.atleast_1d(thetas):
        sel = (~np.isnan(ev["t"])) & (np.abs(th_fin - th) <= dtheta) \
            & (~ensemble.failed)
        if not np.any(sel):
            out.append(math.nan)
            continue
        w = ensemble.weights[sel]
        out.append(float(np.sum(w * tof[sel]) / np.sum(w)))
    return np.atleast_1d(thetas), np.array(out)


# ----------------------------------------------------------------------
# sum-over-histories estimate
# ----------------------------------------------------------------------

def tof_difference_histories(theta1: float, theta2: float, beam, Z: int,
                             Z1: int | None = None,
                             signed: bool = False) -> float:
    """Semiclassical path-sum flight-time difference T(theta1)-T(theta2) [fs].

    |Z Z1| q_e^2/(2 pi eps0 m v0^3) * ln(sin(theta2/2)/sin(theta1/2));
    signed=True uses -Z Z1 in place of |Z Z1| (identical for attractive
    pairs).
    """
    if not (0.0 < theta1 < math.pi and 0.0 < theta2 < math.pi):
        raise ValueError("angles must lie in (0, pi)")
    z1 = Z1 if Z1 is not None else beam.Z1
    charge = -float(Z * z1) if signed else abs(float(Z * z1))
    v0 = beam.v0
    k = 2.0 * COULOMB_PER_ME / (beam.mass * v0 ** 3)
    return charge * k * math.log(
        math.sin(theta2 / 2.0) / math.sin(theta1 / 2.0))


# ----------------------------------------------------------------------
# Kijowski arrival-time density
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumPacket:
    """1D Gaussian momentum-space packet c(k) ~ exp(-(k-k0)^2/2 sigma^2 - i k z0)."""

    k0: float
    sigma: float
    z0: float = 0.0
    mass: float = 1.0

    @property
    def hbar_over_m(self) -> float:
        return HBAR_OVER_ME / self.mass


_GL_NODES = None


def _gl(n=400):
    global _GL_NODES
    if _GL_NODES is None or _GL_NODES[0].size != n:
        _GL_NODES = np.polynomial.legendre.leggauss(n)
    return _GL_NODES


def kijowski_density(T, z: float, packet: MomentumPacket,
                     n_nodes: int = 400) -> np.ndarray:
    """Arrival-time probability density Pi(T, z) [1/fs].

    Quadrature of the sqrt(hbar k/m)-weighted momentum integral over the
    positive branch (the k < 0 branch is exponentially negligible for
    narrow packets); includes the 1/sqrt(2 pi) plane-wave normalization
    so a fully transmitted packet integrates to 1 over T.  Raise n_nodes
    for far detectors (quadratic phase span ~ 64 z sigma^2/k0 rad needs
    a few nodes per radian).
    """
    if packet.k0 <= 8.0 * packet.sigma:
        raise ValueError("narrow-packet regime requires k0 >> sigma")
    T = np.atleast_1d(np.asarray(T, dtype=float))
    x, wgt = _gl(n_nodes)
    k_lo = packet.k0 - 8.0 * packet.sigma
    k_hi = packet.k0 + 8.0 * packet.sigma
    k = 0.5 * (k_hi - k_lo) * x + 0.5 * (k_hi + k_lo)
    jac = 0.5 * (k_hi - k_lo)
    c = (math.pi * packet.sigma ** 2) ** -0.25 * np.exp(
        -(k - packet.k0) ** 2 / (2.0 * packet.sigma ** 2))
    hom = packet.hbar_over_m
    amp = np.sqrt(hom * k) * c
    phase = (np.outer(-0.5 * hom * T, k ** 2)
             + (k * (z - packet.z0))[None, :])
    integral = jac * np.einsum("k,tk->t", wgt * amp, np.exp(1j * phase))
    out = np.abs(integral / math.sqrt(2.0 * math.pi)) ** 2
    return out if out.size > 1 else out


def kijowski_flux(T, z: float, packet: MomentumPacket,
                  n_nodes: int = 400) -> np.ndarray:
    """Reference flux (hbar k0/m)|psi(z, T)|^2 for the same 1D packet."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    x, wgt = _gl(n_nodes)
    k_lo = packet.k0 - 8.0 * packet.sigma
    k_hi = packet.k0 + 8.0 * packet.sigma
    k = 0.5 * (k_hi - k_lo) * x + 0.5 * (k_hi + k_lo)
    jac = 0.5 * (k_hi - k_lo)
    c = (math.pi * packet.sigma ** 2) ** -0.25 * np.exp(
        -(k - packet.k0) ** 2 / (2.0 * packet.sigma ** 2))
    hom = packet.hbar_over_m
    phase = (np.outer(-0.5 * hom * T, k ** 2) + (k * (z - packet.z0))[None, :])
    psi = jac * np.einsum("k,tk->t", wgt * c, np.exp(1j * phase)) / math.sqrt(2.0 * math.pi)
    return hom * packet.k0 * np.abs(psi) ** 2


def tof_difference_kijowski(theta1: float | None = None,
                            theta2: float | None = None) -> float:
    """Flight-time difference in the arrival-operator formalism.

    Identically zero: the mean arrival times to S1 and S2 are set by the
    radial packet motion alone, so <t2> - <t1> carries no angle
    dependence.
    """
    return 0.0


# ----------------------------------------------------------------------
# combined report
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TofReport:
    theta1: float
    theta2: float
    deltaT_bohm: float
    deltaT_histories: float
    deltaT_kijowski: float
    params: dict = field(default_factory=dict)


def tof_report(theta1: float, theta2: float, model: WaveModel) -> TofReport:
    c0, r0 = tof_constants(model)
    return TofReport(
        theta1=theta1, theta2=theta2,
        deltaT_bohm=tof_difference_bohm(theta1, theta2, model),
        deltaT_histories=tof_difference_histories(
            theta1, theta2, model.beam, model.target.Z),
        deltaT_kijowski=tof_difference_kijowski(theta1, theta2),
        params={"C0": c0, "R0": r0, "v0": model.v0, "D": model.beam.D},
    )
