"""Observable-layer unit tests: coherent-addition angles, angular
histograms, arrival-time laws and the three flight-time estimates."""

import math

import numpy as np
import pytest

from bohmdiff.constants import HBAR, HBAR_OVER_ME, COULOMB_EVNM
from bohmdiff.errors import InsufficientStatistics, RegimeViolation
from bohmdiff.observables import (AngularHistogram, MomentumPacket,
                                  angular_distribution,
                                  angular_distribution_transported,
                                  arrival_distribution_analytic,
                                  arrival_distribution_empirical,
                                  bragg_angles, kijowski_density,
                                  kijowski_flux, plane_event_name,
                                  sphere_event_name, tof_constants,
                                  tof_difference_bohm,
                                  tof_difference_histories,
                                  tof_difference_kijowski, tof_mean,
                                  tof_report)
from bohmdiff.trajectories import Ensemble, GridSpec, run_swarm
from bohmdiff.wavefield import BeamSpec, TargetSpec, WaveModel


# ----------------------------------------------------------------------
# coherent-addition angles
# ----------------------------------------------------------------------

def test_bragg_angles_reference_values():
    table = bragg_angles(887.7, 0.257)
    assert table.entries[0][1] == pytest.approx(0.2352, abs=5e-5)
    assert table.entries[1][1] == pytest.approx(0.3335, abs=5e-5)
    assert len(table.entries) == 72


def test_bragg_angles_satisfy_defining_identity():
    k0, a = 887.7, 0.257
    for q, th in bragg_angles(k0, a).entries:
        assert k0 * a * math.sin(th / 2.0) ** 2 == pytest.approx(
            q * math.pi, rel=1e-12)
    # thetas strictly increasing, all within (0, pi]
    ths = bragg_angles(k0, a).thetas()
    assert np.all(np.diff(ths) > 0)
    assert 0.0 < ths[0] and ths[-1] <= math.pi


# ----------------------------------------------------------------------
# angular histograms
# ----------------------------------------------------------------------

def test_peak_bins_strict_local_maxima():
    h = AngularHistogram(edges=np.linspace(0, 6, 7),
                         weights=np.array([0.0, 1.0, 0.0, 2.0, 2.0, 0.0]))
    assert list(h.peak_bins()) == [1, 3]
    assert np.allclose(h.centers(), [0.5, 1.5, 2.5, 3.5, 4.5, 5.5])


def test_angular_distribution_unit_sum(small_ensemble):
    h = angular_distribution(small_ensemble, 12)
    assert h.weights.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(h.weights >= 0.0)


def test_transported_distribution_unit_sum(small_ensemble):
    edges = np.linspace(0.0, math.pi, 25)
    h = angular_distribution_transported(small_ensemble, edges)
    assert h.weights.sum() == pytest.approx(1.0, rel=1e-9)
    assert np.all(h.weights >= 0.0)


def test_transported_distribution_needs_2d_grid(model_diffuse):
    b = model_diffuse.beam
    grid = GridSpec(z_min=-b.l0 - b.l, z_max=-b.l0 + b.l,
                    R_min=b.D / 10, R_max=b.D, n_z=1, n_R=3)
    ens = run_swarm(grid, 0.0, 1.0, model_diffuse, n_samples=2)
    with pytest.raises(ValueError):
        angular_distribution_transported(ens, np.linspace(0, 3, 10))


# ----------------------------------------------------------------------
# arrival-time laws
# ----------------------------------------------------------------------

def test_arrival_analytic_longitudinal(model_diffuse):
    b = model_diffuse.beam
    l_D = 2.0 * b.l0
    d = arrival_distribution_analytic(math.radians(54.0), l_D, model_diffuse)
    assert d.kind == "analytic-longitudinal"
    assert d.center == pytest.approx((l_D + b.l0) / model_diffuse.v0, rel=1e-12)
    assert d.dispersion == pytest.approx(b.l / (math.sqrt(2.0) * model_diffuse.v0),
                                         rel=1e-12)
    assert not d.floor_applied


def test_arrival_analytic_transverse_and_floor():
    beam = BeamSpec(k0=887.7, l=2000.0, D=8000.0, l0=30000.0, Z1=-1, mass=1.0)
    model = WaveModel(beam=beam, target=TargetSpec(Z=79, a=0.257, d=420.0),
                      mode="diffuse")
    wide = arrival_distribution_analytic(math.radians(90.0), 60000.0, model)
    assert wide.kind == "analytic-transverse"
    assert wide.dispersion == pytest.approx(
        beam.D / (math.sqrt(2.0) * model.v0), rel=1e-12)
    narrow = arrival_distribution_analytic(math.radians(1.0), 60000.0, model)
    assert narrow.floor_applied
    assert narrow.dispersion == pytest.approx(
        beam.l / (math.sqrt(2.0) * model.v0), rel=1e-12)


def test_event_names():
    assert sphere_event_name(60000.0) == "sphere:60000"
    assert plane_event_name(-30000.0) == "plane:-30000"


def _dummy_ensemble(n_hits):
    grid = GridSpec(z_min=-1.0, z_max=1.0, R_min=1.0, R_max=2.0, n_z=2, n_R=2)
    n = 4
    t = np.full(n, np.nan)
    t[:n_hits] = 100.0
    return Ensemble(grid=grid, z0=np.zeros(n), R0=np.ones(n),
                    weights=np.full(n, 0.25), coverage=1.0,
                    times=np.array([0.0, 1.0]),
                    paths=np.zeros((n, 2, 2)),
                    events={"sphere:10": {"t": t, "z": np.zeros(n),
                                          "R": np.zeros(n)}},
                    failed=np.zeros(n, dtype=bool))


def test_arrival_empirical_guards():
    ens = _dummy_ensemble(2)
    with pytest.raises(ValueError):
        arrival_distribution_empirical(ens, 0.5, 0.1, l_D=99.0)
    with pytest.raises(InsufficientStatistics):
        arrival_distribution_empirical(ens, 0.0, math.pi, l_D=10.0)


# ----------------------------------------------------------------------
# flight-time estimates
# ----------------------------------------------------------------------

def test_tof_constants_reference(model_diffuse):
    b, tg = model_diffuse.beam, model_diffuse.target
    # Coulomb strength in inverse-length units: |Z1 Z| e^2 m / hbar^2
    coupling = abs(b.Z1 * tg.Z) * COULOMB_EVNM * b.mass / (HBAR * HBAR_OVER_ME)
    c0 = 2.0 * b.k0 ** 2 * tg.a / (coupling * math.sqrt(tg.d / tg.a))
    s = math.sqrt(2.0 * math.log(c0))
    c0_got, r0_got = tof_constants(model_diffuse)
    assert c0_got == pytest.approx(c0, rel=1e-12)
    assert r0_got == pytest.approx(s + 1.0 / (1.0 + s), rel=1e-12)
    # frozen magnitudes for the standard beam
    assert c0_got == pytest.approx(6.712, abs=5e-3)
    assert r0_got == pytest.approx(2.290, abs=5e-3)


def test_tof_bohm_antisymmetric_and_positive_forward(model_diffuse):
    th1, th2 = math.radians(54.0), math.radians(150.0)
    d12 = tof_difference_bohm(th1, th2, model_diffuse)
    assert d12 == pytest.approx(-tof_difference_bohm(th2, th1, model_diffuse))
    assert tof_difference_bohm(th1, th1, model_diffuse) == 0.0
    # larger angle means the longer path around the scatterer
    assert d12 > 0.0
    with pytest.raises(ValueError):
        tof_difference_bohm(0.0, th2, model_diffuse)


def test_tof_histories_formula(beam):
    th1, th2 = math.radians(54.0), math.radians(150.0)
    got = tof_difference_histories(th1, th2, beam, Z=79)
    v0 = beam.v0
    k = 2.0 * COULOMB_EVNM * HBAR_OVER_ME / (HBAR * beam.mass * v0 ** 3)
    expect = 79.0 * k * math.log(math.sin(th2 / 2) / math.sin(th1 / 2))
    assert got == pytest.approx(expect, rel=1e-12)
    # attractive pair: signed estimate coincides with the magnitude
    assert tof_difference_histories(th1, th2, beam, Z=79, signed=True) == got
    # electron beam: the effect sits at the 1e-19 s scale (1e-4 fs)
    assert 1.0e-5 < got < 1.0e-3


def test_tof_mean_locus_average(model_diffuse):
    th = math.radians(54.0)
    t54 = tof_mean(th, model_diffuse)
    assert t54 > 0.0
    # mean flight time falls with angle, tracking T ~ const - tan(theta/2):
    # large-angle members start closer to the axis and meet the separator
    # sooner
    assert tof_mean(math.radians(90.0), model_diffuse) < t54
    with pytest.raises(RegimeViolation):
        tof_mean(math.radians(150.0), model_diffuse)


def test_tof_kijowski_is_identically_zero():
    assert tof_difference_kijowski() == 0.0
    assert tof_difference_kijowski(0.3, 2.0) == 0.0


def test_tof_report_wires_all_three(model_diffuse):
    th1, th2 = math.radians(54.0), math.radians(134.0)
    r = tof_report(th1, th2, model_diffuse)
    assert r.deltaT_bohm == pytest.approx(
        tof_difference_bohm(th1, th2, model_diffuse))
    assert r.deltaT_histories == pytest.approx(
        tof_difference_histories(th1, th2, model_diffuse.beam, 79))
    assert r.deltaT_kijowski == 0.0
    assert set(r.params) == {"C0", "R0", "v0", "D"}


# ----------------------------------------------------------------------
# arrival-operator density
# ----------------------------------------------------------------------

def test_kijowski_density_normalized_nonnegative():
    packet = MomentumPacket(k0=887.7, sigma=0.5)
    z = 5000.0
    v = HBAR_OVER_ME * packet.k0
    tc = z / v
    T = np.linspace(tc - 0.3, tc + 0.3, 6001)
    pi = kijowski_density(T, z, packet)
    assert np.all(pi >= 0.0)
    assert np.trapezoid(pi, T) == pytest.approx(1.0, rel=1e-6)


def test_kijowski_density_matches_flux_for_narrow_packet():
    packet = MomentumPacket(k0=887.7, sigma=887.7e-4)
    z = 5000.0
    v = HBAR_OVER_ME * packet.k0
    tc = z / v
    T = np.linspace(tc - 1.0, tc + 1.0, 801)
    pi = kijowski_density(T, z, packet)
    j = kijowski_flux(T, z, packet)
    assert np.max(np.abs(pi - j)) < 1.0e-3 * np.max(j)


def test_kijowski_rejects_wide_packet():
    with pytest.raises(ValueError):
        kijowski_density(1.0, 10.0, MomentumPacket(k0=8.0, sigma=1.0))
