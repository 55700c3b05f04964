"""Flow-geometry unit tests: velocity wiring, separator roots, nodal
points and the vortex structure around them."""

import math

import numpy as np
import pytest

from bohmdiff.errors import NoRoot
from bohmdiff.flowgeom import (circulation, log_ingoing_envelope,
                               nodal_points, nodal_quantum_number,
                               separator_curve, separator_radius, velocity,
                               velocity_zR, vortex_analysis,
                               vortex_size_estimate, quantum_potential)
from bohmdiff.wavefield import (CylPoint, WaveModel, psi_in_zR, psi_total_zR)
from bohmdiff.constants import HBAR, HBAR_OVER_ME


def test_free_packet_moves_at_beam_speed(model_free):
    """Without spreading terms the free flow is uniform: v = (v0, 0)."""
    rng = np.random.default_rng(0)
    z = -model_free.beam.l0 + 2.0e4 * rng.uniform(-1, 1, 20)
    R = 1.0e3 * rng.uniform(0.01, 3, 20)
    vz, vR = velocity_zR(z, R, 37.0, model_free)
    assert np.allclose(vz, model_free.v0, rtol=1e-12)
    assert np.allclose(vR, 0.0, atol=1e-12)


def test_velocity_matches_log_gradient(model_diffuse):
    t = 1.1 * model_diffuse.beam.l0 / model_diffuse.v0
    p = CylPoint(z=5000.0, R=40000.0)
    vz, vR = velocity(p, t, model_diffuse)
    v, gz, gR = psi_total_zR(p.z, p.R, t, model_diffuse)
    hom = model_diffuse.hbar_over_m
    assert vz == pytest.approx(hom * (gz / v).imag, rel=1e-12)
    assert vR == pytest.approx(hom * (gR / v).imag, rel=1e-12)


def test_quantum_potential_free_gaussian(beam):
    """For the free packet |psi| carries no carrier, so a plain finite
    difference of the modulus is an independent check of
    Q = -(hbar^2/2m) lap|psi| / |psi|."""
    model = WaveModel(beam=beam, mode="free", exact_spreading=True)
    t = 60.0
    p = CylPoint(z=-beam.l0 + model.v0 * t + 4000.0, R=700.0)

    def mod(z, R):
        v, _, _ = psi_in_zR(z, R, t, model)
        return abs(complex(v))

    h = 0.05
    lap = ((mod(p.z + h, p.R) - 2 * mod(p.z, p.R) + mod(p.z - h, p.R)) / h ** 2
           + (mod(p.z, p.R + h) - 2 * mod(p.z, p.R) + mod(p.z, p.R - h)) / h ** 2
           + (mod(p.z, p.R + h) - mod(p.z, p.R - h)) / (2 * h * p.R))
    q_fd = -0.5 * HBAR * HBAR_OVER_ME * lap / mod(p.z, p.R)
    assert quantum_potential(p, t, model) == pytest.approx(q_fd, rel=1e-5)


# ----------------------------------------------------------------------
# separator
# ----------------------------------------------------------------------

def test_separator_balances_amplitudes(model_diffuse):
    from bohmdiff.wavefield import psi_in_zR, psi_out_zR
    t = model_diffuse.beam.l0 / model_diffuse.v0
    for th in (0.4, 0.9, 1.5, 2.2):
        r_s = separator_radius(th, t, model_diffuse)
        z, R = r_s * math.cos(th), r_s * math.sin(th)
        vi, _, _ = psi_in_zR(z, R, t, model_diffuse)
        vo, _, _ = psi_out_zR(z, R, t, model_diffuse)
        assert abs(vi) == pytest.approx(abs(vo), rel=1e-6)


def test_separator_is_innermost_crossing(model_diffuse):
    from bohmdiff.wavefield import psi_in_zR, psi_out_zR
    t = model_diffuse.beam.l0 / model_diffuse.v0
    th = 0.9
    r_s = separator_radius(th, t, model_diffuse)
    rs = np.linspace(1.0, r_s * 0.999, 4000)
    z, R = rs * math.cos(th), rs * math.sin(th)
    vi, _, _ = psi_in_zR(z, R, t, model_diffuse)
    vo, _, _ = psi_out_zR(z, R, t, model_diffuse)
    gap = np.log(np.abs(vi)) - np.log(np.abs(vo))
    assert np.all(np.sign(gap) == np.sign(gap[0]))


def test_separator_no_root_cases(model_free, model_diffuse):
    with pytest.raises(NoRoot):
        separator_radius(0.9, 100.0, model_free)
    with pytest.raises(ValueError):
        separator_radius(0.0, 100.0, model_diffuse)


def test_separator_topology_open_at_early_times(model_diffuse):
    t = 0.3 * model_diffuse.beam.l0 / model_diffuse.v0
    grid = np.linspace(0.01, math.pi - 0.01, 64)
    curve = separator_curve(t, model_diffuse, theta_grid=grid)
    assert curve.topology == "open-pair"
    assert curve.samples.shape[1] == 2
    # samples sorted by angle
    assert np.all(np.diff(curve.samples[:, 0]) > 0)


# ----------------------------------------------------------------------
# nodal points and vortices
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def found_nodes(model_diffuse):
    t = model_diffuse.beam.l0 / model_diffuse.v0
    th_c = math.atan2(1934.42, 137.178)
    window = ((th_c - 1.2e-5, th_c + 1.2e-5), (1900.0, 1980.0))
    return t, nodal_points(t, model_diffuse, window)


def test_nodal_points_are_zeros_of_the_field(model_diffuse, found_nodes):
    t, pts = found_nodes
    assert len(pts) >= 2
    for p in pts:
        v, _, _ = psi_total_zR(p.z, p.R, t, model_diffuse)
        vi, _, _ = psi_in_zR(p.z, p.R, t, model_diffuse)
        assert abs(complex(v)) < 1.0e-6 * abs(complex(vi))


def test_nodal_quantum_numbers_are_odd_integers(model_diffuse, found_nodes):
    # attractive projectile (Z1 < 0): nodes at odd multiples of pi
    _, pts = found_nodes
    for p in pts:
        m = nodal_quantum_number(p, model_diffuse)
        nearest_odd = 2 * round((m - 1) / 2) + 1
        assert m == pytest.approx(nearest_odd, abs=1e-3)


def test_circulation_is_quantized(model_diffuse, found_nodes):
    t, pts = found_nodes
    c = circulation(pts[0], radius=2.0e-4, t=t, model=model_diffuse)
    quantum = 2.0 * math.pi * model_diffuse.hbar_over_m
    assert abs(c) == pytest.approx(quantum, rel=1e-6)


def test_vortex_complex_structure(model_diffuse, found_nodes):
    t, pts = found_nodes
    vc = vortex_analysis(pts[0], t, model_diffuse)
    lam_p, lam_m = vc.eigenvalues
    assert lam_p > 0 > lam_m
    est = vortex_size_estimate(model_diffuse)
    assert vc.R_X < 100.0 * est
    assert vc.R_X > 0.0
    assert vc.nodalClass in ("attractor", "center", "repellor")
    # the X-point sits right next to the node
    assert math.hypot(vc.xpoint.z - vc.nodal.z,
                      vc.xpoint.R - vc.nodal.R) == pytest.approx(vc.R_X)


def test_nodal_search_rejects_other_modes(model_bragg):
    with pytest.raises(ValueError):
        nodal_points(100.0, model_bragg, ((1.0, 1.1), (100.0, 200.0)))


def test_ingoing_envelope_decays_off_beam(model_diffuse):
    t = model_diffuse.beam.l0 / model_diffuse.v0
    near = log_ingoing_envelope(1000.0, 1.2, t, model_diffuse)
    far = log_ingoing_envelope(80000.0, 1.2, t, model_diffuse)
    assert far < near
