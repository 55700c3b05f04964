import numpy as np
import pytest

from bohmdiff.trajectories import GridSpec, run_swarm
from bohmdiff.wavefield import BeamSpec, TargetSpec, WaveModel


@pytest.fixture(scope="session")
def beam():
    return BeamSpec(k0=887.7, l=10000.0, D=1000.0, l0=30000.0, Z1=-1, mass=1.0)


@pytest.fixture(scope="session")
def target():
    return TargetSpec(Z=79, a=0.257, d=420.0)


@pytest.fixture(scope="session")
def model_diffuse(beam, target):
    return WaveModel(beam=beam, target=target, mode="diffuse")


@pytest.fixture(scope="session")
def model_bragg(beam, target):
    return WaveModel(beam=beam, target=target, mode="bragg")


@pytest.fixture(scope="session")
def model_free(beam):
    return WaveModel(beam=beam, mode="free")


@pytest.fixture(scope="session")
def small_ensemble(model_diffuse):
    """A coarse swarm shared by distribution unit tests (final state only
    matters; 15 x 15 keeps it quick)."""
    grid = GridSpec.default_for(model_diffuse)
    grid = GridSpec(z_min=grid.z_min, z_max=grid.z_max,
                    R_min=grid.R_min, R_max=grid.R_max, n_z=15, n_R=15)
    t_end = 2.0 * model_diffuse.beam.l0 / model_diffuse.v0
    return run_swarm(grid, 0.0, t_end, model_diffuse, n_samples=5)


def rng(seed=0):
    return np.random.default_rng(seed)
