"""bohmdiff: pilot-wave (de Broglie-Bohm) trajectories of charged-particle
diffraction by thin crystalline targets.

Modules
-------
wavefield     closed-form ingoing/outgoing wavefunction models
flowgeom      velocity field, separator, nodal points, vortex analysis
trajectories  batched adaptive integration, swarms, loci, transport
observables   angular/arrival/flight-time distributions, Bragg angles
rutherford    short-wavelength impact-parameter driver
scatcli       scenario files, presets, CSV emission, command line
"""

import os as _os

# BOHMDIFF_THREADS caps the numeric worker count; it must reach the
# BLAS/OpenMP pools before numpy is first imported, hence here.
_threads = _os.environ.get("BOHMDIFF_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

__version__ = "0.1.0"

from . import constants, errors  # noqa: E402
from .wavefield import (BeamSpec, CylPoint, Lattice, TargetSpec,  # noqa: E402
                        WaveModel, build_lattice)
from .flowgeom import (SeparatorCurve, VortexComplex, nodal_points,  # noqa: E402
                       separator_curve, velocity, vortex_analysis)
from .trajectories import (Ensemble, GridSpec, LocusLine, Surface,  # noqa: E402
                           Trajectory, initial_locus, integrate_trajectory,
                           radial_distribution, run_swarm)
from .observables import (AngularHistogram, ArrivalDistribution,  # noqa: E402
                          BraggTable, TofReport, angular_distribution,
                          angular_distribution_transported,
                          arrival_distribution_analytic,
                          arrival_distribution_empirical, bragg_angles,
                          tof_report)
from .rutherford import (RutherfordResult, SemiclassicalSpec,  # noqa: E402
                         deflection_vs_b, pairwise_crossings, run_rutherford)
from .scatcli import (RunManifest, Scenario, dump_scenario,  # noqa: E402
                      load_scenario, run_scenario)

__all__ = [
    "constants", "errors", "__version__",
    "BeamSpec", "TargetSpec", "Lattice", "CylPoint", "WaveModel",
    "build_lattice",
    "SeparatorCurve", "VortexComplex", "nodal_points", "separator_curve",
    "velocity", "vortex_analysis",
    "Ensemble", "GridSpec", "LocusLine", "Surface", "Trajectory",
    "initial_locus", "integrate_trajectory", "radial_distribution",
    "run_swarm",
    "AngularHistogram", "ArrivalDistribution", "BraggTable", "TofReport",
    "angular_distribution", "angular_distribution_transported",
    "arrival_distribution_analytic", "arrival_distribution_empirical",
    "bragg_angles", "tof_report",
    "RutherfordResult", "SemiclassicalSpec", "deflection_vs_b",
    "pairwise_crossings", "run_rutherford",
    "RunManifest", "Scenario", "dump_scenario", "load_scenario",
    "run_scenario",
]
