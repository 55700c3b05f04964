"""Internal unit system and physical constants.

Conventions:
- lengths in nm (the semiclassical short-wavelength mode works in fm),
- times in fs,
- energies in eV,
- masses in electron masses.

With these units hbar = 0.6582119 eV fs and hbar/m_e = 0.11577 nm^2/fs,
so a 30 keV electron (k0 = 887.7 nm^-1) moves at
v0 = 0.11577 * 887.7 ~ 102.8 nm/fs ~ 1.03e8 m/s.
"""

# hbar [eV fs]
HBAR = 0.6582119

# hbar / m_e [nm^2 / fs]
HBAR_OVER_ME = 0.11577

# hbar^2 / m_e [eV nm^2]
HBAR2_OVER_ME = HBAR * HBAR_OVER_ME

# Coulomb constant q_e^2 / (4 pi eps0) [eV nm]
COULOMB_EVNM = 1.4399645

# fm-based equivalents for the semiclassical (Rutherford) mode.
NM_TO_FM = 1.0e6
HBAR_OVER_ME_FM2 = HBAR_OVER_ME * NM_TO_FM**2   # fm^2 / fs
HBAR2_OVER_ME_FM = HBAR * HBAR_OVER_ME_FM2      # eV fm^2
COULOMB_EVFM = COULOMB_EVNM * NM_TO_FM          # eV fm


def coulomb_coupling(mass: float, z1: int, z: int, fm_units: bool = False) -> float:
    """Signed coupling C = m Z1 Z q_e^2 / (4 pi eps0 hbar^2).

    Units: nm^-1 (or fm^-1 when ``fm_units``). ``mass`` in electron masses.
    """
    if fm_units:
        return mass * z1 * z * COULOMB_EVFM / HBAR2_OVER_ME_FM
    return mass * z1 * z * COULOMB_EVNM / HBAR2_OVER_ME
