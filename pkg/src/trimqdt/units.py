"""Physical constants and unit conversions.

All internal computations use Hartree atomic units (energies in hartree,
lengths in bohr, masses in electron masses).  Conversion to wavenumbers
happens only at I/O boundaries.
"""

# CODATA 2018
HARTREE_TO_INVCM = 219474.6313632      # cm^-1 per hartree
AMU_TO_EMASS = 1822.888486209          # electron masses per unified amu

# Atomic hydrogen mass (CODATA atomic mass of 1H), in electron masses.
MASS_H_AMU = 1.00782503207
MASS_H = MASS_H_AMU * AMU_TO_EMASS


def hartree_to_cm(e_hartree):
    return e_hartree * HARTREE_TO_INVCM


def cm_to_hartree(e_cm):
    return e_cm / HARTREE_TO_INVCM
