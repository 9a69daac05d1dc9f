"""Rovibrational levels of three-identical-fermion molecular ions in
hyperspherical coordinates, and Rydberg levels of the corresponding neutral
molecule via multichannel quantum-defect theory.

Subpackages by concern:

- ``geom``       coordinate systems and conversions
- ``angular``    Clebsch-Gordan / Wigner-D algebra
- ``ionbasis``   symmetry-adapted rovibrational basis functions
- ``pes``        potential-surface ingestion and validation
- ``ionsolver``  adiabatic hyperangular solver + slow-variable-discretization
- ``qdefect``    body-frame quantum-defect surfaces (Jahn-Teller form)
- ``longrange``  multipole-potential reaction matrices for high-l electrons
- ``frametrans`` rovibrational frame transformation (body -> lab channels)
- ``mqdtsolve``  determinantal bound-level finder
- ``harness``    CLI, configuration, bundled data, comparison reports
"""

__version__ = "0.1.0"
