"""Exchange splitting of H2+ from symmetry-adapted perturbation theory.

Matrix elements, perturbation expansions and the volume and surface
formulas for J run in arbitrary precision on gmpy2 reals.
"""

__version__ = "0.1.0"
