"""Desk-scale additive combinatorics over finite abelian groups.

Building blocks for experiments with corner-free sets: exact Bohr-set
machinery, Fourier/uniformity diagnostics, box norms, corner counting,
and a density-increment iteration driver.  Every nontrivial quantity is
backed by a brute-force oracle in the test suite.
"""

from corners_lab.errors import BudgetExhaustedError, ConstantsInfeasibleError, PreconditionError
from corners_lab.groups import Character, Element, GroupSpec, pairing, torus_norm

__all__ = [
    "BudgetExhaustedError",
    "Character",
    "ConstantsInfeasibleError",
    "Element",
    "GroupSpec",
    "PreconditionError",
    "pairing",
    "torus_norm",
]

__version__ = "0.1.0"
