"""Empirical-process diameters under bounded exponential-moment tails.

Subpackages cover: seeded isotropic ensembles, empirical Orlicz norms,
sparse block nets, chaining-complexity estimates, coordinate-restricted
diameters, peeling/decomposition of sample clouds, deviation bounds for
quadratic empirical processes, and geometric applications (random operator
norms, kernel diameters, width shrinkage).
"""

__version__ = "0.1.0"
