"""Explicit Runge-Kutta schemes for backward stochastic differential equations.

Subpackages cover the extended Butcher-tree calculus (:mod:`rkbsde.trees`),
order conditions (:mod:`rkbsde.order_conditions`), named tableaux
(:mod:`rkbsde.tableaux`), numerical coefficient search
(:mod:`rkbsde.coeff_search`), Gauss–Hermite quadrature and grid
interpolation (:mod:`rkbsde.quadrature`), the one-dimensional backward
solver (:mod:`rkbsde.solver`), benchmark problems and convergence studies
(:mod:`rkbsde.experiments`), and the command-line interface
(:mod:`rkbsde.cli`).
"""

__version__ = "0.1.0"
