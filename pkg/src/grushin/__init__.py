"""Spectral laboratory for the critical Grushin-type Laplacian on a collar.

Subpackages by layer: :mod:`numerics1d` (grids, tridiagonal eigensolvers),
:mod:`grushin1d` (the ``P_mu`` family), :mod:`asymptotics` (constants and
predictors), :mod:`cylinder` (mode sums and experiments) and :mod:`cli`.
"""

__version__ = "0.1.0"
