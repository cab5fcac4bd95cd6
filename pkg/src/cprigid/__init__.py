"""Verification engine for the rigidity of ``CP^{2m-1}`` and ``CP^{2m} × M₂``
as Ricci shrinkers: exact rational-function calculus on the invariant
function space, chart tensor calculus on Fubini-Study, the deformation
operator on a finite tensor basis, variational formulas and the third-order
obstruction, with finite-difference and Monte Carlo oracles."""

__version__ = "0.1.0"
