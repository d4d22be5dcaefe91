"""Numerical laboratory for Galerkin SPDEs: flows, Malliavin matrices, brackets and controls."""

__version__ = "0.1.0"
