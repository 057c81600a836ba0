"""Discontinuous-Galerkin solver and a posteriori indicators for
viscosity-capillarity elastodynamics in one space dimension."""

__version__ = "0.1.0"
