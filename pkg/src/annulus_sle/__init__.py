"""Chordal SLE(8/3) in the annulus: survival probability F(a, x) by PDE,
Feynman-Kac Monte Carlo, direct trace sampling and conformal brackets."""

__version__ = "0.1.0"
