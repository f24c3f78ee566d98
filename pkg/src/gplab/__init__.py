"""Desk-scale numerics for the dilute Bose gas in the Gross-Pitaevskii regime.

Truncated momentum lattices and Fock spaces, the excitation map, generalized
Bogoliubov transformations, scattering-derived correlation coefficients and a
symbolic engine for nested commutators of modified creation/annihilation
operators.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
