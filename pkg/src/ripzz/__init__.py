"""Simulation and pulse optimisation for long-range resonator-induced-phase CZ gates."""

__version__ = "0.1.0"
