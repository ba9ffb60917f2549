"""Stochastic pseudo-Fock hierarchy for a two-level system in a bosonic bath."""

__version__ = "0.1.0"
