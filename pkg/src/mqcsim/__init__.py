"""Exact simulator of multiple-quantum coherence growth, localization and
dynamic equilibrium in dipolar-coupled spin-1/2 networks."""

__version__ = "0.1.0"
