"""Correlation-measurement quantum sensing: analytic statistics, shot-noise SNR
and seeded Monte-Carlo simulation of spin-qubit ensembles measuring AC fields."""

__version__ = "0.1.0"
