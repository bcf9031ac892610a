"""Bayesian fixed-budget best-arm identification: policies, bounds and a Monte Carlo harness."""

__version__ = "0.1.0"
