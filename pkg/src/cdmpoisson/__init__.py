"""Poisson-process model of CDM arrivals with an empirical-Bayes Gamma prior."""

__version__ = "0.1.0"
