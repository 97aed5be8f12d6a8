"""Bayesian spatial regression with spatially structured missing covariates."""

__version__ = "0.1.0"
