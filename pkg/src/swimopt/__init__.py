"""Spline-parametrized optimal control of model microswimmers with
trust-region constrained Bayesian optimization."""

__version__ = "0.1.0"
