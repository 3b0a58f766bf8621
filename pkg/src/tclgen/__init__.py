"""Perturbative time-convolutionless generators from recursive generalized cumulants."""

__version__ = "0.1.0"
