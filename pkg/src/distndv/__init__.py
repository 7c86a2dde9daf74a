"""Distributed sampling-based distinct-value (NDV) estimation with mergeable sketches."""

__version__ = "0.1.0"
