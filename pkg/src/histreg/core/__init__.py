"""Numeric core: histogram values, distances, the constrained solver and the DSD model."""
