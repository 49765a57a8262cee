"""Comparison of fitted and baseline models."""
