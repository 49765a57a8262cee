"""Histreg: linear regression for histogram-valued variables.

Histogram values are handled through their quantile functions. The Distribution and
Symmetric Distribution (DSD) model predicts a response quantile function from predictor
quantile functions and their symmetric counterparts, and is fitted by minimising the
squared Mallows distance under nonnegativity constraints.
"""

__version__ = "0.1.0"
