"""Distances, symbolic means and error measures for histogram-valued variables.

Every distance first moves its arguments onto their common partition, where the
closed forms below are exact for piecewise-linear functions. With p_i the piece
weights and (c, r) the centers and half-ranges:

    mallows_sq(a, b)   = sum_i p_i [(c_ai - c_bi)^2 + (r_ai - r_bi)^2 / 3]
    inner_product(a, b) = sum_i p_i [c_ai c_bi + r_ai r_bi / 3]
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from histreg.core.histcore import PiecewiseLinear
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import rewrite_common
from histreg.exceptions import DimensionMismatch
from histreg.exceptions import EmptyTable
from histreg.exceptions import LengthMismatch


@dataclass(frozen=True, eq=False)
class VariableColumn:
    """The m observations of one histogram-valued variable, on a shared partition."""

    units: tuple[QuantileFunction, ...]
    name: str = ""

    def __post_init__(self) -> None:
        units = tuple(self.units)
        if not units:
            raise EmptyTable(f"variable {self.name or '?'} has no units")
        reference = units[0].cum_weights
        for j, q in enumerate(units[1:], start=1):
            if not np.array_equal(q.cum_weights, reference):
                raise DimensionMismatch(
                    f"unit {j} of variable {self.name or '?'} is not on the column partition"
                )
        object.__setattr__(self, "units", units)

    @classmethod
    def from_values(cls, values: Sequence[QuantileFunction], name: str = "") -> VariableColumn:
        """Rewrite the values on their common partition and build the column."""
        return cls(tuple(rewrite_common(values)), name)

    @property
    def shared_cum_weights(self) -> np.ndarray:
        return self.units[0].cum_weights

    @property
    def weights(self) -> np.ndarray:
        return self.units[0].weights

    @property
    def centers(self) -> np.ndarray:
        """(m, n) array of piece centers."""
        return np.vstack([q.centers for q in self.units])

    @property
    def half_ranges(self) -> np.ndarray:
        return np.vstack([q.half_ranges for q in self.units])

    @property
    def m(self) -> int:
        return len(self.units)

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self) -> Iterator[QuantileFunction]:
        return iter(self.units)

    def __getitem__(self, j: int) -> QuantileFunction:
        return self.units[j]


def _aligned(a: PiecewiseLinear, b: PiecewiseLinear) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    left, right = rewrite_common([a, b])
    return left.weights, left.centers - right.centers, left.half_ranges - right.half_ranges


def mallows_sq(a: PiecewiseLinear, b: PiecewiseLinear) -> float:
    """Squared Mallows (L2 Wasserstein) distance, the integral of (a - b)^2 over [0, 1]."""
    weights, dc, dr = _aligned(a, b)
    return float(np.sum(weights * (dc**2 + dr**2 / 3.0)))


def wasserstein(a: PiecewiseLinear, b: PiecewiseLinear) -> float:
    """L1 Wasserstein distance, the integral of |a - b| over [0, 1].

    The difference is linear on every common piece, so each piece contributes a
    trapezoid, or two triangles when it changes sign.
    """
    weights, dc, dr = _aligned(a, b)
    start = np.abs(dc - dr)
    end = np.abs(dc + dr)
    same_sign = (dc - dr) * (dc + dr) >= 0.0
    total = start + end
    crossing = np.divide(start**2 + end**2, total, out=np.zeros_like(total), where=total > 0)
    area = np.where(same_sign, weights * total / 2.0, weights * crossing / 2.0)
    return float(np.sum(area))


def inner_product(a: PiecewiseLinear, b: PiecewiseLinear) -> float:
    """Integral of a(t) b(t) over [0, 1]."""
    left, right = rewrite_common([a, b])
    return float(
        np.sum(
            left.weights
            * (left.centers * right.centers + left.half_ranges * right.half_ranges / 3.0)
        )
    )


def mallows_sq_to_scalar(q: PiecewiseLinear, c: float) -> float:
    """Squared Mallows distance between ``q`` and the constant function ``c``."""
    return float(np.sum(q.weights * ((q.centers - c) ** 2 + q.half_ranges**2 / 3.0)))


def symbolic_mean(col: VariableColumn) -> float:
    """Mean of a histogram-valued variable: the average of the unit means."""
    per_unit = col.centers @ col.weights
    return float(np.mean(per_unit))


def mean_quantile(col: VariableColumn) -> QuantileFunction:
    """Quantile function of the barycentric histogram, the piecewise mean of the column."""
    return QuantileFunction(
        col.shared_cum_weights, col.centers.mean(axis=0), col.half_ranges.mean(axis=0)
    )


def _check_lengths(observed: VariableColumn, predicted: VariableColumn) -> None:
    if len(observed) != len(predicted):
        raise LengthMismatch(f"{len(observed)} observed units but {len(predicted)} predicted units")


def rmse_per_unit(observed: VariableColumn, predicted: VariableColumn) -> np.ndarray:
    """Mallows distance between every observed unit and its prediction."""
    _check_lengths(observed, predicted)
    return np.array([math.sqrt(mallows_sq(y, y_hat)) for y, y_hat in zip(observed, predicted)])


def rmse_m(observed: VariableColumn, predicted: VariableColumn) -> float:
    """Root mean squared Mallows distance over the units."""
    _check_lengths(observed, predicted)
    total = sum(mallows_sq(y, y_hat) for y, y_hat in zip(observed, predicted))
    return math.sqrt(total / len(observed))


def rmse_bounds(observed: VariableColumn, predicted: VariableColumn) -> tuple[float, float]:
    """Errors on the lower and upper bin bounds.

    For every unit the weighted root mean square of the bound differences is taken on
    the common partition of observation and prediction; the result is the mean of
    those roots over the units.
    """
    _check_lengths(observed, predicted)
    lower_roots = []
    upper_roots = []
    for y, y_hat in zip(observed, predicted):
        left, right = rewrite_common([y, y_hat])
        weights = left.weights
        lower_roots.append(
            math.sqrt(float(np.sum(weights * (left.lower_bounds - right.lower_bounds) ** 2)))
        )
        upper_roots.append(
            math.sqrt(float(np.sum(weights * (left.upper_bounds - right.upper_bounds) ** 2)))
        )
    return float(np.mean(lower_roots)), float(np.mean(upper_roots))
