"""Histogram values, quantile functions and piecewise-linear arithmetic.

A histogram value {[l_1, u_1], p_1; ...; [l_n, u_n], p_n} is handled through its
quantile function, stored as cumulative weights w_1 < ... < w_n = 1 together with the
center c_i and half-range r_i of every piece. For w_{i-1} <= t < w_i (w_0 = 0)

    q(t) = c_i + (2 (t - w_{i-1}) / (w_i - w_{i-1}) - 1) r_i

and t = 1 belongs to the last piece. Every object is immutable; operations return
new objects.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from collections.abc import Sequence
from dataclasses import dataclass
from numbers import Real
from typing import TypeVar

import numpy as np

from histreg.exceptions import AllWeightsZero
from histreg.exceptions import DimensionMismatch
from histreg.exceptions import EmptyTable
from histreg.exceptions import HistRegError
from histreg.exceptions import InvalidParameter
from histreg.exceptions import LengthMismatch
from histreg.exceptions import NegativeWeight
from histreg.exceptions import NonOrderedBins
from histreg.exceptions import NotMonotone
from histreg.exceptions import OutOfDomain
from histreg.exceptions import UnboundedBin
from histreg.exceptions import WeightSumNotOne

# Absolute tolerance for weight sums and for merging cumulative-weight breakpoints.
WEIGHT_TOL = 1e-12
# Allowed overlap between consecutive pieces of a quantile function.
MONOTONE_TOL = 1e-9


# ============================================================================
# HISTOGRAM VALUES
# ============================================================================


def histogram_violations(
    bins: Sequence[tuple[float, float]], weights: Sequence[float]
) -> list[HistRegError]:
    """Return every invariant a candidate histogram breaks, in a stable order.

    An empty list means the histogram is valid. The first entry is what
    :class:`HistogramValue` raises; validators report the full list.
    """
    if len(bins) != len(weights):
        return [LengthMismatch(f"{len(bins)} bins but {len(weights)} weights")]
    if not bins:
        return [LengthMismatch("a histogram needs at least one bin")]

    problems: list[HistRegError] = []
    for i, (lower, upper) in enumerate(bins):
        if not (math.isfinite(lower) and math.isfinite(upper)):
            problems.append(UnboundedBin(f"bin {i} [{lower}, {upper}] has a non-finite bound"))
        elif lower > upper:
            problems.append(
                NonOrderedBins(f"bin {i} has lower bound {lower} greater than upper bound {upper}")
            )
    for i in range(len(bins) - 1):
        upper, following = bins[i][1], bins[i + 1][0]
        if math.isfinite(upper) and math.isfinite(following) and upper > following:
            problems.append(
                NonOrderedBins(f"bin {i} ends at {upper} after bin {i + 1} starts at {following}")
            )
    for i, weight in enumerate(weights):
        if not math.isfinite(weight) or weight < 0:
            problems.append(NegativeWeight(f"weight {i} is {weight}, expected a value >= 0"))
    total = math.fsum(weights)
    if math.isfinite(total) and abs(total - 1.0) > WEIGHT_TOL:
        problems.append(WeightSumNotOne(f"weights sum to {total!r}, expected 1"))
    return problems


@dataclass(frozen=True)
class HistogramValue:
    """Ordered weighted subintervals describing one empirical distribution.

    Zero-weight bins are kept in storage; :func:`to_quantile` drops them.
    """

    bins: tuple[tuple[float, float], ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        bins = tuple((float(lower), float(upper)) for lower, upper in self.bins)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "weights", weights)
        problems = histogram_violations(bins, weights)
        if problems:
            raise problems[0]

    @property
    def n_bins(self) -> int:
        return len(self.weights)

    @property
    def lowers(self) -> np.ndarray:
        return np.array([lower for lower, _ in self.bins])

    @property
    def uppers(self) -> np.ndarray:
        return np.array([upper for _, upper in self.bins])

    def __str__(self) -> str:
        parts = [f"[{lo:.6g}, {hi:.6g}], {w:.6g}" for (lo, hi), w in zip(self.bins, self.weights)]
        return "{" + "; ".join(parts) + "}"


def histogram_new(bins: Iterable[Sequence[float]], weights: Iterable[float]) -> HistogramValue:
    """Validate and build a histogram value."""
    return HistogramValue(
        tuple((float(b[0]), float(b[1])) for b in bins), tuple(float(w) for w in weights)
    )


def histogram_from_quantile_knots(knots: Sequence[float]) -> HistogramValue:
    """Equiprobable histogram whose bin bounds are the given quantile knots.

    ``K + 1`` non-decreasing knots give ``K`` bins of weight ``1/K``.
    """
    values = np.asarray(knots, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise InvalidParameter("at least two quantile knots are required")
    k = values.size - 1
    return histogram_new(zip(values[:-1], values[1:]), [1.0 / k] * k)


# ============================================================================
# PIECEWISE-LINEAR FUNCTIONS ON [0, 1]
# ============================================================================


P = TypeVar("P", bound="PiecewiseLinear")


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Piecewise-linear function on [0, 1] in center / half-range form.

    No monotonicity is required; error functions and negative multiples of
    quantile functions live here.
    """

    cum_weights: np.ndarray
    centers: np.ndarray
    half_ranges: np.ndarray

    def __post_init__(self) -> None:
        cum = np.atleast_1d(np.array(self.cum_weights, dtype=float))
        centers = np.atleast_1d(np.array(self.centers, dtype=float))
        half_ranges = np.atleast_1d(np.array(self.half_ranges, dtype=float))

        if cum.ndim != 1 or cum.size == 0:
            raise DimensionMismatch("cumulative weights must be a non-empty vector")
        if centers.shape != cum.shape or half_ranges.shape != cum.shape:
            raise DimensionMismatch(
                f"{cum.size} cumulative weights, {centers.size} centers, "
                f"{half_ranges.size} half-ranges"
            )
        if not (np.all(np.isfinite(cum)) and np.all(np.isfinite(centers))):
            raise UnboundedBin("cumulative weights and centers must be finite")
        if not np.all(np.isfinite(half_ranges)):
            raise UnboundedBin("half-ranges must be finite")
        if abs(cum[-1] - 1.0) > WEIGHT_TOL:
            raise WeightSumNotOne(f"last cumulative weight is {cum[-1]!r}, expected 1")
        if cum[0] <= 0.0 or np.any(np.diff(cum) <= 0.0):
            raise NonOrderedBins("cumulative weights must be strictly increasing in (0, 1]")
        cum[-1] = 1.0

        half_ranges = self._check_pieces(centers, half_ranges)
        for name, values in (
            ("cum_weights", cum),
            ("centers", centers),
            ("half_ranges", half_ranges),
        ):
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    def _check_pieces(self, centers: np.ndarray, half_ranges: np.ndarray) -> np.ndarray:
        return half_ranges

    @classmethod
    def constant(cls: type[P], value: float) -> P:
        return cls([1.0], [float(value)], [0.0])

    @classmethod
    def from_bounds(
        cls: type[P], cum_weights: Sequence[float], lowers: np.ndarray, uppers: np.ndarray
    ) -> P:
        """Build from the value at the start and at the end of every piece."""
        lowers = np.asarray(lowers, dtype=float)
        uppers = np.asarray(uppers, dtype=float)
        return cls(cum_weights, (lowers + uppers) / 2.0, (uppers - lowers) / 2.0)

    @property
    def n_pieces(self) -> int:
        return int(self.cum_weights.size)

    @property
    def weights(self) -> np.ndarray:
        """Width of every piece."""
        return np.diff(self.cum_weights, prepend=0.0)

    @property
    def lower_bounds(self) -> np.ndarray:
        return self.centers - self.half_ranges

    @property
    def upper_bounds(self) -> np.ndarray:
        return self.centers + self.half_ranges

    def integral(self) -> float:
        """Integral over [0, 1]."""
        return float(np.dot(self.weights, self.centers))

    def allclose(self, other: PiecewiseLinear, atol: float = 1e-12) -> bool:
        """Pointwise equality within ``atol`` after moving to a common partition."""
        a, b = rewrite_common([self, other])
        return bool(
            np.allclose(a.centers, b.centers, rtol=0.0, atol=atol)
            and np.allclose(a.half_ranges, b.half_ranges, rtol=0.0, atol=atol)
        )

    def __call__(self, t: float | np.ndarray) -> float | np.ndarray:
        return evaluate(self, t)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(cum_weights={self.cum_weights.tolist()}, "
            f"centers={self.centers.tolist()}, half_ranges={self.half_ranges.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class QuantileFunction(PiecewiseLinear):
    """Non-decreasing piecewise-linear function: the quantile function of a histogram."""

    def _check_pieces(self, centers: np.ndarray, half_ranges: np.ndarray) -> np.ndarray:
        negative = np.flatnonzero(half_ranges < -MONOTONE_TOL)
        if negative.size:
            i = int(negative[0])
            raise NotMonotone(f"piece {i} has negative half-range {half_ranges[i]!r}")
        half_ranges = np.maximum(half_ranges, 0.0)
        ends = centers[:-1] + half_ranges[:-1]
        starts = centers[1:] - half_ranges[1:]
        overlap = np.flatnonzero(ends > starts + MONOTONE_TOL)
        if overlap.size:
            i = int(overlap[0])
            raise NotMonotone(f"piece {i} ends at {ends[i]!r} after piece {i + 1} starts at {starts[i]!r}")
        return half_ranges

    @property
    def mean(self) -> float:
        """Mean of the distribution, the integral of its quantile function."""
        return self.integral()

    @property
    def median(self) -> float:
        return float(evaluate(self, 0.5))


# ============================================================================
# EVALUATION
# ============================================================================


def _snap(cum: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Move points lying within WEIGHT_TOL of a breakpoint onto it."""
    above = np.clip(np.searchsorted(cum, t), 0, cum.size - 1)
    below = np.clip(above - 1, 0, cum.size - 1)
    snapped = t
    for k in (below, above):
        snapped = np.where(np.abs(cum[k] - t) <= WEIGHT_TOL, cum[k], snapped)
    return snapped


def _piece_index(cum: np.ndarray, t: np.ndarray, side: str) -> np.ndarray:
    idx = np.searchsorted(cum, _snap(cum, t), side=side)
    return np.clip(idx, 0, cum.size - 1)


def _piece_value(q: PiecewiseLinear, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
    starts = np.concatenate(([0.0], q.cum_weights[:-1]))
    width = q.cum_weights[idx] - starts[idx]
    return q.centers[idx] + (2.0 * (t - starts[idx]) / width - 1.0) * q.half_ranges[idx]


def _check_domain(t: float | np.ndarray) -> np.ndarray:
    values = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise OutOfDomain(f"evaluation points must lie in [0, 1], got {t!r}")
    return values


def evaluate(q: PiecewiseLinear, t: float | np.ndarray) -> float | np.ndarray:
    """Value of ``q`` at ``t``; pieces are half-open and t = 1 maps to the last piece."""
    values = _check_domain(t)
    result = _piece_value(q, _piece_index(q.cum_weights, values, "right"), values)
    return float(result) if result.ndim == 0 else result


def left_limit(q: PiecewiseLinear, t: float | np.ndarray) -> float | np.ndarray:
    """Limit of ``q`` from the left at ``t``; equals ``evaluate`` where ``q`` is continuous."""
    values = _check_domain(t)
    result = _piece_value(q, _piece_index(q.cum_weights, values, "left"), values)
    return float(result) if result.ndim == 0 else result


# ============================================================================
# PARTITIONS
# ============================================================================


def union_partition(partitions: Iterable[Sequence[float]]) -> np.ndarray:
    """Sorted union of cumulative-weight grids, merging values closer than WEIGHT_TOL."""
    arrays = [np.atleast_1d(np.asarray(p, dtype=float)) for p in partitions]
    if not arrays:
        raise EmptyTable("no partitions to merge")
    merged = np.sort(np.concatenate(arrays))
    keep = np.concatenate(([True], np.diff(merged) > WEIGHT_TOL))
    grid = merged[keep]
    grid[-1] = 1.0
    return grid


def symmetric_partition(cum_weights: Sequence[float]) -> np.ndarray:
    """Close a partition under w -> 1 - w so that q(t) and q(1 - t) share it."""
    grid = np.asarray(cum_weights, dtype=float)
    if grid.size == 1:
        return grid.copy()
    return union_partition([grid, 1.0 - grid[:-1]])


def refine(q: P, cum_weights: Sequence[float]) -> P:
    """Rewrite ``q`` exactly on a finer partition.

    The target grid must contain every breakpoint of ``q``; pieces that are not split
    keep their center and half-range bit for bit.
    """
    grid = np.asarray(cum_weights, dtype=float)
    own = q.cum_weights
    nearest = np.clip(np.searchsorted(grid, own - WEIGHT_TOL), 0, grid.size - 1)
    if grid.size < own.size or np.any(np.abs(grid[nearest] - own) > WEIGHT_TOL):
        raise DimensionMismatch("target partition does not contain every breakpoint of the function")

    starts = np.concatenate(([0.0], grid[:-1]))
    idx = _piece_index(own, (starts + grid) / 2.0, "right")
    lowers = _piece_value(q, idx, starts)
    uppers = _piece_value(q, idx, grid)
    centers = (lowers + uppers) / 2.0
    half_ranges = (uppers - lowers) / 2.0

    own_starts = np.concatenate(([0.0], own[:-1]))
    untouched = (np.abs(starts - own_starts[idx]) <= WEIGHT_TOL) & (
        np.abs(grid - own[idx]) <= WEIGHT_TOL
    )
    centers[untouched] = q.centers[idx[untouched]]
    half_ranges[untouched] = q.half_ranges[idx[untouched]]
    return type(q)(grid, centers, half_ranges)


def rewrite_common(qs: Sequence[P]) -> list[P]:
    """Rewrite every function on the union of all their breakpoints, without loss."""
    functions = list(qs)
    if not functions:
        raise EmptyTable("at least one function is required")
    grid = union_partition(q.cum_weights for q in functions)
    return [refine(q, grid) for q in functions]


# ============================================================================
# OPERATIONS
# ============================================================================


def to_quantile(h: HistogramValue) -> QuantileFunction:
    """Quantile function of a histogram.

    Bins with weight at most WEIGHT_TOL are dropped first; their breakpoints would merge
    with a neighbour on any common partition.
    """
    weights = np.asarray(h.weights, dtype=float)
    keep = weights > WEIGHT_TOL
    if not keep.any():
        raise AllWeightsZero("histogram has no bin with positive weight")
    cum = np.cumsum(weights[keep])
    cum[-1] = 1.0
    return QuantileFunction.from_bounds(cum, h.lowers[keep], h.uppers[keep])


def as_quantile(q: PiecewiseLinear) -> QuantileFunction:
    """Promote a piecewise-linear function that is non-decreasing; raise NotMonotone otherwise."""
    if isinstance(q, QuantileFunction):
        return q
    return QuantileFunction(q.cum_weights, q.centers, q.half_ranges)


def to_histogram(q: PiecewiseLinear) -> HistogramValue:
    """Histogram whose bins are the pieces of ``q``."""
    q = as_quantile(q)
    # Absorb overlaps below MONOTONE_TOL so the bins validate.
    bounds = np.column_stack((q.lower_bounds, q.upper_bounds)).reshape(-1)
    bounds = np.maximum.accumulate(bounds).reshape(-1, 2)
    return HistogramValue(
        tuple((float(lo), float(hi)) for lo, hi in bounds),
        tuple(float(w) for w in q.weights),
    )


def symmetric(q: P) -> P:
    """Quantile function of the symmetric distribution, t -> -q(1 - t)."""
    starts = np.concatenate(([0.0], q.cum_weights[:-1]))
    return type(q)((1.0 - starts)[::-1], -q.centers[::-1], q.half_ranges[::-1])


def add(a: PiecewiseLinear | float, b: PiecewiseLinear | float) -> PiecewiseLinear:
    """Pointwise sum; a real operand translates the function.

    The sum of two quantile functions is a quantile function.
    """
    if isinstance(a, Real):
        a, b = b, a
    if isinstance(a, Real):
        return PiecewiseLinear.constant(float(a) + float(b))
    if isinstance(b, Real):
        return type(a)(a.cum_weights, a.centers + float(b), a.half_ranges)

    left, right = rewrite_common([a, b])
    cls = (
        QuantileFunction
        if isinstance(a, QuantileFunction) and isinstance(b, QuantileFunction)
        else PiecewiseLinear
    )
    return cls(left.cum_weights, left.centers + right.centers, left.half_ranges + right.half_ranges)


def scale(q: PiecewiseLinear, lam: float) -> PiecewiseLinear:
    """Pointwise multiple. Negative factors break monotonicity, so the result is not promoted."""
    return PiecewiseLinear(q.cum_weights, lam * q.centers, lam * q.half_ranges)


def requantize(q: PiecewiseLinear, k: int) -> QuantileFunction:
    """Approximate ``q`` by ``k`` equiprobable pieces from its values at i/k.

    Each piece starts at q((i-1)/k) and ends at the left limit at i/k, so inputs that
    are already equiprobable with ``k`` pieces come back unchanged.
    """
    if int(k) != k or k < 1:
        raise InvalidParameter(f"piece count must be a positive integer, got {k!r}")
    k = int(k)
    grid = np.arange(1, k + 1, dtype=float) / k
    starts = np.concatenate(([0.0], grid[:-1]))
    return QuantileFunction.from_bounds(grid, evaluate(q, starts), left_limit(q, grid))
