"""Unit tests for distances, symbolic means and error measures."""

import math

import numpy as np
import pytest

from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import histogram_new
from histreg.core.histcore import left_limit
from histreg.core.histcore import symmetric
from histreg.core.histcore import to_quantile
from histreg.core.histcore import union_partition
from histreg.core.metrics import VariableColumn
from histreg.core.metrics import inner_product
from histreg.core.metrics import mallows_sq
from histreg.core.metrics import mallows_sq_to_scalar
from histreg.core.metrics import mean_quantile
from histreg.core.metrics import rmse_bounds
from histreg.core.metrics import rmse_m
from histreg.core.metrics import rmse_per_unit
from histreg.core.metrics import symbolic_mean
from histreg.core.metrics import wasserstein
from histreg.exceptions import DimensionMismatch
from histreg.exceptions import EmptyTable
from histreg.exceptions import LengthMismatch

# Trapezoid-rule reference on a fine grid; breakpoints are added twice (left limit, then
# value) so jumps between pieces cost nothing.
GRID = np.linspace(0.0, 1.0, 1_000_001)


def sampled(qs):
    """Abscissae and the values of every function in ``qs`` on the refined grid."""
    breaks = union_partition([q.cum_weights for q in qs])[:-1]
    x = np.concatenate((GRID, breaks, breaks))
    rank = np.concatenate((np.ones(GRID.size), np.zeros(breaks.size), np.full(breaks.size, 2.0)))
    order = np.lexsort((rank, x))
    values = [np.concatenate((q(GRID), left_limit(q, breaks), q(breaks)))[order] for q in qs]
    return x[order], values


def quadrature(x: np.ndarray, values: np.ndarray) -> float:
    return float(np.trapz(values, x))


@pytest.mark.unit
class TestDistances:
    """Closed-form distances against direct values and quadrature."""

    def test_mallows_example_pair(self, example1_x, example1_y):
        """The example pair is at squared Mallows distance 13.9875."""
        assert mallows_sq(example1_x, example1_y) == pytest.approx(13.9875, abs=1e-12)

    def test_wasserstein_example_pair(self, example1_x, example1_y):
        """X lies above Y everywhere, so the L1 distance is the difference of the means."""
        assert wasserstein(example1_x, example1_y) == pytest.approx(3.65, abs=1e-12)

    def test_identity(self, example1_x):
        """Both distances vanish between a function and itself."""
        assert mallows_sq(example1_x, example1_x) == 0.0
        assert wasserstein(example1_x, example1_x) == 0.0

    def test_symmetry(self, example1_x, example1_y):
        """Distances do not depend on argument order."""
        assert mallows_sq(example1_x, example1_y) == pytest.approx(mallows_sq(example1_y, example1_x))
        assert wasserstein(example1_x, example1_y) == pytest.approx(wasserstein(example1_y, example1_x))

    def test_crossing_functions(self):
        """The identity and the constant 1/2 cross at the middle of [0, 1]."""
        t = to_quantile(histogram_new([(0, 1)], [1.0]))
        flipped = QuantileFunction([1.0], [0.5], [0.0])
        assert wasserstein(t, flipped) == pytest.approx(0.25)
        assert mallows_sq(t, flipped) == pytest.approx(1.0 / 12.0)

    def test_against_quadrature(self, rng, make_quantile):
        """Closed forms agree with trapezoid quadrature on random pairs."""
        for _ in range(50):
            a, b = make_quantile(rng), make_quantile(rng)
            x, (va, vb) = sampled([a, b])
            assert mallows_sq(a, b) == pytest.approx(quadrature(x, (va - vb) ** 2), abs=1e-5)
            assert wasserstein(a, b) == pytest.approx(quadrature(x, np.abs(va - vb)), abs=1e-5)

    def test_inner_product(self, rng, make_quantile):
        """The inner product matches quadrature and ties back to the squared distance."""
        for _ in range(20):
            a, b = make_quantile(rng), make_quantile(rng)
            x, (va, vb) = sampled([a, b])
            assert inner_product(a, b) == pytest.approx(quadrature(x, va * vb), abs=1e-5)
            expanded = inner_product(a, a) - 2 * inner_product(a, b) + inner_product(b, b)
            assert mallows_sq(a, b) == pytest.approx(expanded, abs=1e-9, rel=1e-9)

    def test_distance_to_scalar(self, example1_x):
        """Distance to a constant equals the distance to the constant function."""
        constant = QuantileFunction.constant(2.5)
        assert mallows_sq_to_scalar(example1_x, 2.5) == pytest.approx(mallows_sq(example1_x, constant))

    @pytest.mark.parametrize(
        "distance",
        [lambda a, b: math.sqrt(mallows_sq(a, b)), wasserstein],
        ids=["mallows", "wasserstein"],
    )
    def test_metric_axioms(self, rng, make_quantile, distance):
        """Non-negativity, identity, symmetry and the triangle inequality on random triples."""
        for _ in range(200):
            a, b, c = make_quantile(rng), make_quantile(rng), make_quantile(rng)
            ab, bc, ac = distance(a, b), distance(b, c), distance(a, c)
            assert min(ab, bc, ac) >= 0.0
            assert distance(a, a) == 0.0
            assert distance(b, a) == pytest.approx(ab, rel=1e-12, abs=1e-12)
            assert ac <= ab + bc + 1e-9

    def test_scalar_distance_minimised_at_mean(self, rng, make_quantile):
        """The distance to a constant is smallest at the mean, with zero slope there."""
        h = 1e-4
        for _ in range(100):
            q = make_quantile(rng)
            best = mallows_sq_to_scalar(q, q.mean)
            above = mallows_sq_to_scalar(q, q.mean + h)
            below = mallows_sq_to_scalar(q, q.mean - h)
            assert best <= min(above, below)
            assert (above - below) / (2 * h) == pytest.approx(0.0, abs=1e-6)
            assert above + below - 2 * best == pytest.approx(2 * h * h, rel=1e-3)


@pytest.mark.unit
class TestVariableColumn:
    """Columns on a shared partition and their means."""

    def test_from_values_shares_partition(self, example1_x, example1_y):
        """from_values rewrites the units onto their union grid."""
        col = VariableColumn.from_values([example1_x, example1_y], "X")
        np.testing.assert_allclose(col.shared_cum_weights, [0.1, 0.7, 0.8, 1.0])
        assert col.centers.shape == (2, 4)
        assert len(col) == 2

    def test_mismatched_partitions(self, example1_x, example1_y):
        """Units on different grids are rejected."""
        with pytest.raises(DimensionMismatch):
            VariableColumn((example1_x, example1_y))

    def test_empty(self):
        """A column needs units."""
        with pytest.raises(EmptyTable):
            VariableColumn(())

    def test_symbolic_mean_is_mean_of_means(self, example1_x, example1_y):
        """The symbolic mean averages the unit means."""
        col = VariableColumn.from_values([example1_x, example1_y])
        assert symbolic_mean(col) == pytest.approx((4.55 + 0.9) / 2)

    def test_mean_quantile_is_barycenter(self, rng, make_quantile):
        """The pointwise mean minimises the summed squared distance."""
        col = VariableColumn.from_values([make_quantile(rng) for _ in range(6)])
        center = mean_quantile(col)
        best = sum(mallows_sq(q, center) for q in col)
        for q in col:
            assert best <= sum(mallows_sq(other, q) for other in col) + 1e-12
        assert center.integral() == pytest.approx(symbolic_mean(col), abs=1e-12)

    def test_integral_of_mean_quantile_is_symbolic_mean(self, rng, make_quantile):
        """The integral of the pointwise mean equals the symbolic mean on random columns."""
        for _ in range(200):
            col = VariableColumn.from_values([make_quantile(rng) for _ in range(int(rng.integers(1, 20)))])
            assert abs(mean_quantile(col).integral() - symbolic_mean(col)) < 1e-12

    def test_symmetric_negates_mean(self, rng, make_quantile):
        """The symmetric distribution has the opposite mean."""
        for _ in range(20):
            q = make_quantile(rng)
            assert symmetric(q).mean == pytest.approx(-q.mean, abs=1e-12)


@pytest.mark.unit
class TestErrorMeasures:
    """RMSE on Mallows distances and on bin bounds."""

    def test_perfect_prediction(self, example1_x, example1_y):
        """Errors vanish when predictions equal the observations."""
        col = VariableColumn.from_values([example1_x, example1_y])
        assert rmse_m(col, col) == 0.0
        assert rmse_bounds(col, col) == (0.0, 0.0)

    def test_per_unit_and_total(self, rng, make_quantile):
        """RMSE_M is the root mean square of the per-unit distances."""
        observed = VariableColumn.from_values([make_quantile(rng) for _ in range(5)])
        predicted = VariableColumn.from_values([make_quantile(rng) for _ in range(5)])
        per_unit = rmse_per_unit(observed, predicted)
        assert rmse_m(observed, predicted) == pytest.approx(math.sqrt(np.mean(per_unit**2)))

    def test_shift_moves_bounds(self, example1_x):
        """Shifting every value by 2 gives bound errors of 2."""
        observed = VariableColumn.from_values([example1_x])
        shifted = QuantileFunction(example1_x.cum_weights, example1_x.centers + 2.0, example1_x.half_ranges)
        lower, upper = rmse_bounds(observed, VariableColumn.from_values([shifted]))
        assert lower == pytest.approx(2.0)
        assert upper == pytest.approx(2.0)
        assert rmse_m(observed, VariableColumn.from_values([shifted])) == pytest.approx(2.0)

    def test_length_mismatch(self, example1_x, example1_y):
        """Columns of different lengths cannot be compared."""
        one = VariableColumn.from_values([example1_x])
        two = VariableColumn.from_values([example1_x, example1_y])
        with pytest.raises(LengthMismatch):
            rmse_m(one, two)
