"""Unit tests for the active-set QP solver."""

import itertools

import numpy as np
import pytest

from histreg.core.nnqp import QPProblem
from histreg.core.nnqp import kkt_check
from histreg.core.nnqp import objective
from histreg.core.nnqp import solve
from histreg.exceptions import DimensionMismatch
from histreg.exceptions import MaxIterationsExceeded
from histreg.exceptions import NotPSD
from histreg.exceptions import NumericalError
from histreg.exceptions import Unbounded


def random_problem(rng: np.random.Generator, d: int) -> QPProblem:
    A = rng.normal(size=(d + 2, d))
    H = A.T @ A + 0.1 * np.eye(d)
    F = rng.normal(scale=3.0, size=d)
    constrained = frozenset(int(i) for i in np.flatnonzero(rng.random(d) < 0.7))
    return QPProblem(H, F, float(rng.normal()), constrained)


def enumerate_active_sets(p: QPProblem) -> float:
    """Best objective over every feasible equality-constrained solution."""
    best = np.inf
    constrained = sorted(p.constrained)
    for size in range(len(constrained) + 1):
        for active in itertools.combinations(constrained, size):
            passive = [i for i in range(p.d) if i not in active]
            b = np.zeros(p.d)
            if passive:
                b[passive] = np.linalg.lstsq(p.H[np.ix_(passive, passive)], -p.F[passive], rcond=None)[0]
            if all(b[i] >= -1e-10 for i in constrained):
                best = min(best, objective(p, b))
    return best


def projected_gradient(p: QPProblem, steps: int = 20000) -> float:
    b = np.zeros(p.d)
    step = 1.0 / np.linalg.eigvalsh(p.H)[-1]
    mask = np.array([i in p.constrained for i in range(p.d)])
    for _ in range(steps):
        b = b - step * (p.H @ b + p.F)
        b[mask] = np.maximum(b[mask], 0.0)
    return objective(p, b)


@pytest.mark.unit
class TestQPProblem:
    """Problem validation."""

    def test_shape_mismatch(self):
        """H and F must agree in size."""
        with pytest.raises(DimensionMismatch):
            QPProblem(np.eye(2), [1.0, 2.0, 3.0])

    def test_asymmetric(self):
        """H must be symmetric."""
        with pytest.raises(DimensionMismatch):
            QPProblem([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])

    def test_bad_constrained_index(self):
        """Constrained indices must exist."""
        with pytest.raises(DimensionMismatch):
            QPProblem(np.eye(2), [0.0, 0.0], constrained=frozenset({2}))


@pytest.mark.unit
class TestSolve:
    """Active-set solutions."""

    def test_clamped_coordinate(self):
        """The unconstrained minimum (1, -1) is clamped to (1, 0)."""
        p = QPProblem(2.0 * np.eye(2), [-2.0, 2.0], constrained=frozenset({0, 1}))
        solution = solve(p)
        np.testing.assert_allclose(solution.b, [1.0, 0.0], atol=1e-12)
        assert solution.objective == pytest.approx(-1.0)
        assert solution.active == frozenset({1})

    def test_free_vertex(self):
        """Without constraints the vertex of the parabola is returned."""
        solution = solve(QPProblem(2.0 * np.eye(1), [-4.0]))
        np.testing.assert_allclose(solution.b, [2.0])
        assert not solution.regularized

    def test_kkt_holds_at_solution(self, rng):
        """Returned solutions satisfy the KKT conditions."""
        for _ in range(50):
            p = random_problem(rng, int(rng.integers(1, 8)))
            solution = solve(p)
            ok, residual = kkt_check(p, solution.b)
            assert ok, residual
            assert residual == solution.kkt_residual
            assert all(solution.b[i] >= -1e-12 for i in p.constrained)

    def test_kkt_rejects_zero_with_descent(self):
        """b = 0 is not optimal when a constrained gradient is negative."""
        p = QPProblem(np.eye(2), [-1.0, 0.0], constrained=frozenset({0, 1}))
        ok, residual = kkt_check(p, [0.0, 0.0])
        assert not ok
        assert residual == pytest.approx(0.5)

    def test_kkt_wrong_length(self):
        """The candidate must have length d."""
        p = QPProblem(np.eye(2), [0.0, 0.0])
        with pytest.raises(DimensionMismatch):
            kkt_check(p, [0.0])

    def test_matches_active_set_enumeration(self, rng):
        """The solver reaches the best feasible vertex for small problems."""
        for _ in range(100):
            p = random_problem(rng, int(rng.integers(1, 5)))
            assert solve(p).objective <= enumerate_active_sets(p) + 1e-9

    def test_not_worse_than_projected_gradient(self, rng):
        """The solver objective is at most the projected-gradient objective."""
        for _ in range(30):
            p = random_problem(rng, int(rng.integers(1, 8)))
            assert solve(p).objective <= projected_gradient(p) + 1e-7

    def test_objective_trace_non_increasing(self, rng):
        """Accepted iterates never increase the objective."""
        for _ in range(50):
            trace = np.array(solve(random_problem(rng, 6)).objective_trace)
            assert np.all(np.diff(trace) <= 1e-10 * (1.0 + np.abs(trace[:-1])))

    def test_scaling_invariance(self, rng):
        """Scaling H and F by c > 0 leaves the minimiser unchanged."""
        for _ in range(20):
            p = random_problem(rng, 5)
            scaled = QPProblem(7.5 * p.H, 7.5 * p.F, p.C, p.constrained)
            np.testing.assert_allclose(solve(scaled).b, solve(p).b, rtol=1e-9, atol=1e-9)

    def test_singular_block_uses_ridge(self):
        """Duplicated free columns trigger the ridge fallback and still minimise."""
        A = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
        y = np.array([1.0, 3.0, 0.0])
        p = QPProblem(2.0 * A.T @ A, -2.0 * A.T @ y, float(y @ y))
        solution = solve(p)
        assert solution.regularized
        best = np.linalg.lstsq(A, y, rcond=None)[0]
        assert solution.objective == pytest.approx(objective(p, best), abs=1e-6)

    def test_indefinite(self):
        """A negative eigenvalue raises NotPSD."""
        with pytest.raises(NotPSD):
            solve(QPProblem([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]))

    def test_iteration_limit(self):
        """Running out of iterations raises MaxIterationsExceeded."""
        p = QPProblem(2.0 * np.eye(2), [-2.0, 2.0], constrained=frozenset({0, 1}))
        with pytest.raises(MaxIterationsExceeded):
            solve(p, max_iter=0)

    def test_unbounded_below(self):
        """A singular H with F outside its range has no minimiser."""
        p = QPProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0])
        with pytest.raises(Unbounded) as excinfo:
            solve(p)
        assert isinstance(excinfo.value, NumericalError)

    def test_unbounded_along_constrained_direction(self):
        """The same holds when the unbounded direction is sign-constrained."""
        p = QPProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0], constrained=frozenset({1}))
        with pytest.raises(Unbounded):
            solve(p)

    def test_bounded_singular_problem_solves(self, rng):
        """Singular problems with F in the range of H still reach a KKT point."""
        for _ in range(20):
            A = rng.normal(size=(6, 2))
            A = np.hstack([A, A[:, :1]])
            y = rng.normal(size=6)
            p = QPProblem(2.0 * A.T @ A, -2.0 * A.T @ y, float(y @ y), frozenset({0, 2}))
            solution = solve(p)
            ok, residual = kkt_check(p, solution.b)
            assert ok, residual
