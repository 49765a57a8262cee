"""Active-set solver for quadratic programs with sign-constrained and free variables.

Minimises ``1/2 b'Hb + F'b + C`` subject to ``b_i >= 0`` for the constrained indices.
The iteration follows Lawson and Hanson's NNLS with one change: free variables never
leave the passive set. Stationarity is checked on the gradient ``g = Hb + F``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Iterable
from dataclasses import dataclass
from dataclasses import field

import numpy as np
import scipy.linalg

from histreg.exceptions import DimensionMismatch
from histreg.exceptions import MaxIterationsExceeded
from histreg.exceptions import NotPSD
from histreg.exceptions import Unbounded

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
RIDGE_FACTOR = 1e-10
MAX_ITER_FACTOR = 100
# Consecutive ascent steps tolerated before the problem is declared indefinite.
MAX_ASCENT_STEPS = 3


@dataclass(frozen=True, eq=False)
class QPProblem:
    """Quadratic program ``1/2 b'Hb + F'b + C`` with ``b_i >= 0`` for ``i in constrained``."""

    H: np.ndarray
    F: np.ndarray
    C: float = 0.0
    constrained: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        H = np.atleast_2d(np.array(self.H, dtype=float))
        F = np.atleast_1d(np.array(self.F, dtype=float))
        d = F.size
        if d < 1 or H.shape != (d, d):
            raise DimensionMismatch(f"H has shape {H.shape} but F has length {d}")
        scale = max(1.0, float(np.max(np.abs(H))))
        if np.max(np.abs(H - H.T)) > 1e-10 * scale:
            raise DimensionMismatch("H must be symmetric")
        H = (H + H.T) / 2.0
        constrained = frozenset(int(i) for i in self.constrained)
        if any(i < 0 or i >= d for i in constrained):
            raise DimensionMismatch(f"constrained indices must lie in 0..{d - 1}")
        H.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "C", float(self.C))
        object.__setattr__(self, "constrained", constrained)

    @property
    def d(self) -> int:
        return int(self.F.size)

    @property
    def free(self) -> frozenset[int]:
        return frozenset(range(self.d)) - self.constrained


@dataclass(frozen=True, eq=False)
class QPSolution:
    b: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    regularized: bool
    active: frozenset[int] = frozenset()
    objective_trace: tuple[float, ...] = ()


def objective(p: QPProblem, b: np.ndarray) -> float:
    b = np.asarray(b, dtype=float)
    return float(0.5 * b @ p.H @ b + p.F @ b + p.C)


def kkt_check(p: QPProblem, b: Iterable[float], tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Check the Kuhn-Tucker conditions at ``b``.

    With ``g = Hb + F``: ``g_i = 0`` for free i; ``g_i >= 0``, ``b_i >= 0`` and
    ``g_i b_i = 0`` for constrained i. The residual is the largest violation divided by
    ``1 + max|F|``.

    Returns:
        ``(ok, residual)`` with ``ok`` true when the residual is at most ``tol``.
    """
    b = np.asarray(list(b) if not isinstance(b, np.ndarray) else b, dtype=float)
    if b.shape != (p.d,):
        raise DimensionMismatch(f"expected a vector of length {p.d}, got shape {b.shape}")
    g = p.H @ b + p.F
    violations = [0.0]
    for i in range(p.d):
        if i in p.constrained:
            violations.extend((max(0.0, -g[i]), abs(g[i] * b[i]), max(0.0, -b[i])))
        else:
            violations.append(abs(g[i]))
    residual = max(violations) / (1.0 + float(np.max(np.abs(p.F))))
    return residual <= tol, residual


class _PassiveSolver:
    """Solves the equality-constrained subproblem on a passive set, with ridge fallback."""

    def __init__(self, p: QPProblem, ridge_factor: float):
        self.p = p
        self.ridge = ridge_factor * float(np.trace(p.H)) / p.d
        self.regularized = False

    def __call__(self, passive: list[int]) -> np.ndarray:
        z = np.zeros(self.p.d)
        if not passive:
            return z
        A = self.p.H[np.ix_(passive, passive)]
        rhs = -self.p.F[passive]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                sol = scipy.linalg.solve(A, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            logger.warning(
                "Singular passive block %s, retrying with ridge %.3g", passive, self.ridge
            )
            self.regularized = True
            A = A + self.ridge * np.eye(len(passive))
            sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        # One step of iterative refinement.
        sol = sol + np.linalg.lstsq(A, rhs - A @ sol, rcond=None)[0]
        z[passive] = sol
        return z


def solve(
    p: QPProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    ridge_factor: float = RIDGE_FACTOR,
) -> QPSolution:
    """Minimise the quadratic program with an active-set method.

    Args:
        p: The problem.
        tol: Tolerance on the scaled KKT residual (see :func:`kkt_check`).
        max_iter: Bound on solver steps, ``100 * d`` by default.
        ridge_factor: Ridge ``ridge_factor * trace(H) / d`` used on singular blocks.

    Raises:
        MaxIterationsExceeded: The iteration limit was reached.
        NotPSD: H has a negative eigenvalue, or passive-block solves kept increasing
            the objective.
        Unbounded: The final iterate misses the KKT conditions, so the objective has no
            minimum.
    """
    d = p.d
    max_iter = MAX_ITER_FACTOR * d if max_iter is None else max_iter
    eigenvalues = scipy.linalg.eigvalsh(p.H)
    if eigenvalues[0] < -1e-9 * max(1.0, float(np.max(np.abs(eigenvalues)))):
        raise NotPSD(f"H has a negative eigenvalue {eigenvalues[0]:.6g}")
    scale = 1.0 + float(np.max(np.abs(p.F)))
    passive_solve = _PassiveSolver(p, ridge_factor)

    passive = sorted(p.free)
    b = passive_solve(passive)
    current = objective(p, b)
    trace = [current]
    iterations = 0
    ascents = 0
    blocked: set[int] = set()

    while True:
        g = p.H @ b + p.F
        candidates = [
            i
            for i in sorted(p.constrained)
            if i not in passive and i not in blocked and g[i] < -tol * scale
        ]
        if not candidates:
            break
        # min() keeps the first, lowest, index among equal gradients.
        entering = min(candidates, key=lambda i: g[i])
        passive = sorted(passive + [entering])

        moved = True
        first_inner = True
        while True:
            iterations += 1
            if iterations > max_iter:
                raise MaxIterationsExceeded(f"no KKT point after {max_iter} iterations")
            z = passive_solve(passive)
            infeasible = [i for i in passive if i in p.constrained and z[i] <= 0.0]
            if not infeasible:
                b = z
                break
            if first_inner and entering in infeasible:
                # The entering variable cannot move; skip it until the iterate changes.
                blocked.add(entering)
                passive.remove(entering)
                moved = False
                logger.debug("Variable %d blocked, solve gives %.3g", entering, z[entering])
                break
            limiting = min(infeasible, key=lambda i: b[i] / (b[i] - z[i]))
            step = b[limiting] / (b[limiting] - z[limiting])
            b = b + step * (z - b)
            b[limiting] = 0.0
            for i in [i for i in passive if i in p.constrained and b[i] <= 0.0]:
                b[i] = 0.0
                passive.remove(i)
            first_inner = False

        if not moved:
            continue
        blocked.clear()
        value = objective(p, b)
        if value > current + 1e-12 * (1.0 + abs(current)):
            ascents += 1
            logger.debug("Ascent step %d: %.17g -> %.17g", ascents, current, value)
            if ascents >= MAX_ASCENT_STEPS:
                raise NotPSD("passive-block solves repeatedly increased the objective")
        else:
            ascents = 0
        current = value
        trace.append(current)

    _, residual = kkt_check(p, b, tol)
    if residual > tol:
        # PSD H with F outside its range: no stationary point exists.
        raise Unbounded(
            f"no KKT point: residual {residual:.3g} above {tol:.3g}, objective {current:.6g}"
        )
    active = frozenset(i for i in p.constrained if i not in passive)
    logger.debug(
        "QP solved in %d iterations, objective %.17g, residual %.3g", iterations, current, residual
    )
    return QPSolution(
        b=b,
        objective=current,
        kkt_residual=residual,
        iterations=iterations,
        regularized=passive_solve.regularized,
        active=active,
        objective_trace=tuple(trace),
    )
