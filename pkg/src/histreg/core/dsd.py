"""Distribution and Symmetric Distribution (DSD) regression.

The model predicts the quantile function of the response of unit j as

    q_Y(j)(t) = gamma + sum_k alpha_k q_Xk(j)(t) - beta_k q_Xk(j)(1 - t)

with alpha_k, beta_k >= 0, so that every prediction is again a quantile function.
The coefficients minimise the summed squared Mallows distance SE between observed
and predicted responses. On a partition closed under w -> 1 - w, the reflected
predictor q_Xk(1 - t) is the original piece sequence read backwards, and SE becomes
a quadratic program in B = [alpha_1, beta_1, ..., alpha_p, beta_p, gamma].
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from histreg.core import nnqp
from histreg.core.histcore import PiecewiseLinear
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import add
from histreg.core.histcore import refine
from histreg.core.histcore import scale
from histreg.core.histcore import symmetric
from histreg.core.histcore import symmetric_partition
from histreg.core.histcore import union_partition
from histreg.core.metrics import VariableColumn
from histreg.core.metrics import mallows_sq
from histreg.core.metrics import mallows_sq_to_scalar
from histreg.core.metrics import symbolic_mean
from histreg.exceptions import ArityMismatch
from histreg.exceptions import DegenerateResponse
from histreg.exceptions import DimensionMismatch
from histreg.exceptions import EmptyTable
from histreg.exceptions import InvalidParameter
from histreg.exceptions import LengthMismatch
from histreg.exceptions import NegativeSlopeUnsupported

logger = logging.getLogger(__name__)

# Relative size below which the response dispersion counts as zero.
DEGENERATE_TOL = 1e-15


# ============================================================================
# DATA
# ============================================================================


@dataclass(frozen=True, eq=False)
class SymbolicTable:
    """m units described by one histogram-valued response and p predictors.

    Every column lives on one global partition closed under w -> 1 - w.
    Use :meth:`build` to construct a table from raw quantile functions.
    """

    response: VariableColumn
    predictors: tuple[VariableColumn, ...]
    unit_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        predictors = tuple(self.predictors)
        if not predictors:
            raise EmptyTable("a table needs at least one predictor")
        m = len(self.response)
        labels = tuple(self.unit_labels) or tuple(f"u{j + 1}" for j in range(m))
        if len(labels) != m:
            raise LengthMismatch(f"{len(labels)} unit labels for {m} units")
        if len(set(labels)) != m:
            raise InvalidParameter("unit labels must be unique")

        partition = self.response.shared_cum_weights
        for col in predictors:
            if len(col) != m:
                raise LengthMismatch(
                    f"predictor {col.name or '?'} has {len(col)} units, response has {m}"
                )
            if not np.array_equal(col.shared_cum_weights, partition):
                raise DimensionMismatch(f"predictor {col.name or '?'} is not on the table partition")
        if symmetric_partition(partition).size != partition.size:
            raise DimensionMismatch("the table partition must be closed under w -> 1 - w")

        object.__setattr__(self, "predictors", predictors)
        object.__setattr__(self, "unit_labels", labels)

    @classmethod
    def build(
        cls,
        response: Sequence[QuantileFunction],
        predictors: Sequence[Sequence[QuantileFunction]],
        unit_labels: Sequence[str] | None = None,
        response_name: str = "Y",
        predictor_names: Sequence[str] | None = None,
    ) -> SymbolicTable:
        """Rewrite every observation on the global partition and assemble the table."""
        if not response:
            raise EmptyTable("the response has no units")
        if not predictors:
            raise EmptyTable("a table needs at least one predictor")
        m = len(response)
        for k, col in enumerate(predictors):
            if len(col) != m:
                raise LengthMismatch(f"predictor {k} has {len(col)} units, response has {m}")
        names = list(predictor_names) if predictor_names else [f"X{k + 1}" for k in range(len(predictors))]
        if len(names) != len(predictors):
            raise LengthMismatch(f"{len(names)} predictor names for {len(predictors)} predictors")

        grid = symmetric_partition(
            union_partition(q.cum_weights for col in (response, *predictors) for q in col)
        )
        logger.debug("Global partition for %d units has %d pieces", m, grid.size)

        def column(values: Sequence[QuantileFunction], name: str) -> VariableColumn:
            return VariableColumn(tuple(refine(q, grid) for q in values), name)

        return cls(
            column(response, response_name),
            tuple(column(col, name) for col, name in zip(predictors, names)),
            tuple(unit_labels) if unit_labels is not None else (),
        )

    @property
    def m(self) -> int:
        return len(self.response)

    @property
    def p(self) -> int:
        return len(self.predictors)

    @property
    def n(self) -> int:
        return int(self.partition.size)

    @property
    def partition(self) -> np.ndarray:
        return self.response.shared_cum_weights

    @property
    def response_name(self) -> str:
        return self.response.name

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(col.name for col in self.predictors)

    def index(self, label: str) -> int:
        try:
            return self.unit_labels.index(label)
        except ValueError:
            raise InvalidParameter(f"unknown unit label {label!r}")

    def subset(self, indices: Sequence[int]) -> SymbolicTable:
        """Table restricted to the given units, on the same partition."""
        keep = list(indices)
        if not keep:
            raise EmptyTable("a table needs at least one unit")

        def pick(col: VariableColumn) -> VariableColumn:
            return VariableColumn(tuple(col[j] for j in keep), col.name)

        return SymbolicTable(
            pick(self.response),
            tuple(pick(col) for col in self.predictors),
            tuple(self.unit_labels[j] for j in keep),
        )

    def drop(self, label: str) -> SymbolicTable:
        held_out = self.index(label)
        return self.subset([j for j in range(self.m) if j != held_out])

    def predictor_values(self, j: int) -> list[QuantileFunction]:
        return [col[j] for col in self.predictors]


@dataclass(frozen=True, eq=False)
class DSDModel:
    """DSD coefficients with the fit diagnostics.

    ``omega``, ``se`` and ``kkt_residual`` are ``None`` for models built from given
    coefficients rather than fitted. A fitted model has ``omega`` ``None`` when the
    response has no dispersion and the fit does not reproduce it.
    """

    alphas: np.ndarray
    betas: np.ndarray
    gamma: float
    omega: float | None = None
    se: float | None = None
    kkt_residual: float | None = None
    partition: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    response_name: str = "Y"
    predictor_names: tuple[str, ...] = ()
    iterations: int = 0
    regularized: bool = False

    def __post_init__(self) -> None:
        alphas = np.atleast_1d(np.array(self.alphas, dtype=float))
        betas = np.atleast_1d(np.array(self.betas, dtype=float))
        if alphas.ndim != 1 or alphas.size == 0 or alphas.shape != betas.shape:
            raise DimensionMismatch(f"{alphas.size} alphas but {betas.size} betas")
        for name, values in (("alpha", alphas), ("beta", betas)):
            negative = np.flatnonzero(values < -1e-12)
            if negative.size:
                k = int(negative[0])
                raise InvalidParameter(f"{name}_{k + 1} is {values[k]!r}, expected >= 0")
        names = tuple(self.predictor_names) or tuple(f"X{k + 1}" for k in range(alphas.size))
        if len(names) != alphas.size:
            raise LengthMismatch(f"{len(names)} predictor names for {alphas.size} predictors")

        alphas = np.maximum(alphas, 0.0)
        betas = np.maximum(betas, 0.0)
        partition = np.atleast_1d(np.array(self.partition, dtype=float))
        for values in (alphas, betas, partition):
            values.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "predictor_names", names)

    @classmethod
    def from_vector(cls, b: Sequence[float], **kwargs) -> DSDModel:
        """Model from the stacked vector [alpha_1, beta_1, ..., alpha_p, beta_p, gamma]."""
        alphas, betas, gamma = _split(np.asarray(b, dtype=float))
        return cls(alphas, betas, gamma, **kwargs)

    @property
    def p(self) -> int:
        return int(self.alphas.size)

    @property
    def coefficients(self) -> np.ndarray:
        b = np.empty(2 * self.p + 1)
        b[0 : 2 * self.p : 2] = self.alphas
        b[1 : 2 * self.p : 2] = self.betas
        b[-1] = self.gamma
        return b


def _split(b: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    if b.ndim != 1 or b.size < 3 or b.size % 2 == 0:
        raise DimensionMismatch(f"coefficient vector must have odd length 2p + 1, got {b.size}")
    p = (b.size - 1) // 2
    return b[0 : 2 * p : 2], b[1 : 2 * p : 2], float(b[-1])


def _combine(
    alphas: np.ndarray,
    betas: np.ndarray,
    gamma: float,
    centers: Sequence[np.ndarray],
    half_ranges: Sequence[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Centers and half-ranges of the prediction on a reflection-closed partition."""
    c_hat = np.full_like(np.asarray(centers[0], dtype=float), gamma)
    r_hat = np.zeros_like(c_hat)
    for alpha, beta, c, r in zip(alphas, betas, centers, half_ranges):
        c_hat = c_hat + alpha * c - beta * c[..., ::-1]
        r_hat = r_hat + alpha * r + beta * r[..., ::-1]
    return c_hat, r_hat


# ============================================================================
# QUADRATIC PROGRAM
# ============================================================================


def _design(t: SymbolicTable) -> tuple[np.ndarray, np.ndarray]:
    """(m, n, 2p + 1) center and half-range design arrays, one slice per coefficient."""
    d = 2 * t.p + 1
    Zc = np.zeros((t.m, t.n, d))
    Zr = np.zeros((t.m, t.n, d))
    for k, col in enumerate(t.predictors):
        c, r = col.centers, col.half_ranges
        Zc[:, :, 2 * k] = c
        Zr[:, :, 2 * k] = r
        Zc[:, :, 2 * k + 1] = -c[:, ::-1]
        Zr[:, :, 2 * k + 1] = r[:, ::-1]
    Zc[:, :, -1] = 1.0
    return Zc, Zr


def build_qp(t: SymbolicTable) -> nnqp.QPProblem:
    """Quadratic program whose objective equals SE(B).

    H (order 2p + 1) collects the weighted cross products of the design columns,
    F their products with the response, C the weighted squared norm of the response.
    All alphas and betas are constrained to be nonnegative; gamma is free.
    """
    if t.m == 0 or t.p == 0:
        raise EmptyTable("cannot build a quadratic program from an empty table")
    Zc, Zr = _design(t)
    w = t.response.weights
    yc = t.response.centers
    yr = t.response.half_ranges

    H = 2.0 * (
        np.einsum("jia,i,jib->ab", Zc, w, Zc) + np.einsum("jia,i,jib->ab", Zr, w, Zr) / 3.0
    )
    F = -2.0 * (np.einsum("jia,i,ji->a", Zc, w, yc) + np.einsum("jia,i,ji->a", Zr, w, yr) / 3.0)
    C = float(np.sum(w * (yc**2 + yr**2 / 3.0)))
    return nnqp.QPProblem(H=H, F=F, C=C, constrained=frozenset(range(2 * t.p)))


def gradient_se(t: SymbolicTable, b: Sequence[float]) -> np.ndarray:
    """Partial derivatives of SE at B, from the residuals of every unit and piece."""
    b = np.asarray(b, dtype=float)
    if b.shape != (2 * t.p + 1,):
        raise DimensionMismatch(f"expected {2 * t.p + 1} coefficients, got shape {b.shape}")
    alphas, betas, gamma = _split(b)
    centers = [col.centers for col in t.predictors]
    half_ranges = [col.half_ranges for col in t.predictors]
    c_hat, r_hat = _combine(alphas, betas, gamma, centers, half_ranges)
    w = t.response.weights
    ec = t.response.centers - c_hat
    er = t.response.half_ranges - r_hat

    grad = np.empty_like(b)
    for k, (c, r) in enumerate(zip(centers, half_ranges)):
        grad[2 * k] = -2.0 * np.sum(w * (ec * c + er * r / 3.0))
        grad[2 * k + 1] = -2.0 * np.sum(w * (-ec * c[:, ::-1] + er * r[:, ::-1] / 3.0))
    grad[-1] = -2.0 * np.sum(w * ec)
    return grad


def squared_error(t: SymbolicTable, b: Sequence[float]) -> float:
    """SE(B) evaluated unit by unit from the model functions themselves."""
    alphas, betas, gamma = _split(np.asarray(b, dtype=float))
    total = 0.0
    for j, y in enumerate(t.response):
        prediction: PiecewiseLinear = PiecewiseLinear.constant(gamma)
        for alpha, beta, x in zip(alphas, betas, t.predictor_values(j)):
            prediction = add(prediction, scale(x, alpha))
            prediction = add(prediction, scale(symmetric(x), beta))
        total += mallows_sq(y, prediction)
    return total


# ============================================================================
# FIT, PREDICT, GOODNESS OF FIT
# ============================================================================


def predict(mod: DSDModel, xs: Sequence[QuantileFunction]) -> QuantileFunction:
    """Predicted response quantile function for one unit."""
    xs = list(xs)
    if len(xs) != mod.p:
        raise ArityMismatch(f"model has {mod.p} predictors, got {len(xs)}")
    grid = symmetric_partition(union_partition([mod.partition, *(x.cum_weights for x in xs)]))
    refined = [refine(x, grid) for x in xs]
    c_hat, r_hat = _combine(
        mod.alphas,
        mod.betas,
        mod.gamma,
        [x.centers for x in refined],
        [x.half_ranges for x in refined],
    )
    return QuantileFunction(grid, c_hat, r_hat)


def predict_table(mod: DSDModel, t: SymbolicTable) -> VariableColumn:
    if t.p != mod.p:
        raise ArityMismatch(f"model has {mod.p} predictors, table has {t.p}")
    return VariableColumn.from_values(
        [predict(mod, t.predictor_values(j)) for j in range(t.m)], mod.response_name
    )


def omega(t: SymbolicTable, predicted: VariableColumn) -> float:
    """Goodness of fit: dispersion of the predictions around the response mean over the
    dispersion of the observations.

    Raises:
        DegenerateResponse: The observations have no dispersion and the predictions
            do not reproduce them.
    """
    if len(predicted) != t.m:
        raise LengthMismatch(f"{len(predicted)} predictions for {t.m} units")
    y_bar = symbolic_mean(t.response)
    total = sum(mallows_sq_to_scalar(y, y_bar) for y in t.response)
    explained = sum(mallows_sq_to_scalar(y_hat, y_bar) for y_hat in predicted)
    tiny = DEGENERATE_TOL * t.m * (1.0 + y_bar**2)
    if total <= tiny:
        residual = sum(mallows_sq(y, y_hat) for y, y_hat in zip(t.response, predicted))
        if residual <= tiny:
            return 1.0
        raise DegenerateResponse(
            f"response {t.response_name or '?'} has no dispersion around its mean {y_bar!r}"
        )
    return explained / total


def fit(
    t: SymbolicTable,
    tol: float = nnqp.DEFAULT_TOL,
    max_iter: int | None = None,
    ridge_factor: float = nnqp.RIDGE_FACTOR,
) -> DSDModel:
    """Fit the DSD model by solving its quadratic program.

    A degenerate response does not stop the fit; Omega is then left undefined.
    """
    solution = nnqp.solve(build_qp(t), tol=tol, max_iter=max_iter, ridge_factor=ridge_factor)
    b = solution.b.copy()
    b[:-1] = np.maximum(b[:-1], 0.0)
    model = DSDModel.from_vector(
        b,
        partition=t.partition,
        response_name=t.response_name,
        predictor_names=t.predictor_names,
    )
    predicted = predict_table(model, t)
    se = sum(mallows_sq(y, y_hat) for y, y_hat in zip(t.response, predicted))
    try:
        goodness: float | None = omega(t, predicted)
    except DegenerateResponse as exc:
        logger.warning("Omega is undefined: %s", exc)
        goodness = None
    model = dataclasses.replace(
        model,
        omega=goodness,
        se=se,
        kkt_residual=solution.kkt_residual,
        iterations=solution.iterations,
        regularized=solution.regularized,
    )
    logger.info(
        "Fitted %s ~ %s: alphas=%s betas=%s gamma=%.6g omega=%s",
        t.response_name,
        ", ".join(t.predictor_names),
        np.round(model.alphas, 6).tolist(),
        np.round(model.betas, 6).tolist(),
        model.gamma,
        "undefined" if model.omega is None else f"{model.omega:.6g}",
    )
    return model


def error_function(observed: PiecewiseLinear, predicted: PiecewiseLinear) -> PiecewiseLinear:
    """Pointwise error observed(t) - predicted(t); need not be monotone."""
    difference = add(observed, scale(predicted, -1.0))
    return PiecewiseLinear(difference.cum_weights, difference.centers, difference.half_ranges)


# ============================================================================
# BASELINE PREDICTORS
# ============================================================================


def baseline_predict_vi(
    intercept: float,
    slope_mean: float,
    slope_centered: float,
    x: QuantileFunction,
    x_mean: float | None = None,
) -> QuantileFunction:
    """Prediction of a fitted mean-plus-centered-quantile model.

    ``q(t) = intercept + slope_mean * m + slope_centered * (q_X(t) - m)``. By default ``m``
    is the mean of this unit's own ``x``, not the mean of the predictor column; pass
    ``x_mean`` to center on another value such as the column's symbolic mean.
    """
    if slope_centered < 0:
        raise NegativeSlopeUnsupported(f"centered slope {slope_centered!r} would reverse the pieces")
    center = x.integral() if x_mean is None else float(x_mean)
    return QuantileFunction(
        x.cum_weights,
        intercept + slope_mean * center + slope_centered * (x.centers - center),
        slope_centered * x.half_ranges,
    )


def baseline_predict_bd(intercept: float, slope: float, x: QuantileFunction) -> QuantileFunction:
    """Prediction of a fitted bound-wise affine model: every bin bound maps to a + b * bound."""
    if slope < 0:
        raise NegativeSlopeUnsupported(f"slope {slope!r} would flip the bins")
    return QuantileFunction(x.cum_weights, intercept + slope * x.centers, slope * x.half_ranges)
