"""Synthetic symbolic tables for studying the DSD estimator.

Each predictor observation is the equiprobable histogram of ``microdata_n`` draws
from a unit-level distribution. The response starts as the exact DSD combination of
the predictors and is then disturbed by a continuous piecewise-linear error whose
size is set by the linearity level.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from types import MappingProxyType

import numpy as np

from histreg.core.dsd import DSDModel
from histreg.core.dsd import SymbolicTable
from histreg.core.dsd import predict
from histreg.core.histcore import PiecewiseLinear
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import add
from histreg.core.histcore import as_quantile
from histreg.core.histcore import histogram_from_quantile_knots
from histreg.core.histcore import to_quantile
from histreg.core.metrics import VariableColumn
from histreg.exceptions import InvalidParameter
from histreg.exceptions import LengthMismatch


class Family(str, Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"
    LOGNORMAL = "lognormal"
    NEG_LOGNORMAL = "neg_lognormal"
    CHISQ = "chisq"
    MIXTURE = "mixture"


# Ranges of the unit-level hyperparameters; each unit draws its own values uniformly.
# ``var`` is a variance, ``mu`` a location.
DEFAULT_HYPERPARAMETERS: dict[Family, dict[str, tuple[float, float]]] = {
    Family.UNIFORM: {"lower": (-2.0, 0.0), "upper": (0.0, 2.0)},
    Family.NORMAL: {"mu": (0.0, 1.0), "var": (0.0, 2.0)},
    Family.LOGNORMAL: {"mu": (-0.5, 0.5), "var": (0.5, 1.0)},
    Family.NEG_LOGNORMAL: {"mu": (-0.5, 0.5), "var": (0.5, 1.0)},
    Family.CHISQ: {"df": (1.0, 1.0)},
    Family.MIXTURE: {},
}

# Fixed components of the mixture family, one picked per unit.
MIXTURE_COMPONENTS: tuple[tuple[Family, dict[str, float]], ...] = (
    (Family.UNIFORM, {"lower": 1.0, "upper": 3.0}),
    (Family.NORMAL, {"mu": 1.0, "var": 1.0}),
    (Family.CHISQ, {"df": 1.0}),
    (Family.LOGNORMAL, {"mu": 0.0, "var": 0.5}),
    (Family.NEG_LOGNORMAL, {"mu": 0.0, "var": 0.5}),
)


@dataclass(frozen=True)
class DistributionSpec:
    """Distribution family of a predictor with the ranges of its unit-level parameters."""

    family: Family
    hyperparameters: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        family = Family(self.family)
        defaults = DEFAULT_HYPERPARAMETERS[family]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise InvalidParameter(f"{family.value} has no hyperparameters {sorted(unknown)}")
        merged = dict(defaults)
        for name, bounds in self.hyperparameters.items():
            low, high = (float(v) for v in bounds)
            if low > high:
                raise InvalidParameter(f"{family.value}.{name} range ({low}, {high}) is reversed")
            merged[name] = (low, high)
        if "var" in merged and merged["var"][0] < 0:
            raise InvalidParameter(f"{family.value} variance range must be nonnegative")
        if "var" in merged and merged["var"][1] <= 0:
            raise InvalidParameter(f"{family.value} variance range must include positive values")
        if "df" in merged and merged["df"][0] <= 0:
            raise InvalidParameter("chi-square degrees of freedom must be positive")
        if "lower" in merged and merged["lower"][1] > merged["upper"][0]:
            raise InvalidParameter("uniform lower endpoints must not exceed upper endpoints")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "hyperparameters", MappingProxyType(merged))

    def __reduce__(self):
        return (DistributionSpec, (self.family, dict(self.hyperparameters)))


@dataclass(frozen=True)
class NoiseLevel:
    """Error size as multiples of the column center scale and of the smallest half-range."""

    center_factor: float
    range_factor: float

    def __post_init__(self) -> None:
        if self.center_factor < 0 or self.range_factor < 0:
            raise InvalidParameter("noise factors must be nonnegative")


class LinearityLevel(str, Enum):
    HIGH = "high"
    MODERATE = "moderate"
    LOW = "low"

    @property
    def noise(self) -> NoiseLevel:
        return _LEVEL_NOISE[self]


_LEVEL_NOISE = {
    LinearityLevel.HIGH: NoiseLevel(3.0 / 8.0, 1.0 / 8.0),
    LinearityLevel.MODERATE: NoiseLevel(3.0 / 2.0, 1.0 / 2.0),
    LinearityLevel.LOW: NoiseLevel(3.0, 1.0),
}


@dataclass(frozen=True)
class TrueParameters:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    gamma: float

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        betas = tuple(float(b) for b in self.betas)
        if not alphas or len(alphas) != len(betas):
            raise LengthMismatch(f"{len(alphas)} alphas but {len(betas)} betas")
        if min(alphas + betas) < 0:
            raise InvalidParameter("true alphas and betas must be nonnegative")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def p(self) -> int:
        return len(self.alphas)

    def as_model(self) -> DSDModel:
        return DSDModel(np.array(self.alphas), np.array(self.betas), self.gamma)

    def named(self) -> dict[str, float]:
        """Values keyed as alpha_1, beta_1, ..., gamma."""
        values = {}
        for k, (a, b) in enumerate(zip(self.alphas, self.betas), start=1):
            values[f"alpha_{k}"] = a
            values[f"beta_{k}"] = b
        values["gamma"] = self.gamma
        return values


# Parameter sets used in the simulation study.
PARAMETER_SETS: dict[str, TrueParameters] = {
    "a2_b1_g-1": TrueParameters((2.0,), (1.0,), -1.0),
    "a2_b8_g3": TrueParameters((2.0,), (8.0,), 3.0),
    "a8_b0_g4": TrueParameters((8.0,), (0.0,), 4.0),
    "p3": TrueParameters((2.0, 0.5, 4.0), (1.0, 3.0, 2.0), -1.0),
}

SAMPLE_SIZES = (10, 30, 100, 250)


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the simulation design."""

    p: int
    true_params: TrueParameters
    dist_specs: tuple[DistributionSpec, ...]
    linearity: LinearityLevel | NoiseLevel
    m: int
    bins: int = 10
    microdata_n: int = 5000
    replications: int = 200
    base_seed: int = 20170101

    def __post_init__(self) -> None:
        specs = tuple(self.dist_specs)
        if len(specs) == 1 and self.p > 1:
            specs = specs * self.p
        if len(specs) != self.p:
            raise LengthMismatch(f"{len(specs)} distribution specs for {self.p} predictors")
        if self.true_params.p != self.p:
            raise LengthMismatch(f"true parameters have {self.true_params.p} predictors, p = {self.p}")
        if self.replications < 1:
            raise InvalidParameter("replications must be at least 1")
        if self.m < 2:
            raise InvalidParameter("m must be at least 2")
        if self.bins < 2:
            raise InvalidParameter("bins must be at least 2")
        if self.microdata_n < self.bins:
            raise InvalidParameter("microdata_n must be at least the number of bins")
        if not 0 <= self.base_seed < 2**64:
            raise InvalidParameter("base_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "dist_specs", specs)

    @property
    def noise(self) -> NoiseLevel:
        if isinstance(self.linearity, LinearityLevel):
            return self.linearity.noise
        return self.linearity

    def describe(self) -> dict[str, object]:
        """Plain-data echo of the configuration for reports."""
        return {
            "p": self.p,
            "true_params": {
                "alphas": list(self.true_params.alphas),
                "betas": list(self.true_params.betas),
                "gamma": self.true_params.gamma,
            },
            "dist_specs": [
                {
                    "family": spec.family.value,
                    "hyperparameters": {k: list(v) for k, v in spec.hyperparameters.items()},
                }
                for spec in self.dist_specs
            ],
            "linearity": (
                self.linearity.value
                if isinstance(self.linearity, LinearityLevel)
                else {
                    "center_factor": self.linearity.center_factor,
                    "range_factor": self.linearity.range_factor,
                }
            ),
            "m": self.m,
            "bins": self.bins,
            "microdata_n": self.microdata_n,
            "replications": self.replications,
            "base_seed": self.base_seed,
        }


@dataclass(frozen=True)
class ColumnStats:
    """Noise scales of a response column.

    ``c_ddot`` is the mean over pieces of the absolute column-mean center and
    ``min_half_range`` the smallest half-range over all units and pieces.
    """

    c_ddot: float
    min_half_range: float


# ============================================================================
# GENERATORS
# ============================================================================


def make_rng(seed: int) -> np.random.Generator:
    """Independent PCG64 stream for one replication."""
    return np.random.Generator(np.random.PCG64(seed))


def _draw(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    low, high = bounds
    return low if low == high else float(rng.uniform(low, high))


def _sample(family: Family, params: Mapping[str, float], size: int, rng: np.random.Generator) -> np.ndarray:
    if family is Family.UNIFORM:
        return rng.uniform(params["lower"], params["upper"], size)
    if family is Family.NORMAL:
        return rng.normal(params["mu"], math.sqrt(params["var"]), size)
    if family is Family.LOGNORMAL:
        return rng.lognormal(params["mu"], math.sqrt(params["var"]), size)
    if family is Family.NEG_LOGNORMAL:
        return -rng.lognormal(params["mu"], math.sqrt(params["var"]), size)
    if family is Family.CHISQ:
        return rng.chisquare(params["df"], size)
    raise InvalidParameter(f"cannot sample family {family.value} directly")


def gen_predictor_unit(
    spec: DistributionSpec,
    rng: np.random.Generator,
    bins: int = 10,
    microdata_n: int = 5000,
) -> QuantileFunction:
    """Equiprobable histogram of simulated microdata for one unit.

    The unit first draws its own distribution parameters from the spec ranges (or a
    mixture component), then ``microdata_n`` values; the bin bounds are the empirical
    quantiles at k / bins.
    """
    if spec.family is Family.MIXTURE:
        family, params = MIXTURE_COMPONENTS[int(rng.integers(len(MIXTURE_COMPONENTS)))]
    else:
        family = spec.family
        params = {name: _draw(rng, bounds) for name, bounds in spec.hyperparameters.items()}
    sample = _sample(family, params, microdata_n, rng)
    knots = np.quantile(sample, np.linspace(0.0, 1.0, bins + 1))
    return to_quantile(histogram_from_quantile_knots(knots))


def perfect_response(params: TrueParameters, xs: Sequence[QuantileFunction]) -> QuantileFunction:
    """Error-free response: the DSD combination of the predictors with the true parameters."""
    return predict(params.as_model(), xs)


def error_curve(a1: float, bs: Sequence[float], cum_weights: Sequence[float]) -> PiecewiseLinear:
    """Continuous piecewise-linear error.

    The first piece has center ``a1`` and half-range ``b_1``; every following piece i
    has half-range ``b_i`` and starts where piece i - 1 ends, so its center is the
    previous center plus ``b_{i-1} + b_i``.
    """
    bs = np.asarray(bs, dtype=float)
    cum = np.asarray(cum_weights, dtype=float)
    if bs.shape != cum.shape:
        raise LengthMismatch(f"{bs.size} slopes for {cum.size} pieces")
    steps = np.concatenate(([0.0], bs[:-1] + bs[1:]))
    return PiecewiseLinear(cum, a1 + np.cumsum(steps), bs)


def column_stats(column: Sequence[QuantileFunction] | VariableColumn) -> ColumnStats:
    col = column if isinstance(column, VariableColumn) else VariableColumn.from_values(column)
    c_ddot = float(np.mean(np.abs(col.centers.mean(axis=0))))
    return ColumnStats(c_ddot=c_ddot, min_half_range=float(col.half_ranges.min()))


def perturb(
    y_star: QuantileFunction,
    level: LinearityLevel | NoiseLevel,
    col_stats: ColumnStats,
    rng: np.random.Generator,
) -> QuantileFunction:
    """Add a random error curve to an error-free response.

    ``a1 ~ U(-f_c C, f_c C)`` and ``b_i ~ U(-f_r r_min, f_r r_min)``. A draw below
    ``-r_i`` would give the piece a negative half-range; it is raised to ``-r_i``,
    which collapses that piece to a point while keeping the result continuous.
    """
    noise = level.noise if isinstance(level, LinearityLevel) else level
    center_width = noise.center_factor * col_stats.c_ddot
    range_width = noise.range_factor * col_stats.min_half_range
    a1 = float(rng.uniform(-center_width, center_width))
    bs = rng.uniform(-range_width, range_width, size=y_star.n_pieces)
    bs = np.maximum(bs, -y_star.half_ranges)
    return as_quantile(add(y_star, error_curve(a1, bs, y_star.cum_weights)))


def generate_table(cfg: ExperimentConfig, rng: np.random.Generator) -> SymbolicTable:
    """One simulated table: predictors, error-free response, then the perturbed response."""
    predictors: list[list[QuantileFunction]] = [[] for _ in range(cfg.p)]
    for _ in range(cfg.m):
        for k, spec in enumerate(cfg.dist_specs):
            predictors[k].append(gen_predictor_unit(spec, rng, cfg.bins, cfg.microdata_n))
    y_star = [
        perfect_response(cfg.true_params, [col[j] for col in predictors]) for j in range(cfg.m)
    ]
    stats = column_stats(y_star)
    response = [perturb(y, cfg.linearity, stats, rng) for y in y_star]
    return SymbolicTable.build(
        response,
        predictors,
        unit_labels=[f"u{j + 1}" for j in range(cfg.m)],
        response_name="Y",
        predictor_names=[f"X{k + 1}" for k in range(cfg.p)],
    )
