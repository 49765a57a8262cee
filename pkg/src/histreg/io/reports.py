"""JSON reports written by the command line: fits, predictions and simulation summaries.

Every report carries ``"schema": 1`` and the library version. Floats are written by
``json.dumps`` in their shortest round-trip form, so a report parses back to the same
numbers and identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal
from typing import TypeVar

import yaml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError

from histreg import __version__
from histreg.core.dsd import DSDModel
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import to_histogram
from histreg.exceptions import DatasetError
from histreg.exceptions import InvalidParameter
from histreg.io.dataset import SCHEMA_VERSION
from histreg.io.dataset import HistogramModel
from histreg.simulation.experiment import ExperimentSummary
from histreg.simulation.simgen import PARAMETER_SETS
from histreg.simulation.simgen import DistributionSpec
from histreg.simulation.simgen import ExperimentConfig
from histreg.simulation.simgen import Family
from histreg.simulation.simgen import LinearityLevel
from histreg.simulation.simgen import NoiseLevel
from histreg.simulation.simgen import TrueParameters
from histreg.utils.config import SimulationSettings

R = TypeVar("R", bound="Report")


class Report(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    version: str = __version__


class Coefficients(BaseModel):
    alphas: list[float]
    betas: list[float]
    gamma: float


class UnitPrediction(BaseModel):
    label: str
    predicted: HistogramModel
    rmse: float | None = None


class FitReport(Report):
    kind: Literal["fit"] = "fit"
    response: str
    predictors: list[str]
    partition: list[float]
    coefficients: Coefficients
    omega: float | None
    se: float
    kkt_residual: float
    iterations: int
    regularized: bool
    rmse_m: float
    rmse_l: float
    rmse_u: float
    units: list[UnitPrediction]
    held_out: UnitPrediction | None = None


class PredictionReport(Report):
    kind: Literal["prediction"] = "prediction"
    response: str
    predictors: list[str]
    units: list[UnitPrediction]


class ParameterSummary(BaseModel):
    true: float
    mean: float | None
    std: float | None
    mse: float | None


class MetricSummary(BaseModel):
    mean: float | None
    std: float | None


class SimulationReport(Report):
    kind: Literal["simulation"] = "simulation"
    seed: int
    config: dict
    replications: int
    completed: int
    failures: dict[str, int]
    parameters: dict[str, ParameterSummary]
    metrics: dict[str, MetricSummary]


def histogram_model(q: QuantileFunction) -> HistogramModel:
    h = to_histogram(q)
    return HistogramModel(bins=list(h.bins), weights=list(h.weights))


def coefficients_of(model: DSDModel) -> Coefficients:
    return Coefficients(
        alphas=[float(a) for a in model.alphas],
        betas=[float(b) for b in model.betas],
        gamma=model.gamma,
    )


def model_from_report(report: FitReport) -> DSDModel:
    """Model with the coefficients, names and partition of a fit report."""
    return DSDModel(
        report.coefficients.alphas,
        report.coefficients.betas,
        report.coefficients.gamma,
        omega=report.omega,
        se=report.se,
        kkt_residual=report.kkt_residual,
        partition=report.partition,
        response_name=report.response,
        predictor_names=tuple(report.predictors),
        iterations=report.iterations,
        regularized=report.regularized,
    )


def render(report: Report) -> str:
    return json.dumps(report.model_dump(mode="json", by_alias=True), indent=2) + "\n"


def dump_report(report: Report, path: str | Path | None = None) -> str:
    """Serialize ``report``; write it to ``path`` when given. Returns the text."""
    text = render(report)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_report(path: str | Path, kind: type[R]) -> R:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror or exc}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno)
    try:
        report = kind.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        location = ".".join(str(x) for x in error["loc"])
        raise DatasetError(f"{path}: {error['msg']}", location=location or None)
    if report.schema_version != SCHEMA_VERSION:
        raise DatasetError(f"{path}: unsupported schema {report.schema_version}")
    return report


# ============================================================================
# SIMULATION CONFIGURATION
# ============================================================================


class TrueParametersModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alphas: list[float]
    betas: list[float]
    gamma: float


class DistributionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Family
    hyperparameters: dict[str, tuple[float, float]] = {}


class NoiseModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center_factor: float = Field(ge=0)
    range_factor: float = Field(ge=0)


class SimulationConfigFile(BaseModel):
    """YAML or JSON description of one simulation cell.

    ``true_params`` is either explicit coefficients or the name of a preset from
    :data:`histreg.simulation.simgen.PARAMETER_SETS`. Missing size settings fall back
    to the ``[simulation]`` configuration section.
    """

    model_config = ConfigDict(extra="forbid")

    true_params: TrueParametersModel | str
    dist_specs: list[DistributionModel] = Field(min_length=1)
    linearity: LinearityLevel | NoiseModel
    m: int
    p: int | None = None
    bins: int | None = None
    microdata_n: int | None = None
    replications: int | None = None
    base_seed: int | None = None

    def to_config(self, defaults: SimulationSettings) -> ExperimentConfig:
        if isinstance(self.true_params, str):
            if self.true_params not in PARAMETER_SETS:
                raise InvalidParameter(
                    f"unknown parameter set {self.true_params!r}; "
                    f"choose from {', '.join(PARAMETER_SETS)}"
                )
            params = PARAMETER_SETS[self.true_params]
        else:
            params = TrueParameters(
                tuple(self.true_params.alphas), tuple(self.true_params.betas), self.true_params.gamma
            )
        linearity = (
            self.linearity
            if isinstance(self.linearity, LinearityLevel)
            else NoiseLevel(self.linearity.center_factor, self.linearity.range_factor)
        )
        return ExperimentConfig(
            p=self.p if self.p is not None else params.p,
            true_params=params,
            dist_specs=tuple(DistributionSpec(d.family, d.hyperparameters) for d in self.dist_specs),
            linearity=linearity,
            m=self.m,
            bins=self.bins if self.bins is not None else defaults.bins,
            microdata_n=self.microdata_n if self.microdata_n is not None else defaults.microdata_n,
            replications=(
                self.replications if self.replications is not None else defaults.replications
            ),
            base_seed=self.base_seed if self.base_seed is not None else defaults.base_seed,
        )


def load_simulation_config(path: str | Path, defaults: SimulationSettings) -> ExperimentConfig:
    """Parse a YAML or JSON simulation config into an :class:`ExperimentConfig`."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror or exc}")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise DatasetError(
            f"{path}: invalid YAML: {getattr(exc, 'problem', None) or exc}",
            line=mark.line + 1 if mark is not None else None,
        )
    try:
        document = SimulationConfigFile.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        location = ".".join(str(x) for x in error["loc"])
        raise DatasetError(f"{path}: {error['msg']}", location=location or None)
    return document.to_config(defaults)


def simulation_report(summary: ExperimentSummary) -> SimulationReport:
    data = summary.to_dict()
    return SimulationReport(
        seed=summary.config.base_seed,
        config=data["config"],
        replications=summary.replications,
        completed=summary.completed,
        failures=summary.failures,
        parameters=data["parameters"],
        metrics=data["metrics"],
    )
