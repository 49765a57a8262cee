"""Histogram-valued datasets stored as JSON.

A dataset file looks like::

    {
      "schema": 1,
      "variables": ["hematocrit", "hemoglobin"],
      "units": [
        {"label": "u1",
         "values": {"hematocrit": {"bins": [[33.29, 37.52], [37.52, 39.61]], "weights": [0.6, 0.4]},
                    "hemoglobin": {"bins": [[11.54, 12.19], [12.19, 12.8]], "weights": [0.4, 0.6]}}}
      ]
    }

Every unit must define every listed variable. Problems are reported as
:class:`~histreg.exceptions.DatasetError` carrying the JSON line and the unit/variable
coordinates.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError

from histreg.core.dsd import SymbolicTable
from histreg.core.histcore import HistogramValue
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import histogram_from_quantile_knots
from histreg.core.histcore import histogram_violations
from histreg.core.histcore import requantize
from histreg.core.histcore import to_histogram
from histreg.core.histcore import to_quantile
from histreg.exceptions import DatasetError
from histreg.exceptions import HistRegError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HEMATOCRIT = "hematocrit.json"


class HistogramModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bins: list[tuple[float, float]]
    weights: list[float]


class UnitModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str
    values: dict[str, HistogramModel]


class DatasetFile(BaseModel):
    """On-disk layout of a dataset."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    variables: list[str]
    units: list[UnitModel]


# ============================================================================
# PARSING AND DIAGNOSTICS
# ============================================================================


def line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def unit_line(text: str, label: str) -> int | None:
    """Line of the ``"label": "<label>"`` entry, if it can be found."""
    match = re.search(r'"label"\s*:\s*' + re.escape(json.dumps(label)), text)
    return line_of(text, match.start()) if match else None


def _location(loc: Sequence[int | str], doc: object) -> str:
    """Readable coordinates for a pydantic error location such as ('units', 2, 'values', 'Y')."""
    parts = []
    if len(loc) >= 2 and loc[0] == "units" and isinstance(loc[1], int):
        label = None
        if isinstance(doc, dict) and isinstance(doc.get("units"), list) and loc[1] < len(doc["units"]):
            unit = doc["units"][loc[1]]
            label = unit.get("label") if isinstance(unit, dict) else None
        parts.append(f"unit {label!r}" if label is not None else f"unit #{loc[1] + 1}")
        if len(loc) >= 4 and loc[2] == "values":
            parts.append(f"variable {loc[3]!r}")
        rest = loc[4:] if len(loc) >= 4 and loc[2] == "values" else loc[2:]
    else:
        rest = loc
    if rest:
        parts.append(".".join(str(x) for x in rest))
    return " / ".join(parts)


def parse_document(text: str, source: str = "<string>") -> DatasetFile:
    """Decode and schema-check a dataset document.

    Raises:
        DatasetError: Invalid JSON (with its line) or a schema violation (with the unit
            and variable it concerns).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{source}: invalid JSON: {exc.msg}", line=exc.lineno)
    try:
        doc = DatasetFile.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        loc = tuple(error["loc"])
        line = None
        if len(loc) >= 2 and loc[0] == "units" and isinstance(loc[1], int):
            unit = raw["units"][loc[1]] if isinstance(raw, dict) else None
            if isinstance(unit, dict) and isinstance(unit.get("label"), str):
                line = unit_line(text, unit["label"])
        raise DatasetError(
            f"{source}: {error['msg']}", line=line, location=_location(loc, raw) or None
        )
    if doc.schema_version != SCHEMA_VERSION:
        raise DatasetError(
            f"{source}: unsupported schema {doc.schema_version}, expected {SCHEMA_VERSION}"
        )
    return doc


def dataset_issues(doc: DatasetFile, text: str = "") -> list[DatasetError]:
    """Every structural and histogram problem of a parsed document, in file order."""
    issues: list[DatasetError] = []
    if not doc.variables:
        issues.append(DatasetError("no variables declared"))
    if not doc.units:
        issues.append(DatasetError("no units"))
    for name in sorted({v for v in doc.variables if doc.variables.count(v) > 1}):
        issues.append(DatasetError(f"variable {name!r} is declared more than once"))

    seen: set[str] = set()
    for unit in doc.units:
        line = unit_line(text, unit.label) if text else None
        if unit.label in seen:
            issues.append(
                DatasetError("duplicate unit label", line=line, location=f"unit {unit.label!r}")
            )
        seen.add(unit.label)
        for name in doc.variables:
            location = f"unit {unit.label!r} / variable {name!r}"
            value = unit.values.get(name)
            if value is None:
                issues.append(DatasetError("variable is missing", line=line, location=location))
                continue
            for violation in histogram_violations(value.bins, value.weights):
                issues.append(DatasetError(str(violation), line=line, location=location))
        for name in unit.values:
            if name not in doc.variables:
                issues.append(
                    DatasetError(
                        "variable is not declared in 'variables'",
                        line=line,
                        location=f"unit {unit.label!r} / variable {name!r}",
                    )
                )
    return issues


# ============================================================================
# DATASET
# ============================================================================


@dataclass(frozen=True)
class Dataset:
    """A validated dataset: one histogram per unit and variable."""

    variables: tuple[str, ...]
    labels: tuple[str, ...]
    values: dict[str, dict[str, HistogramValue]]
    source: str = "<memory>"

    @classmethod
    def from_document(cls, doc: DatasetFile, text: str = "", source: str = "<memory>") -> Dataset:
        issues = dataset_issues(doc, text)
        if issues:
            first = issues[0]
            if len(issues) > 1:
                logger.debug("%s has %d more issues", source, len(issues) - 1)
            raise DatasetError(
                f"{source}: {first.message}", line=first.line, location=first.location
            )
        values = {
            unit.label: {
                name: HistogramValue(
                    tuple(tuple(b) for b in unit.values[name].bins), tuple(unit.values[name].weights)
                )
                for name in doc.variables
            }
            for unit in doc.units
        }
        return cls(tuple(doc.variables), tuple(u.label for u in doc.units), values, source)

    @classmethod
    def from_quantiles(
        cls, columns: dict[str, Sequence[QuantileFunction]], labels: Sequence[str] | None = None
    ) -> Dataset:
        """Dataset holding the histograms of the given quantile-function columns."""
        m = len(next(iter(columns.values())))
        labels = tuple(labels) if labels is not None else tuple(f"u{j + 1}" for j in range(m))
        values = {
            label: {name: to_histogram(col[j]) for name, col in columns.items()}
            for j, label in enumerate(labels)
        }
        return cls(tuple(columns), labels, values)

    @property
    def m(self) -> int:
        return len(self.labels)

    def require(self, names: Sequence[str]) -> None:
        for name in names:
            if name not in self.variables:
                raise DatasetError(
                    f"{self.source}: unknown variable {name!r}; available: {', '.join(self.variables)}"
                )

    def require_unit(self, label: str) -> None:
        if label not in self.values:
            raise DatasetError(f"{self.source}: unknown unit {label!r}")

    def histogram(self, label: str, name: str) -> HistogramValue:
        self.require([name])
        self.require_unit(label)
        return self.values[label][name]

    def quantile(self, label: str, name: str, equiprobable: int | None = None) -> QuantileFunction:
        q = to_quantile(self.histogram(label, name))
        return requantize(q, equiprobable) if equiprobable else q

    def column(self, name: str, equiprobable: int | None = None) -> list[QuantileFunction]:
        self.require([name])
        return [self.quantile(label, name, equiprobable) for label in self.labels]

    def table(
        self, response: str, predictors: Sequence[str], equiprobable: int | None = None
    ) -> SymbolicTable:
        """Symbolic table of the response and predictors on their global partition."""
        self.require([response, *predictors])
        if not predictors:
            raise DatasetError(f"{self.source}: at least one predictor is required")
        try:
            return SymbolicTable.build(
                self.column(response, equiprobable),
                [self.column(name, equiprobable) for name in predictors],
                unit_labels=self.labels,
                response_name=response,
                predictor_names=predictors,
            )
        except HistRegError:
            raise
        except ValueError as exc:
            raise DatasetError(f"{self.source}: {exc}")

    def to_document(self) -> DatasetFile:
        return DatasetFile(
            schema_version=SCHEMA_VERSION,
            variables=list(self.variables),
            units=[
                UnitModel(
                    label=label,
                    values={
                        name: HistogramModel(
                            bins=[tuple(b) for b in h.bins], weights=list(h.weights)
                        )
                        for name, h in self.values[label].items()
                    },
                )
                for label in self.labels
            ],
        )


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror or exc}")
    dataset = Dataset.from_document(parse_document(text, str(path)), text, str(path))
    logger.debug("Loaded %s: %d units, variables %s", path, dataset.m, list(dataset.variables))
    return dataset


def dump_dataset(dataset: Dataset, path: str | Path) -> None:
    document = dataset.to_document().model_dump(mode="json", by_alias=True)
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def packaged_dataset(name: str = HEMATOCRIT) -> Dataset:
    """Load a dataset shipped in ``histreg.resources``."""
    resource = resources.files("histreg.resources").joinpath(name)
    text = resource.read_text(encoding="utf-8")
    return Dataset.from_document(parse_document(text, name), text, name)


def load_equiprobable_csv(path: str | Path) -> Dataset:
    """Dataset from rows ``unit,variable,q0,...,qK`` of quantile knots.

    The first line is a header. Rows may carry different numbers of knots; each row
    becomes an equiprobable histogram with one bin per consecutive knot pair.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}")
    if frame.shape[1] < 4:
        raise DatasetError(f"{path}: expected columns unit,variable,q0,q1,... ")
    unit_col, var_col = frame.columns[:2]

    variables: list[str] = []
    units: dict[str, dict[str, HistogramModel]] = {}
    for row_number, row in enumerate(frame.itertuples(index=False), start=2):
        label, name = str(row[0]), str(row[1])
        try:
            knots = pd.to_numeric(pd.Series(row[2:]), errors="raise").dropna().to_numpy(float)
            histogram = histogram_from_quantile_knots(knots)
        except (ValueError, TypeError) as exc:
            raise DatasetError(
                str(exc), line=row_number, location=f"unit {label!r} / variable {name!r}"
            )
        if name not in variables:
            variables.append(name)
        values = units.setdefault(label, {})
        if name in values:
            raise DatasetError(
                "duplicate row", line=row_number, location=f"unit {label!r} / variable {name!r}"
            )
        values[name] = HistogramModel(
            bins=[tuple(b) for b in histogram.bins], weights=list(np.asarray(histogram.weights))
        )
    logger.debug("Read %d rows (%s, %s) from %s", len(frame), unit_col, var_col, path)
    doc = DatasetFile(
        schema_version=SCHEMA_VERSION,
        variables=variables,
        units=[UnitModel(label=label, values=values) for label, values in units.items()],
    )
    return Dataset.from_document(doc, source=str(path))
