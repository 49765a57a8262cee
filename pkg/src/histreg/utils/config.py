"""Application settings read from ini files and the environment.

Built-in defaults mirror ``config/defaults/config.template.ini``. A user file given with
``--config`` or ``HISTREG_CONFIG`` overrides them key by key; ``HISTREG_THREADS`` and
``HISTREG_LOG_LEVEL`` override single values last.
"""

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from histreg.exceptions import DatasetError
from histreg.exceptions import InvalidParameter

CONFIG_ENV = "HISTREG_CONFIG"
THREADS_ENV = "HISTREG_THREADS"
LOG_LEVEL_ENV = "HISTREG_LOG_LEVEL"

DEFAULTS: dict[str, dict[str, str]] = {
    "paths": {"log_dir": "logs"},
    "logging": {
        "level": "INFO",
        "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        "file_name": "",
    },
    "solver": {"tol": "1e-9", "max_iter_factor": "100", "ridge_factor": "1e-10"},
    "simulation": {
        "replications": "200",
        "bins": "10",
        "microdata_n": "5000",
        "base_seed": "20170101",
        "threads": "0",
        "progress_every": "50",
    },
    "output": {"coefficient_decimals": "4", "distance_digits": "12"},
}


@dataclass(frozen=True)
class PathSettings:
    log_dir: Path


@dataclass(frozen=True)
class LoggingSettings:
    level: str
    format: str
    file_name: str


@dataclass(frozen=True)
class SolverSettings:
    tol: float
    max_iter_factor: int
    ridge_factor: float


@dataclass(frozen=True)
class SimulationSettings:
    replications: int
    bins: int
    microdata_n: int
    base_seed: int
    threads: int
    progress_every: int


@dataclass(frozen=True)
class OutputSettings:
    coefficient_decimals: int
    distance_digits: int


@dataclass(frozen=True)
class Settings:
    paths: PathSettings
    logging: LoggingSettings
    solver: SolverSettings
    simulation: SimulationSettings
    output: OutputSettings
    source: Path | None = None


def _number(parser: configparser.ConfigParser, section: str, key: str, kind: type) -> int | float:
    raw = parser.get(section, key)
    try:
        value = kind(raw)
    except ValueError:
        raise InvalidParameter(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}")
    return value


def load_config(path: str | Path | None = None) -> Settings:
    """Load settings from the defaults, an optional ini file and the environment.

    Raises:
        DatasetError: The file is missing or is not valid ini.
        InvalidParameter: A value has the wrong type or range.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)

    source = path or os.environ.get(CONFIG_ENV) or None
    if source is not None:
        source = Path(source)
        if not source.is_file():
            raise DatasetError(f"configuration file not found: {source}")
        try:
            parser.read(source, encoding="utf-8")
        except configparser.Error as exc:
            raise DatasetError(f"cannot parse configuration {source}: {exc}")

    if os.environ.get(THREADS_ENV):
        parser.set("simulation", "threads", os.environ[THREADS_ENV])
    if os.environ.get(LOG_LEVEL_ENV):
        parser.set("logging", "level", os.environ[LOG_LEVEL_ENV])

    level = parser.get("logging", "level").upper()
    if level not in logging.getLevelNamesMapping():
        raise InvalidParameter(f"[logging] level = {level!r} is not a logging level")

    solver = SolverSettings(
        tol=_number(parser, "solver", "tol", float),
        max_iter_factor=_number(parser, "solver", "max_iter_factor", int),
        ridge_factor=_number(parser, "solver", "ridge_factor", float),
    )
    if solver.tol <= 0 or solver.max_iter_factor < 1 or solver.ridge_factor < 0:
        raise InvalidParameter("[solver] needs tol > 0, max_iter_factor >= 1, ridge_factor >= 0")

    simulation = SimulationSettings(
        **{
            key: _number(parser, "simulation", key, int)
            for key in DEFAULTS["simulation"]
        }
    )
    if simulation.threads < 0:
        raise InvalidParameter(f"[simulation] threads = {simulation.threads} must be >= 0")

    return Settings(
        paths=PathSettings(
            log_dir=Path(parser.get("paths", "log_dir")),
        ),
        logging=LoggingSettings(
            level=level,
            format=parser.get("logging", "format"),
            file_name=parser.get("logging", "file_name"),
        ),
        solver=solver,
        simulation=simulation,
        output=OutputSettings(
            **{key: _number(parser, "output", key, int) for key in DEFAULTS["output"]}
        ),
        source=source,
    )
