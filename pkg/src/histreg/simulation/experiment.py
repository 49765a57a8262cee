"""Replication runner and summaries for the DSD simulation study.

Usage:
    cfg = ExperimentConfig(p=1, true_params=PARAMETER_SETS["a2_b1_g-1"],
                           dist_specs=(DistributionSpec(Family.UNIFORM),),
                           linearity=LinearityLevel.HIGH, m=100)
    summary = run_experiment(cfg, threads=4)
    print(summary.to_frame())
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from collections.abc import Iterable
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from multiprocessing import Pool
from multiprocessing import cpu_count

import numpy as np
import pandas as pd

from histreg.core.dsd import DSDModel
from histreg.core.dsd import SymbolicTable
from histreg.core.dsd import fit
from histreg.core.dsd import predict_table
from histreg.core.metrics import rmse_bounds
from histreg.core.metrics import rmse_m
from histreg.exceptions import HistRegError
from histreg.exceptions import InvalidParameter
from histreg.simulation.simgen import PARAMETER_SETS
from histreg.simulation.simgen import SAMPLE_SIZES
from histreg.simulation.simgen import DistributionSpec
from histreg.simulation.simgen import ExperimentConfig
from histreg.simulation.simgen import Family
from histreg.simulation.simgen import LinearityLevel
from histreg.simulation.simgen import NoiseLevel
from histreg.simulation.simgen import generate_table
from histreg.simulation.simgen import make_rng

logger = logging.getLogger(__name__)

METRICS = ("omega", "rmse_m", "rmse_l", "rmse_u")


@dataclass(frozen=True)
class ParameterStats:
    true: float
    mean: float | None
    std: float | None
    mse: float | None


@dataclass(frozen=True)
class MetricStats:
    mean: float | None
    std: float | None


@dataclass(frozen=True)
class ExperimentSummary:
    """Aggregates over the completed replications of one configuration.

    ``failures`` counts the replications that raised, keyed by exception class name.
    """

    config: ExperimentConfig
    replications: int
    completed: int
    parameters: dict[str, ParameterStats]
    metrics: dict[str, MetricStats]
    failures: dict[str, int] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """One row per model parameter with its true value, mean, std and MSE."""
        return pd.DataFrame(
            [
                {"parameter": name, "true": s.true, "mean": s.mean, "std": s.std, "mse": s.mse}
                for name, s in self.parameters.items()
            ]
        ).set_index("parameter")

    def to_dict(self) -> dict[str, object]:
        return {
            "config": self.config.describe(),
            "replications": self.replications,
            "completed": self.completed,
            "failures": dict(self.failures),
            "parameters": {
                name: {"true": s.true, "mean": s.mean, "std": s.std, "mse": s.mse}
                for name, s in self.parameters.items()
            },
            "metrics": {name: {"mean": s.mean, "std": s.std} for name, s in self.metrics.items()},
        }


# ============================================================================
# REPLICATIONS
# ============================================================================


def replication_table(cfg: ExperimentConfig, r: int) -> SymbolicTable:
    """The simulated table of replication ``r``, seeded with ``base_seed + r``."""
    return generate_table(cfg, make_rng(cfg.base_seed + r))


def _record(model: DSDModel, table: SymbolicTable) -> dict[str, float]:
    predicted = predict_table(model, table)
    rmse_l, rmse_u = rmse_bounds(table.response, predicted)
    row: dict[str, float] = {}
    for k, (a, b) in enumerate(zip(model.alphas, model.betas), start=1):
        row[f"alpha_{k}"] = float(a)
        row[f"beta_{k}"] = float(b)
    row["gamma"] = model.gamma
    row["omega"] = float(model.omega) if model.omega is not None else math.nan
    row["rmse_m"] = rmse_m(table.response, predicted)
    row["rmse_l"] = rmse_l
    row["rmse_u"] = rmse_u
    return row


def _run_replication(task: tuple[ExperimentConfig, int]) -> dict[str, object]:
    cfg, r = task
    try:
        table = replication_table(cfg, r)
        row: dict[str, object] = {"replication": r, "failure": None}
        row.update(_record(fit(table), table))
        return row
    except HistRegError as exc:
        return {"replication": r, "failure": type(exc).__name__, "message": str(exc)}


def _resolve_threads(threads: int, replications: int) -> int:
    if threads < 0:
        raise InvalidParameter(f"threads must be >= 0, got {threads}")
    return min(threads or cpu_count(), replications)


def _std(values: pd.Series) -> float:
    return float(values.std(ddof=1 if len(values) > 1 else 0))


def summarize(cfg: ExperimentConfig, rows: Sequence[dict[str, object]]) -> ExperimentSummary:
    """Aggregate replication records in replication order."""
    frame = pd.DataFrame(list(rows)).sort_values("replication", kind="stable")
    failed = frame[frame["failure"].notna()]
    done = frame[frame["failure"].isna()]
    failures = dict(sorted(Counter(failed["failure"]).items()))

    parameters = {}
    for name, true in cfg.true_params.named().items():
        if done.empty:
            parameters[name] = ParameterStats(true, None, None, None)
            continue
        values = done[name].astype(float)
        parameters[name] = ParameterStats(
            true=true,
            mean=float(values.mean()),
            std=_std(values),
            mse=float(((values - true) ** 2).mean()),
        )
    metrics = {}
    for name in METRICS:
        if done.empty:
            metrics[name] = MetricStats(None, None)
            continue
        values = done[name].astype(float).dropna()
        if values.empty:
            metrics[name] = MetricStats(None, None)
            continue
        metrics[name] = MetricStats(mean=float(values.mean()), std=_std(values))
    return ExperimentSummary(
        config=cfg,
        replications=cfg.replications,
        completed=len(done),
        parameters=parameters,
        metrics=metrics,
        failures=failures,
    )


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1, progress_every: int = 50
) -> ExperimentSummary:
    """Run every replication of ``cfg`` and aggregate the estimates.

    Replication r uses its own generator seeded with ``base_seed + r``, so the result
    does not depend on ``threads``. Fit errors are counted, never raised.

    Args:
        cfg: The experiment cell.
        threads: Worker processes; 0 uses every core, 1 runs in this process.
        progress_every: Log progress after this many replications (0 disables).
    """
    workers = _resolve_threads(threads, cfg.replications)
    tasks = ((cfg, r) for r in range(cfg.replications))
    logger.info(
        "Running %d replications (m=%d, p=%d) on %d worker(s)",
        cfg.replications,
        cfg.m,
        cfg.p,
        workers,
    )

    rows: list[dict[str, object]] = []

    def collect(results: Iterable[dict[str, object]]) -> None:
        for row in results:
            rows.append(row)
            if row["failure"] is not None:
                logger.warning(
                    "Replication %d failed: %s: %s", row["replication"], row["failure"], row["message"]
                )
            if progress_every and len(rows) % progress_every == 0:
                logger.info("%d/%d replications done", len(rows), cfg.replications)

    if workers == 1:
        collect(map(_run_replication, tasks))
    else:
        with Pool(workers) as pool:
            collect(pool.imap(_run_replication, tasks))

    summary = summarize(cfg, rows)
    if summary.failures:
        logger.warning("Failed replications: %s", summary.failures)
    return summary


# ============================================================================
# STUDY HELPERS
# ============================================================================


def factorial_configs(
    families: Sequence[Family] = tuple(Family),
    levels: Sequence[LinearityLevel] = tuple(LinearityLevel),
    sizes: Sequence[int] = SAMPLE_SIZES,
    parameter_sets: Sequence[str] = ("a2_b1_g-1", "a2_b8_g3", "a8_b0_g4"),
    replications: int = 200,
    bins: int = 10,
    microdata_n: int = 5000,
    base_seed: int = 20170101,
) -> list[ExperimentConfig]:
    """Every family x linearity x m x parameter-set cell of the simulation design."""
    configs = []
    for family, level, m, set_name in itertools.product(families, levels, sizes, parameter_sets):
        params = PARAMETER_SETS[set_name]
        configs.append(
            ExperimentConfig(
                p=params.p,
                true_params=params,
                dist_specs=(DistributionSpec(Family(family)),),
                linearity=LinearityLevel(level),
                m=m,
                bins=bins,
                microdata_n=microdata_n,
                replications=replications,
                base_seed=base_seed,
            )
        )
    return configs


def sensitivity_study(
    base_cfg: ExperimentConfig,
    center_factors: Sequence[float],
    range_factors: Sequence[float],
    threads: int = 1,
) -> pd.DataFrame:
    """Mean Ω and RMSE_M for every (center, range) noise pair on the base configuration."""
    rows = []
    for fc, fr in itertools.product(center_factors, range_factors):
        summary = run_experiment(
            replace(base_cfg, linearity=NoiseLevel(fc, fr)), threads=threads, progress_every=0
        )
        rows.append(
            {
                "center_factor": fc,
                "range_factor": fr,
                "omega_mean": summary.metrics["omega"].mean,
                "rmse_m_mean": summary.metrics["rmse_m"].mean,
                "completed": summary.completed,
            }
        )
    return pd.DataFrame(rows)


def symmetry_gaps(model: DSDModel, table: SymbolicTable) -> pd.DataFrame:
    """Mean minus median of every observed and predicted response distribution."""
    predicted = predict_table(model, table)
    rows = []
    for label, y, y_hat in zip(table.unit_labels, table.response, predicted):
        rows.append(
            {
                "unit": label,
                "observed_gap": y.mean - y.median,
                "predicted_gap": y_hat.mean - y_hat.median,
                "observed_lower": float(y.lower_bounds[0]),
                "observed_upper": float(y.upper_bounds[-1]),
                "predicted_lower": float(y_hat.lower_bounds[0]),
                "predicted_upper": float(y_hat.upper_bounds[-1]),
            }
        )
    return pd.DataFrame(rows).set_index("unit")


def gap_summary(gaps: pd.DataFrame, which: str = "predicted") -> dict[str, float]:
    """Mean absolute gap relative to the column range, and the share of positive gaps."""
    if which not in ("predicted", "observed"):
        raise InvalidParameter(f"which must be 'predicted' or 'observed', got {which!r}")
    gap = gaps[f"{which}_gap"].to_numpy(dtype=float)
    value_range = float(gaps[f"{which}_upper"].max() - gaps[f"{which}_lower"].min())
    mean_abs = float(np.mean(np.abs(gap)))
    return {
        "mean_abs_gap": mean_abs,
        "relative_mean_abs_gap": mean_abs / value_range if value_range > 0 else 0.0,
        "positive_share": float(np.mean(gap > 0)),
    }
