"""Main CLI entry point for histreg."""

import functools
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click
from colorama import just_fix_windows_console
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel

from histreg import __version__
from histreg.core.dsd import fit
from histreg.core.dsd import predict
from histreg.core.dsd import predict_table
from histreg.core.metrics import mallows_sq
from histreg.core.metrics import rmse_bounds
from histreg.core.metrics import rmse_m
from histreg.core.metrics import rmse_per_unit
from histreg.core.metrics import wasserstein
from histreg.evaluation.compare_models import ModelComparison
from histreg.exceptions import InputError
from histreg.exceptions import NumericalError
from histreg.io.dataset import Dataset
from histreg.io.dataset import load_dataset
from histreg.io.dataset import load_equiprobable_csv
from histreg.io.reports import FitReport
from histreg.io.reports import PredictionReport
from histreg.io.reports import UnitPrediction
from histreg.io.reports import coefficients_of
from histreg.io.reports import dump_report
from histreg.io.reports import histogram_model
from histreg.io.reports import load_report
from histreg.io.reports import load_simulation_config
from histreg.io.reports import model_from_report
from histreg.io.reports import simulation_report
from histreg.simulation.experiment import run_experiment
from histreg.utils.config import Settings
from histreg.utils.config import load_config
from histreg.utils.logsetup import console as err_console
from histreg.utils.logsetup import setup_logging
from histreg.validation.validate_dataset import DatasetValidator

just_fix_windows_console()

console = Console()

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def handle_errors(command):
    """Print library errors on stderr and exit with 2 (input) or 3 (numerical)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except InputError as exc:
            err_console.print(f"[red]Error:[/red] {escape(str(exc))}", soft_wrap=True)
            ctx.exit(EXIT_INPUT)
        except NumericalError as exc:
            err_console.print(
                f"[red]Numerical failure ({type(exc).__name__}):[/red] {escape(str(exc))}",
                soft_wrap=True,
            )
            ctx.exit(EXIT_NUMERICAL)

    return wrapper


def float_list(count: int):
    """Click callback turning ``"a,b"`` into a tuple of ``count`` floats."""

    def parse(ctx, param, value):
        if value is None:
            return None
        try:
            numbers = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise click.BadParameter(f"expected {count} comma-separated numbers, got {value!r}")
        if len(numbers) != count or not all(math.isfinite(v) for v in numbers):
            raise click.BadParameter(f"expected {count} comma-separated numbers, got {value!r}")
        return numbers

    return parse


def name_list(ctx, param, value):
    names = [v.strip() for v in value.split(",") if v.strip()]
    if not names:
        raise click.BadParameter("at least one name is required")
    return names


def read_dataset(path: Path) -> Dataset:
    if path.suffix.lower() == ".csv":
        return load_equiprobable_csv(path)
    return load_dataset(path)


def emit(text: str, out: Optional[Path]) -> None:
    """Write ``text`` to ``out``, or to stdout without one."""
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
        err_console.print(f"[dim]Wrote {escape(str(out))}[/dim]")


def solver_options(settings: Settings, p: int) -> dict:
    return {
        "tol": settings.solver.tol,
        "max_iter": settings.solver.max_iter_factor * (2 * p + 1),
        "ridge_factor": settings.solver.ridge_factor,
    }


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Configuration file overriding the built-in defaults",
)
@click.option("-v", "--verbose", count=True, help="More log output (repeat for debug)")
@click.option("--quiet", is_flag=True, help="Only log errors")
@click.version_option(version=__version__, prog_name="histreg")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[Path], verbose: int, quiet: bool) -> None:
    """histreg - linear regression for histogram-valued variables."""
    try:
        settings = load_config(config_path)
    except InputError as exc:
        err_console.print(f"[red]Error:[/red] {escape(str(exc))}", soft_wrap=True)
        ctx.exit(EXIT_INPUT)
    level = None
    if quiet:
        level = "ERROR"
    elif verbose:
        level = "DEBUG" if verbose > 1 else "INFO"
    setup_logging(level, settings)
    ctx.obj = settings


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(path_type=Path), help="Dataset JSON or CSV")
@click.option("--response", required=True, help="Response variable")
@click.option("--predictors", required=True, callback=name_list, help="Comma-separated predictor variables")
@click.option("--equiprobable", type=click.IntRange(min=1), help="Requantize every value to K equal-weight pieces")
@click.option("--leave-out", "leave_out", help="Fit without this unit and report its prediction")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Report file (default: stdout)")
@click.pass_obj
@handle_errors
def fit_command(
    settings: Settings,
    data_path: Path,
    response: str,
    predictors: list[str],
    equiprobable: Optional[int],
    leave_out: Optional[str],
    out: Optional[Path],
) -> None:
    """Fit the DSD model and write a fit report."""
    dataset = read_dataset(data_path)
    table = dataset.table(response, predictors, equiprobable)
    training = table.drop(leave_out) if leave_out else table
    model = fit(training, **solver_options(settings, table.p))

    predicted = predict_table(model, training)
    per_unit = rmse_per_unit(training.response, predicted)
    rmse_l, rmse_u = rmse_bounds(training.response, predicted)
    held_out = None
    if leave_out:
        j = table.index(leave_out)
        prediction = predict(model, table.predictor_values(j))
        held_out = UnitPrediction(
            label=leave_out,
            predicted=histogram_model(prediction),
            rmse=math.sqrt(mallows_sq(table.response[j], prediction)),
        )

    report = FitReport(
        response=response,
        predictors=list(predictors),
        partition=[float(w) for w in model.partition],
        coefficients=coefficients_of(model),
        omega=model.omega,
        se=model.se,
        kkt_residual=model.kkt_residual,
        iterations=model.iterations,
        regularized=model.regularized,
        rmse_m=rmse_m(training.response, predicted),
        rmse_l=rmse_l,
        rmse_u=rmse_u,
        units=[
            UnitPrediction(label=label, predicted=histogram_model(q), rmse=float(err))
            for label, q, err in zip(training.unit_labels, predicted, per_unit)
        ],
        held_out=held_out,
    )

    decimals = settings.output.coefficient_decimals
    lines = [
        f"alpha[{name}] = {a:.{decimals}f}   beta[{name}] = {b:.{decimals}f}"
        for name, a, b in zip(model.predictor_names, model.alphas, model.betas)
    ]
    lines.append(f"gamma = {model.gamma:.{decimals}f}")
    goodness = "undefined" if model.omega is None else f"{model.omega:.{decimals}f}"
    lines.append(f"Omega = {goodness}   RMSE_M = {report.rmse_m:.{decimals}f}")
    if held_out is not None:
        lines.append(f"held-out {held_out.label}: Mallows error {held_out.rmse:.{decimals}f}")
    err_console.print(
        Panel(escape("\n".join(lines)), title=f"[bold]{escape(response)}[/bold]", border_style="cyan")
    )
    emit(dump_report(report), out)


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(path_type=Path), help="Fit report")
@click.option("--data", "data_path", required=True, type=click.Path(path_type=Path), help="Dataset JSON or CSV")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Prediction file (default: stdout)")
@handle_errors
def predict_command(model_path: Path, data_path: Path, out: Optional[Path]) -> None:
    """Predict response histograms for every unit of a dataset."""
    model = model_from_report(load_report(model_path, FitReport))
    dataset = read_dataset(data_path)
    dataset.require(model.predictor_names)
    has_response = model.response_name in dataset.variables

    units = []
    for label in dataset.labels:
        prediction = predict(model, [dataset.quantile(label, name) for name in model.predictor_names])
        error = None
        if has_response:
            error = math.sqrt(mallows_sq(dataset.quantile(label, model.response_name), prediction))
        units.append(UnitPrediction(label=label, predicted=histogram_model(prediction), rmse=error))

    report = PredictionReport(
        response=model.response_name, predictors=list(model.predictor_names), units=units
    )
    emit(dump_report(report), out)


@main.command("distance")
@click.option("--data", "data_path", required=True, type=click.Path(path_type=Path), help="Dataset JSON or CSV")
@click.option("--var", "variable", required=True, help="Variable")
@click.option("--unit-a", "unit_a", required=True, help="First unit label")
@click.option("--unit-b", "unit_b", required=True, help="Second unit label")
@click.option(
    "--metric",
    type=click.Choice(["mallows", "wasserstein"]),
    default="mallows",
    show_default=True,
    help="Mallows (L2) or Wasserstein (L1) distance",
)
@click.pass_obj
@handle_errors
def distance_command(
    settings: Settings, data_path: Path, variable: str, unit_a: str, unit_b: str, metric: str
) -> None:
    """Distance between the values of two units."""
    dataset = read_dataset(data_path)
    a = dataset.quantile(unit_a, variable)
    b = dataset.quantile(unit_b, variable)
    value = math.sqrt(mallows_sq(a, b)) if metric == "mallows" else wasserstein(a, b)
    click.echo(f"{value:.{settings.output.distance_digits}g}")


@main.command("simulate")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(path_type=Path),
    help="Simulation config (YAML or JSON)",
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Summary file (default: stdout)")
@click.option("--replications", type=click.IntRange(min=1), help="Override the replication count")
@click.option("--threads", type=click.IntRange(min=0), help="Worker processes, 0 for all cores")
@click.pass_obj
@handle_errors
def simulate_command(
    settings: Settings,
    config_path: Path,
    out: Optional[Path],
    replications: Optional[int],
    threads: Optional[int],
) -> None:
    """Run a simulation experiment and write its summary."""
    cfg = load_simulation_config(config_path, settings.simulation)
    if replications is not None:
        cfg = replace(cfg, replications=replications)
    summary = run_experiment(
        cfg,
        threads=settings.simulation.threads if threads is None else threads,
        progress_every=settings.simulation.progress_every,
    )
    frame = summary.to_frame()
    err_console.print(
        f"[cyan]{summary.completed}/{summary.replications} replications completed[/cyan]"
    )
    err_console.print(escape(frame.to_string(float_format=lambda v: f"{v:.4g}")))
    emit(dump_report(simulation_report(summary)), out)


@main.command("validate")
@click.option("--data", "data_path", required=True, type=click.Path(path_type=Path), help="Dataset JSON")
@click.pass_context
def validate_command(ctx: click.Context, data_path: Path) -> None:
    """List every problem in a dataset file."""
    results = DatasetValidator(data_path, console=console).validate_all()
    if results["total_errors"]:
        ctx.exit(EXIT_INPUT)


@main.command("compare")
@click.option("--data", "data_path", required=True, type=click.Path(path_type=Path), help="Dataset JSON or CSV")
@click.option("--response", required=True, help="Response variable")
@click.option("--predictor", required=True, help="Predictor variable")
@click.option("--bd", callback=float_list(2), help="BD coefficients a,b")
@click.option("--vi", callback=float_list(3), help="VI coefficients a,b,c")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Write the scores as JSON")
@click.pass_obj
@handle_errors
def compare_command(
    settings: Settings,
    data_path: Path,
    response: str,
    predictor: str,
    bd: Optional[tuple[float, float]],
    vi: Optional[tuple[float, float, float]],
    out: Optional[Path],
) -> None:
    """Score DSD against the BD and VI baselines."""
    table = read_dataset(data_path).table(response, [predictor])
    comparison = ModelComparison(table)
    scores = comparison.evaluate_all_methods(bd=bd, vi=vi, **solver_options(settings, 1))
    comparison.print_results(scores, console, settings.output.coefficient_decimals)
    if out is not None:
        out.write_text(json.dumps(ModelComparison.to_dict(scores), indent=2) + "\n", encoding="utf-8")
        err_console.print(f"[dim]Wrote {escape(str(out))}[/dim]")


if __name__ == "__main__":
    main()
